"""Support-expansion toolkit: extended functions, transforms, containment poset,
discrete patterns, operator laboratory and chain constructions."""
from . import chains, discrete, extfun, oplab, poset, transforms
from .errors import BudgetExceeded, HypothesisViolation, SuppExpError

__all__ = ["chains", "discrete", "extfun", "oplab", "poset", "transforms",
           "BudgetExceeded", "HypothesisViolation", "SuppExpError"]
__version__ = "0.1.0"
