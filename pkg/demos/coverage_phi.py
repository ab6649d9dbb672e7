# %% [markdown]
# Support-expansion sequences of a small pattern and of a grid operator

# %%
from fractions import Fraction

from suppexp import discrete, oplab
from suppexp.suite import capped_half

p = discrete.example_pattern()
print(p.to_coo_text())
print("exact :", list(discrete.phi_sequence(p, 4, "Exact").values))
print("greedy:", list(discrete.phi_sequence(p, 4, "Greedy").values))
print("RC finite:", discrete.is_rc_finite(p))

# %%
op = oplab.build_weighted_composition(capped_half(), 2, oplab.Grid(h=Fraction(1, 256)))
xs = [0.5, 1.0, 3.0]
print("Phi_a     :", oplab.measure_phi(op, xs).values)
print("Phi_adj   :", oplab.measure_phi(oplab.adjoint(op), xs).values)
rep = oplab.collapse_check(op, step=1 / 64)
print("collapse  :", rep)
