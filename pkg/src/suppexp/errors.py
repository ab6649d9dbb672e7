"""Exception types shared across the package (mapped to CLI exit codes)."""


class SuppExpError(Exception):
    exit_code = 1


class HypothesisViolation(SuppExpError, ValueError):
    """Input does not satisfy the preconditions of an operation."""

    exit_code = 2


class BudgetExceeded(SuppExpError):
    """An exact computation would exceed its configured budget."""

    exit_code = 3


class SearchBudgetExceeded(BudgetExceeded):
    """A constructive search ran out of halving steps."""
