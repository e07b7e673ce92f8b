"""Exception types shared across the package.

The hierarchy mirrors how failures are reported at the process boundary:
bad inputs, numerical breakdowns, and blown resource budgets map to
distinct CLI exit codes, so library code must keep them distinguishable.
"""


class CoopHarqError(Exception):
    """Base class for every error this package raises deliberately."""


class ConfigError(CoopHarqError, ValueError):
    """Invalid argument, domain violation, or unusable configuration."""


class NumericFailure(CoopHarqError, ArithmeticError):
    """A numerical procedure lost validity (bad pivot, non-convergence,
    impossible intermediate value).  The message carries diagnostics."""


class RangeError(CoopHarqError, OverflowError):
    """A requested quantity is representable in the model but not in
    double precision (e.g. a base inverse moment past exp overflow)."""


class ResourceLimit(CoopHarqError, RuntimeError):
    """The request exceeds a documented resource bound."""
