"""Exception types shared across the package."""


class EulerlabError(Exception):
    """Base class for all package-specific errors."""


class NonZeroMean(EulerlabError):
    """Raised when an operator restricted to mean-free fields receives a field
    whose mean is not negligible relative to its amplitude."""


class IntegerOrder(EulerlabError):
    """Raised when a Holder smoothness order is an integer; the Holder
    quotient term is undefined there."""


class DegenerateBasis(EulerlabError):
    """Raised when requested control wave vectors produce a linearly
    dependent generating set."""


class CflViolation(EulerlabError):
    """Raised when the adaptive time step underflows, i.e. the advective CFL
    restriction cannot be met with a positive step."""


class Divergence(EulerlabError):
    """Raised when the solution amplitude grows past the blow-up guard or
    becomes non-finite."""


class OutOfRange(EulerlabError):
    """Raised when a requested time lies outside a stored trajectory."""


class DegenerateFit(EulerlabError):
    """Raised when a packing curve carries no slope information (all counts
    in the fit window equal)."""


class OutOfBall(EulerlabError):
    """Raised when a function handed to the step-function quantizer is not in
    the stated W11 ball."""
