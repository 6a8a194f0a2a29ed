"""
Exception hierarchy for the kernelizer package.

Every error raised by the library derives from KernelizerError so callers
(the CLI in particular) can map failures to exit codes in one place.
"""


class KernelizerError(ValueError):
    """Base class for all library errors."""


class InvalidPrecisionError(KernelizerError):
    """Rounding precision (or another positive-only parameter) is not positive."""


class CorruptFactorizationError(KernelizerError):
    """Kernel/ymap pair violates the factorization invariants."""


class NotApplicableError(KernelizerError):
    """Operation is not defined for the given tensor rank."""


class ShapeMismatchError(KernelizerError):
    """Operand extents do not agree."""


class UnsupportedAxisError(KernelizerError):
    """Axis is out of range or not supported by the requested variant."""


class PreconditionError(KernelizerError):
    """Input violates a documented precondition."""


class InternalInvariantError(KernelizerError):
    """A synthesis invariant failed; indicates a bug rather than bad input."""


class MalformedSchemeError(KernelizerError):
    """Scheme (or netlist built from it) references something that does not exist."""


class ZeroPivotError(KernelizerError):
    """Row normalization hit a zero pivot element."""


class MissingPrecisionError(KernelizerError):
    """Float data needs an explicit rounding precision before factorization."""


class MalformedStreamError(KernelizerError):
    """Sample stream file cannot be parsed."""
