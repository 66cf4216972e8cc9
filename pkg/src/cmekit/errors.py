"""Exception types shared across cmekit modules."""


class CmekitError(Exception):
    """Base class for all cmekit errors."""


class NonFiniteError(CmekitError, ValueError):
    """An input array contains NaN or infinite entries."""


class NonSymmetricError(CmekitError, ValueError):
    """A matrix required to be symmetric is not, beyond tolerance."""


class NotPSDError(CmekitError, ValueError):
    """A matrix required to be positive semi-definite has a significantly
    negative eigenvalue."""


class RangeInclusionError(CmekitError, ValueError):
    """A required range inclusion ``ran A <= ran B`` fails beyond tolerance."""


class DimensionMismatchError(CmekitError, ValueError):
    """Operands have incompatible shapes."""


class RankOutOfBoundsError(CmekitError, ValueError):
    """A truncation rank lies outside the admissible range."""


class SingularSpectrumError(CmekitError, ValueError):
    """A population eigenvalue needed for whitening is numerically zero."""


class ValidationError(CmekitError, ValueError):
    """A joint specification or probability table fails validation."""


class InternalConsistencyError(CmekitError, RuntimeError):
    """Two independent computation routes of the same quantity disagree."""
