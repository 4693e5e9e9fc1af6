"""Exception types shared across the package."""


class HerqtError(Exception):
    """Base class for all package errors."""


class OutOfRangeError(HerqtError):
    """Frequency outside a model's validity range."""


class ModelUnderspecifiedError(HerqtError):
    """A dispersion model is missing fields required by its kind."""


class NonPositiveSlopeError(HerqtError):
    """dk/domega <= 0 where a positive group velocity is required."""


class DegenerateGvmError(HerqtError):
    """Both group-delay mismatches vanish; the JSI angle is undefined."""


class EmptyScanError(HerqtError):
    """A scan interval contains no sample points."""


class NoIntersectionError(HerqtError):
    """No operating point with the requested JSI angle on the contour."""


class NonPositiveLengthError(HerqtError):
    """Fiber length must be positive."""


class SvdFailureError(HerqtError):
    """The SVD of the joint amplitude did not converge."""


class EmptyOverlapError(HerqtError):
    """Detector filter has no support on the idler grid."""


class TruncationUnconvergedError(HerqtError):
    """A physical scalar moved by more than tolerance under cutoff+1."""


class MismatchedBasesError(HerqtError):
    """Two arms do not share the same mode basis."""


class IndexOutOfRangeError(HerqtError):
    """Arm, mode, or photon-number index outside the truncated space."""


class BasisMissingModeError(HerqtError):
    """A required spectral envelope is not resolvable in the mode basis."""


class ConstraintViolationError(HerqtError):
    """The displaced-measurement constraint alpha/2 = i z sqrt(1-tau) fails."""


class ConfigError(HerqtError):
    """Invalid or inconsistent scenario configuration (CLI exit code 2)."""


class NumericalError(HerqtError):
    """Unrecoverable numerical failure (CLI exit code 3)."""


class RankDeficientWarning(UserWarning):
    """A supplied envelope is linearly dependent on earlier ones."""


class TruncationRiskWarning(UserWarning):
    """A displacement amplitude is large for the configured cutoff."""
