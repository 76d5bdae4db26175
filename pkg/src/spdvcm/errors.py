"""Exception hierarchy for the spdvcm package."""


class SpdvcmError(Exception):
    """Base class for all spdvcm errors."""


class NotPositiveDefinite(SpdvcmError):
    """A matrix that must be symmetric positive definite is not."""


class DegenerateTensor(SpdvcmError):
    """All eigenvalues are zero; anisotropy is undefined."""


class InvalidBandwidth(SpdvcmError):
    """Bandwidth must be strictly positive."""


class BandwidthTooSmall(SpdvcmError):
    """A local design is rank deficient at this bandwidth."""


class SingularDesign(SpdvcmError):
    """The pooled local design matrix is not invertible at some query point."""


class InsufficientSubjects(SpdvcmError):
    """Too few subjects for a leave-one-out refit."""


class NoFeasibleBandwidth(SpdvcmError):
    """No candidate bandwidth admits a well-posed fit."""


class GridMismatch(SpdvcmError):
    """Two objects that must share a grid do not."""


class DegenerateDenominator(SpdvcmError):
    """The GCV denominator {1 - tr(S)/n}^2 vanished or went negative."""


class TooFewSubjects(SpdvcmError):
    """Covariance estimation needs more subjects than response dimensions."""


class EmptyWindow(SpdvcmError):
    """No kernel mass falls inside the smoothing window."""


class SingularNormalizer(SpdvcmError):
    """The pointwise error covariance used as a CV normalizer is singular."""


class SingularMiddleMatrix(SpdvcmError):
    """The Wald middle matrix C (Sigma_u x Omega_z^-1) C^T is singular."""


class InfeasibleConstraint(SpdvcmError):
    """The linear constraint has no solution or is not supported."""


class TooFewResamples(SpdvcmError):
    """Not enough resampled paths to estimate the requested percentile."""


class ShapeMismatch(SpdvcmError):
    """Array arguments have inconsistent shapes."""


class ParseError(SpdvcmError):
    """A data file could not be parsed."""

    def __init__(self, message: str, path: str = "", line: int | None = None):
        loc = f"{path}:{line}" if line is not None else path
        super().__init__(f"{loc}: {message}" if loc else message)
        self.path = path
        self.line = line


class ValidationError(SpdvcmError):
    """A loaded file violates a dataset invariant."""
