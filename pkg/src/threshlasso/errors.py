"""Exception hierarchy shared across the package."""


class ThreshlassoError(Exception):
    """Base class for all package errors."""


class InputError(ThreshlassoError):
    """Invalid user-supplied data or configuration."""


class DegenerateGridError(InputError):
    """Threshold grid contains no admissible candidate."""


class BandwidthError(InputError):
    """HAC bandwidth incompatible with the sample size."""


class EstimationError(ThreshlassoError):
    """Estimation failed (non-convergence, degenerate quantities)."""


class DegenerateColumnError(EstimationError):
    """Nodewise target column is identically zero within its regime."""


class SingularBlockError(EstimationError):
    """Joint-test covariance block is numerically singular."""

    def __init__(self, message: str, cond: float | None = None):
        super().__init__(message)
        self.cond = cond


class ContractError(ThreshlassoError):
    """Caller violated an interface contract (support, row coverage)."""
