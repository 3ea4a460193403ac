"""Exception types shared across the package."""


class EstimationError(Exception):
    """Base class for model-fitting failures."""


class DegenerateKMError(EstimationError):
    """Raised when a Kaplan-Meier curve carries no events (mean undefined)."""


class GehanSolverError(EstimationError):
    """Raised when the rank-based slope solver fails.

    Carries the best iterate found so far in ``best``, when one exists.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class CoxFitError(EstimationError):
    """Raised when the partial-likelihood fit fails or diverges."""


class SimulationError(EstimationError):
    """Raised when too many Monte Carlo replicates fail."""


class DataError(Exception):
    """Malformed input data (bad CSV cell, missing column, ...)."""


class ConfigError(Exception):
    """Invalid run configuration or scenario file."""
