"""Exception types shared across the package."""


class ThermalGenError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(ThermalGenError):
    """Invalid or inconsistent configuration values."""


class DimensionError(ThermalGenError):
    """Array shapes violate a documented dimension contract."""


class DatasetError(ThermalGenError):
    """A dataset file is missing or corrupt.

    Carries the offending sample id when the failure is per-sample.
    """

    def __init__(self, message, sample_id=None):
        super().__init__(message)
        self.sample_id = sample_id


class BundleError(ThermalGenError):
    """Model bundle file cannot be read or does not match expectations."""


class TrainingDivergedError(ThermalGenError):
    """A loss became non-finite during training."""


class NumericalError(ThermalGenError):
    """A numerical routine (e.g. matrix square root) failed to converge."""


class ServiceError(ThermalGenError):
    """Streaming service cannot start or reached an invalid state."""


class DetectorUnavailableError(ThermalGenError):
    """A person detector backend is not usable in this environment."""
