"""Exception types shared across the package."""


class ErgoguideError(Exception):
    """Base class for all package errors."""


class InputError(ErgoguideError):
    """Malformed or dimensionally inconsistent input."""


class ModelError(ErgoguideError):
    """Invalid body-model definition."""


class CalibrationError(ErgoguideError):
    """Center-of-mass calibration could not identify its parameters."""


class ConfigError(ErgoguideError):
    """Invalid configuration value."""


class RegistryError(ErgoguideError):
    """Device placement registry does not match the requested operation."""


class InfeasibleError(ErgoguideError):
    """No feasible posture found by the optimizer."""

    def __init__(self, message, best_penalty=None):
        super().__init__(message)
        self.best_penalty = best_penalty


class EvaluationError(ErgoguideError):
    """A metric is undefined for the given trial log."""
