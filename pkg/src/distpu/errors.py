"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration value (bad prior, negative stddev, unknown class id, ...)."""


class ContractError(ValueError):
    """An operation was called with inputs that violate its contract."""


class DataFormatError(ValueError):
    """A data file could not be parsed; the message names the byte or line offset."""


class UndefinedMetricError(ValueError):
    """The requested metric is undefined for the given labels (e.g. single-class AUC)."""


class TrainingDiverged(RuntimeError):
    """A loss term became non-finite; the message names the step and term."""
