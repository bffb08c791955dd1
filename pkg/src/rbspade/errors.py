"""Exception types raised across the package."""


class InputError(ValueError):
    """Malformed or out-of-range input values."""


class DomainError(ValueError):
    """Evaluation requested outside a calibrated domain."""


class FitError(RuntimeError):
    """A curve fit could not be carried out or did not converge."""


class ConfigurationError(ValueError):
    """An inference or run configuration is unusable."""


class DegenerateDataError(ValueError):
    """Every hypothesis assigns zero likelihood to the data."""


class UndefinedRBError(ValueError):
    """A relative-belief ratio was requested for a zero-prior hypothesis."""
