"""Exception types shared across the package."""


class CataclysmError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(CataclysmError, ValueError):
    pass


class CalibrationRequiredError(CataclysmError, RuntimeError):
    pass


class CalibrationInfeasibleError(CataclysmError, ValueError):
    pass


class IncompatibleGridError(CataclysmError, ValueError):
    pass


class NonProductiveEconomyError(CataclysmError, ValueError):
    pass


class ConfigError(CataclysmError, ValueError):
    """Malformed or inconsistent configuration.

    ``key`` names the offending entry so the CLI can report it.
    """

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
