"""Coupled flood catastrophe model and quarterly input-output agent-based economy."""

__version__ = "0.1.0"

from cataclysm.errors import (  # noqa: E402
    CalibrationInfeasibleError,
    CalibrationRequiredError,
    CataclysmError,
    ConfigError,
    IncompatibleGridError,
    InvalidParameterError,
    NonProductiveEconomyError,
)

__all__ = [
    "__version__", "CataclysmError", "InvalidParameterError", "CalibrationRequiredError",
    "CalibrationInfeasibleError", "IncompatibleGridError", "NonProductiveEconomyError", "ConfigError",
]
