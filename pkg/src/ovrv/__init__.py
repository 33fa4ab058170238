"""ACC car following with the constant effective time-gap OVRV model.

Simulation, string-stability analysis and trajectory calibration.
"""

from .errors import (
    CalibrationError,
    DomainError,
    FormatError,
    OvrvError,
    SamplingGapError,
    SingularityError,
)
from .model import (
    MAX_SETTING,
    MIN_SETTING,
    ModelParams,
    accel,
    check_rdc,
    equilibrium_gap,
    mph_to_mps,
    time_gap_at,
)
from .series import TimeSeries

__version__ = "0.1.0"

__all__ = [
    "CalibrationError",
    "DomainError",
    "FormatError",
    "MAX_SETTING",
    "MIN_SETTING",
    "ModelParams",
    "OvrvError",
    "SamplingGapError",
    "SingularityError",
    "TimeSeries",
    "accel",
    "check_rdc",
    "equilibrium_gap",
    "mph_to_mps",
    "time_gap_at",
]
