"""PAPR reduction for vibration signals with a learned compander."""

__version__ = "0.1.0"

from .errors import (DegenerateSignalError, FormatError, ParameterError, RangeError,  # noqa: E402
                     TrainingFailure, VibPaprError)
from .signal_core import SignalSet, VibrationSignal  # noqa: E402

__all__ = ["__version__", "VibPaprError", "ParameterError", "RangeError", "DegenerateSignalError",
           "FormatError", "TrainingFailure", "SignalSet", "VibrationSignal"]
