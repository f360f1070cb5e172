"""Exception types shared across the toolkit."""


class VibPaprError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(VibPaprError, ValueError):
    """An argument is outside its allowed domain."""


class RangeError(ParameterError):
    """A value lies outside the validity range of a formula or transform."""


class DegenerateSignalError(VibPaprError, ValueError):
    """The signal carries no power (all zeros) or the set is empty."""


class FormatError(VibPaprError, ValueError):
    """A bundle, model, or config file is malformed."""


class TrainingFailure(VibPaprError, RuntimeError):
    """Training diverged."""
