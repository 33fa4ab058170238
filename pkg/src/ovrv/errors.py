"""Exception hierarchy shared by all ovrv modules."""


class OvrvError(Exception):
    """Base class for every error raised by this package."""


class DomainError(OvrvError, ValueError):
    """An argument lies outside the domain of an operation."""


class SingularityError(DomainError):
    """A closed-form quantity is undefined for the given parameters."""


class FormatError(OvrvError, ValueError):
    """Input data is malformed (length mismatch, non-uniform sampling, bad CSV)."""


class SamplingGapError(FormatError):
    """A GPS log has holes longer than the allowed threshold."""

    def __init__(self, message, intervals):
        super().__init__(message)
        self.intervals = list(intervals)


class CalibrationError(OvrvError, RuntimeError):
    """Every local search of a calibration run failed."""

    def __init__(self, message, diagnostics):
        super().__init__(message)
        self.diagnostics = list(diagnostics)
