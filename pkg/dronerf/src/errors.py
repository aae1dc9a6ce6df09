"""
Exception hierarchy shared by every dronerf phase.

Configuration and validation problems also derive from ValueError so callers
that only know the standard library still catch them.
"""


class DronerfError(Exception):
    """Base class for all dronerf errors."""


class ConfigurationError(DronerfError, ValueError):
    """A configuration value is out of range or inconsistent."""


class ValidationError(DronerfError, ValueError):
    """Input data violates a documented contract."""


class SignalError(DronerfError):
    """A signal cannot be processed (zero power, non-finite samples, bad length)."""


class ModelShapeError(DronerfError, ValueError):
    """A tensor does not have the shape a layer expects."""


class NonFiniteError(DronerfError):
    """A forward pass or loss produced NaN/Inf.

    Attributes:
        where (str): layer or stage that produced the non-finite value
    """

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class LocalTrainingError(DronerfError):
    """Client-side training aborted; the update must not be submitted."""


class VerificationError(DronerfError):
    """Raised when a signed update cannot even be parsed for verification."""


class ReportError(DronerfError):
    """Nothing to report, or report inputs are inconsistent."""


class StageError(DronerfError):
    """An experiment stage failed.

    Attributes:
        stage (str): stage identifier ('data', 'spectrograms', 'training',
            'evaluation', 'report', ...)
    """

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
