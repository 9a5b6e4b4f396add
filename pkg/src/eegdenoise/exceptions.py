"""Exception hierarchy shared by every module of the package."""


class EEGDenoiseError(Exception):
    """Base class for all package errors."""


class ShapeError(EEGDenoiseError, ValueError):
    """Array dimensions do not compose (length mismatch, odd pool input, ...)."""


class LengthError(ShapeError):
    """Input is empty or has too few elements for the operation."""


class DegenerateSignalError(EEGDenoiseError, ValueError):
    """A signal has zero RMS or zero variance where a nonzero one is required."""


class TapeError(EEGDenoiseError, RuntimeError):
    """Backward called without a matching forward, or the tape was already consumed."""


class NumericError(EEGDenoiseError, ArithmeticError):
    """A loss, gradient, or parameter became non-finite."""


class FormatError(EEGDenoiseError, ValueError):
    """A file on disk does not follow its binary or text format.

    ``field`` names the offending header field or section when known.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ConfigError(EEGDenoiseError, ValueError):
    """Invalid configuration value or manifest entry."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
