"""Exception types shared across the package.

Each failure mode that callers may want to tell apart gets its own class;
the CLI maps the three top-level families onto exit codes.
"""


class VembError(Exception):
    """Base class for every error raised by this package."""


class DataError(VembError):
    """Bad input data (files, labels, shapes of user-supplied arrays)."""


class AudioError(DataError):
    pass


class WavReadError(AudioError):
    """File missing, unreadable, or not a RIFF/WAVE container."""


class UnsupportedCodecError(AudioError):
    """Valid WAVE container holding a sample format we do not decode."""


class EmptyAudioError(AudioError):
    """WAVE file with zero sample frames."""


class ShapeError(DataError, ValueError):
    pass


class AlignmentError(DataError):
    pass


class ConfigError(VembError, ValueError):
    pass


class FormatError(DataError):
    """Corrupt checkpoint or embedding container."""


class BadMagicError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


class NumericError(VembError, FloatingPointError):
    """A NaN or Inf appeared in a forward or backward pass."""
