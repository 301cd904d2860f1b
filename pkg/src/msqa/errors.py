"""Exception types shared across the package.

Every error raised on a bad input, bad file, or bad configuration derives
from :class:`MsqaError` so callers (and the CLI) can catch one base class
and map subclasses onto exit codes.
"""


class MsqaError(Exception):
    """Base class for all package-specific errors."""


class DecodeError(MsqaError):
    """Image bytes could not be decoded (corrupt data or unsupported format)."""


class DimensionError(MsqaError):
    """An array / plane / image does not meet a minimum-size requirement."""


class DegenerateInputError(MsqaError):
    """A statistical fit was asked for on input it cannot support."""


class ModelError(MsqaError):
    """A scoring model file is missing, malformed, or internally inconsistent."""


class ParseError(MsqaError):
    """A data file (CSV, binary recording, stats document) failed to parse."""


class LengthError(MsqaError):
    """A signal or series is too short for the requested analysis."""


class BandError(MsqaError):
    """A frequency band is invalid or incompatible with the sample rate."""


class ConfigError(MsqaError):
    """A configuration value is missing, malformed, or out of range."""


class SchemaError(MsqaError):
    """Two inputs that must share a schema (metric sets, directions) disagree."""


class EmptyInputError(MsqaError):
    """An aggregate was requested over zero usable values."""
