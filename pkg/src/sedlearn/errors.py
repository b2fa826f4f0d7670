"""Exception types shared across the package.

The CLI maps these onto distinct exit codes, so keep the taxonomy small:
configuration problems, malformed data files, and numerical failures.
"""


class ConfigError(ValueError):
    """Invalid configuration (flag/mode combinations, bad hyperparameters)."""


class DataFormatError(ValueError):
    """A data file (WAV, roll CSV, checkpoint, manifest) failed to parse."""


class WavFormatError(DataFormatError):
    """Malformed or unsupported WAV content; ``field`` names the offender."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class UnsupportedWavError(WavFormatError):
    """Well-formed WAV using an encoding this reader does not implement."""


class NumericsError(FloatingPointError):
    """NaN/Inf produced by an operation, or a non-deterministic fragment."""
