"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage/configuration problems -> 2,
file/format problems -> 3, numeric failures -> 4.
"""


class DealiasError(Exception):
    pass


class InvalidArgumentError(DealiasError, ValueError):
    """Caller passed a value outside an operation's contract."""


class UnsupportedConfigurationError(DealiasError, ValueError):
    """Configuration is syntactically fine but not supported (e.g. hop != fft/2)."""


class DataFormatError(DealiasError):
    """A file or byte stream does not parse as the expected format."""


class NotAWeightFileError(DataFormatError):
    """Magic bytes do not identify a weight bundle."""


class CorruptWeightsError(DataFormatError):
    """Weight bundle parses but is internally inconsistent."""


class UndefinedMetricError(DealiasError):
    """Metric is mathematically undefined for the given inputs."""


class NumericError(DealiasError):
    """A solver or transform produced non-finite or unusable values."""
