"""Exception taxonomy.

The CLI maps these onto exit codes: DataError and its subclasses exit 1,
ConfigError (including ParameterError) exit 2, NumericalError exit 3.
"""


class KlrfsError(Exception):
    """Base class for all errors raised by this package."""


class DataError(KlrfsError):
    """Input data is malformed, inconsistent, or unusable."""


class ParseError(DataError):
    """A dataset or ranking file failed to parse.

    Carries the offending location so the CLI can report it.
    """

    def __init__(self, message, line=None, column=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if column is not None:
            loc.append(f"column {column!r}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.line = line
        self.column = column


class DegenerateKernelError(DataError):
    """A kernel matrix is identically zero or otherwise unusable."""


class DegenerateLabelsError(DataError):
    """Labels contain a single class where two are required."""


class UndefinedMetricError(DataError):
    """A requested score is undefined for the given inputs."""


class ConfigError(KlrfsError):
    """Configuration file or override is invalid."""


class ParameterError(ConfigError):
    """An operation received an out-of-range or invalid parameter."""


class NumericalError(KlrfsError):
    """An iterative solver failed to converge."""
