"""Exception hierarchy shared across the pipeline.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4.
"""


class ParkgridError(Exception):
    """Base class for all package-specific failures."""


class ConfigError(ParkgridError):
    """Bad or inconsistent run configuration (missing files, unknown keys)."""


class DataError(ParkgridError):
    """Malformed or invalid input data."""


class NumericError(ParkgridError):
    """A numeric procedure could not produce a meaningful result."""
