"""Exception taxonomy, mirrored by the CLI exit codes."""


class FlowfillError(Exception):
    """Base class for package errors."""

    exit_code = 1
    code = "error"


class ConfigError(FlowfillError):
    """Bad configuration: unknown keys, missing checkpoints, invalid values."""

    exit_code = 2
    code = "config"


class DataError(FlowfillError):
    """Malformed or inconsistent data: shape mismatches, empty inputs."""

    exit_code = 3
    code = "data"


class NumericError(FlowfillError):
    """Non-finite values or diverging computations."""

    exit_code = 4
    code = "numeric"
