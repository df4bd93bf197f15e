class CrimeDistillError(Exception):
    """Base error; `exit_code` is what the command line returns for it."""

    exit_code = 1


class ConfigError(CrimeDistillError, ValueError):
    exit_code = 2


class SchemaError(ConfigError):
    """Input file columns do not match the configured mapping."""


class DataError(CrimeDistillError, ValueError):
    exit_code = 3


class InvalidRecordError(DataError):
    pass


class NumericError(CrimeDistillError, ArithmeticError):
    exit_code = 4


class DegenerateDistributionError(NumericError):
    """Every non-target entry is masked, so there is nothing to normalise."""


class CheckpointError(CrimeDistillError):
    exit_code = 5
