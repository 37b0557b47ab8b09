"""
RVNS error types
Every failure raised by the toolkit derives from RvnsError.
"""


class RvnsError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgumentError(RvnsError):
    """An argument or configuration value violates its contract."""


class InfeasibleProblemError(RvnsError):
    """The reconstruction constraints admit no feasible density."""


class DatasetIOError(RvnsError, OSError):
    """A data file is missing, unreadable or lacks the requested column."""


class EmptyDatasetError(RvnsError):
    """No usable values remained after loading or filtering."""


class ConfigError(RvnsError):
    """An experiment configuration file is malformed."""
