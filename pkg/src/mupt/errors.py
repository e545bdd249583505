"""Exception types shared across the package.

Anything user-facing (CLI) maps ConfigError to exit code 1 and CheckFailure
to exit code 2; everything else is a plain bug and escapes as-is.
"""


class ConfigError(ValueError):
    """Bad user input: unknown config key, invalid value, malformed file."""


class CheckFailure(AssertionError):
    """A numerical or statistical check ran fine but its assertion failed."""


class CheckpointError(ValueError):
    """Unreadable, truncated, or version-mismatched checkpoint container."""
