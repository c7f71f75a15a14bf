"""Package-level exception types.

Most argument problems raise plain ValueError; these classes exist where a
caller needs to distinguish the failure mode (the CLI maps them to exit codes).
"""


class ConfigError(ValueError):
    """A run configuration is malformed: unknown key, bad type, bad value."""


class FeasibilityError(ValueError):
    """An agent cannot be built within its configured resource bound.

    Raised instead of letting a flattened joint-action head exhaust memory.
    """


class TrajectoryFormatError(ValueError):
    """A trajectory file is unreadable: bad header, version, or record."""
