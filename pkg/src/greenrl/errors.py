"""Shared exception taxonomy.

Three failure classes cover the whole package: bad runtime inputs, bad
static configuration, and operations invoked before their preconditions
hold (e.g. sampling an underfilled replay buffer).
"""


class GreenRLError(Exception):
    """Base class for all package errors."""


class InvalidInputError(GreenRLError, ValueError):
    """A runtime argument violates the operation's contract."""


class ConfigError(GreenRLError, ValueError):
    """A configuration value is out of range, unknown, or inconsistent."""


class NotReadyError(GreenRLError, RuntimeError):
    """The operation's preconditions are not yet satisfied."""
