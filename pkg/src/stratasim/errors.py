"""Exception types shared across the package."""

from __future__ import annotations


class ConfigurationError(ValueError):
    """A design, model, or run setting is invalid or inconsistent."""


class ConfigParseError(ConfigurationError):
    """A configuration document failed validation.

    The message names the offending field by its dotted path.
    """


class DegenerateDesignError(ValueError):
    """A fitted design matrix lost identifiability (empty arm, rank drop)."""
