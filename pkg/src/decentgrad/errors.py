"""Exception types shared across the package."""

from __future__ import annotations


class ConfigError(ValueError):
    """An experiment configuration failed validation; the message names the field."""


class DivergenceError(RuntimeError):
    """An update produced a non-finite state or tripped the divergence guard."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


class TrackingConsistencyError(RuntimeError):
    """The gradient-tracking identity was violated beyond tolerance (implementation bug)."""


class HistoryRangeError(ValueError):
    """Requested time lies outside the retained iterate history."""
