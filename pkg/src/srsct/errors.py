"""Package-wide exception types."""

from __future__ import annotations


class DivergenceError(RuntimeError):
    """An iterate or energy became non-finite; carries the energy trace."""

    def __init__(self, message: str, energy_trace=None):
        super().__init__(message)
        self.energy_trace = list(energy_trace or [])
