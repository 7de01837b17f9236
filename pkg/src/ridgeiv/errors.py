"""Shared exception types."""

from __future__ import annotations


class GammaBoundaryError(ValueError):
    """Aspect ratio gamma lies on or beyond a boundary the method excludes."""


class DegenerateSignalError(ValueError):
    """A denominator (signal term) is zero or numerically negligible."""


class SilversteinSolverError(RuntimeError):
    """Fixed-point solve did not reach the residual tolerance."""

    def __init__(self, message: str, residual: float) -> None:
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual
