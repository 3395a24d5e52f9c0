"""Exception types shared across modules."""

from __future__ import annotations

from typing import Any


class GeometryError(ValueError):
    """Invalid domain, region or mesh request."""


class NoClosedForm(ValueError):
    """Raised when a closed-form value is requested for an unsupported domain."""


class NotAGoodPoint(ValueError):
    """The boundary point fails the curvature criterion."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach its tolerance."""

    def __init__(self, message: str, estimate: float):
        super().__init__(f"{message} (achieved estimate {estimate!r})")
        self.estimate = estimate


class ConvergenceError(RuntimeError):
    """Iterative solver stopped without converging.

    ``best`` carries the best iterate found so far (solver specific).
    """

    def __init__(self, message: str, best: Any = None):
        super().__init__(message)
        self.best = best


class TraceCollapse(ConvergenceError):
    """Boundary integral of the iterate vanished."""


class InfeasibleSearch(RuntimeError):
    """No admissible candidate set exists."""


class ConfigError(ValueError):
    """Malformed run configuration."""
