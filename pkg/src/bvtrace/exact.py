"""Closed-form λ₁ for balls and annuli, and conical/spherical-cap upper bounds."""

from __future__ import annotations

from dataclasses import dataclass
from math import pi, sin

from .errors import NoClosedForm
from .geometry import Domain, measures


@dataclass(frozen=True)
class ClosedFormResult:
    lambda1: float
    ratio: float
    has_extremal: bool
    extremal: str | None

    @property
    def method(self) -> str:
        return "closed_form"

    def to_dict(self) -> dict:
        return {"method": self.method, "lambda1": self.lambda1, "ratio": self.ratio,
                "has_extremal": self.has_extremal, "extremal": self.extremal}


def lambda1_closed_form(domain: Domain) -> ClosedFormResult:
    """λ₁ = min(|Ω|/|∂Ω|, 1) for balls and annuli.

    When the ratio is ≤ 1 the normalised indicator |∂Ω|⁻¹χ_Ω is a minimiser
    (the unique normalised one at ratio exactly 1); above 1 nothing attains
    the infimum.
    """
    if domain.kind not in ("ball", "annulus"):
        raise NoClosedForm(f"no closed form for {domain.kind}; use a solver")
    vol, area = measures(domain)
    ratio = vol / area
    if ratio <= 1.0:
        return ClosedFormResult(ratio, ratio, True, "indicator of the whole domain / |∂Ω|")
    return ClosedFormResult(1.0, ratio, False, None)


def cone_bound(omega_measure: float, omega_boundary_measure: float, dim: int) -> float:
    """(N-1)|ω|/|∂ω| for a boundary point modelled on the cone over ω ⊂ S^{N-1}.

    For N = 2, ∂ω consists of points and is measured by counting measure.
    """
    if omega_measure <= 0 or omega_boundary_measure <= 0:
        raise ValueError("cone cross-section measures must be positive")
    return (dim - 1) * omega_measure / omega_boundary_measure


def spherical_cap_bound(alpha: float, dim: int = 2) -> float:
    """Leading-order bound sin(α) for a convex cone of half-opening α.

    Only an asymptotic indicator: no correction term is included.
    """
    if not 0 < alpha <= pi / 2:
        raise ValueError("cap angle must lie in (0, π/2]")
    return sin(alpha)


def existence_criterion(lambda1_upper_bound: float) -> bool:
    """True when the bound is strictly below 1, which guarantees an extremal."""
    return lambda1_upper_bound < 1.0
