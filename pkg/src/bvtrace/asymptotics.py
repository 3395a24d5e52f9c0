"""Boundary-layer test functions at a curved boundary point.

At a point where ∂Ω is the graph t = ρ(y) = ½Σκ_i y_i², the layer
u_ε = χ{ρ(y) ≤ t ≤ ε²/2} has

    ∫|∇u_ε|     = |{ρ ≤ ε²/2}|
    ∫ u_ε       = ∫_{ρ≤ε²/2} (ε²/2 − ρ) dy
    ∫_∂Ω u_ε    = ∫_{ρ≤ε²/2} √(1 + |∇ρ|²) dy

:func:`expansion_terms` gives the published leading-order expansions,
:func:`quadrature_oracle` evaluates the integrals directly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import sqrt

import numpy as np

from .geometry import BoundaryPatch, unit_ball_volume, unit_sphere_area
from .quadrature import adaptive_gauss, adaptive_gauss_2d


@dataclass(frozen=True)
class ExpansionInput:
    kappa: tuple[float, ...]
    eps: float

    def __post_init__(self):
        k = np.asarray(self.kappa, dtype=float)
        if k.ndim != 1 or len(k) < 1:
            raise ValueError("kappa must be a non-empty vector")
        if np.any(k <= 0):
            raise ValueError("all principal curvatures must be positive")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.eps**2 * k.max() >= 1:
            raise ValueError("layer too thick for the patch: need eps² max κ < 1")
        object.__setattr__(self, "kappa", tuple(float(x) for x in k))

    @property
    def dim(self) -> int:
        return len(self.kappa) + 1


@dataclass(frozen=True)
class GeometricConstants:
    b_lambda: float  # |{|y|_κ ≤ 1}|
    b_xi: float      # unit ball volume in ℝ^{N-1}
    omega_xi: float  # unit sphere measure in ℝ^{N-1}


def geometric_constants(kappa) -> GeometricConstants:
    k = np.asarray(kappa, dtype=float)
    m = len(k)
    b_xi = unit_ball_volume(m)
    return GeometricConstants(b_xi / sqrt(float(np.prod(k))), b_xi, unit_sphere_area(m))


def expansion_terms(inp: ExpansionInput) -> tuple[float, float, float]:
    """Published leading-order values of (∫|∇u_ε|, ∫u_ε, ∫_∂Ω u_ε)."""
    N, eps = inp.dim, inp.eps
    k = np.asarray(inp.kappa)
    c = geometric_constants(k)
    root = sqrt(float(np.prod(k)))
    grad = c.b_lambda * eps ** (N - 1)
    vol = c.omega_xi * eps ** (N + 1) / (2 * (N + 1) * (N - 1) * root)
    bdry = grad + c.omega_xi * k.sum() * eps ** (N + 1) / (2 * (N - 1) * (N + 1) * root)
    return grad, vol, bdry


def quotient_expansion(inp: ExpansionInput) -> float:
    """1 + C(1 − Σκ)ε² with C = ω/(2(N−1)(N+1) b^κ √Πκ): the published layer quotient."""
    N = inp.dim
    k = np.asarray(inp.kappa)
    c = geometric_constants(k)
    C = c.omega_xi / (2 * (N - 1) * (N + 1) * c.b_lambda * sqrt(float(np.prod(k))))
    return 1.0 + C * (1.0 - k.sum()) * inp.eps**2


def rederived_volume_term(inp: ExpansionInput) -> float:
    """∫u_ε recomputed from (ε²/2)|{|y|_κ≤ε}| − ½∫|y|²_κ: ω ε^{N+1}/((N−1)(N+1)√Πκ).

    Twice the published coefficient; exact on a pure paraboloid.
    """
    N = inp.dim
    k = np.asarray(inp.kappa)
    return unit_sphere_area(N - 1) * inp.eps ** (N + 1) / ((N - 1) * (N + 1) * sqrt(float(np.prod(k))))


def rederived_quotient_expansion(inp: ExpansionInput) -> float:
    """Layer quotient with the recomputed volume term: 1 + C(2 − Σκ)ε²."""
    N = inp.dim
    k = np.asarray(inp.kappa)
    c = geometric_constants(k)
    C = c.omega_xi / (2 * (N - 1) * (N + 1) * c.b_lambda * sqrt(float(np.prod(k))))
    return 1.0 + C * (2.0 - k.sum()) * inp.eps**2


def quadrature_oracle(patch: BoundaryPatch, eps: float, rtol: float = 1e-8) -> tuple[float, float, float]:
    """Direct quadrature of the three layer integrals on an exact paraboloid (N ∈ {2, 3})."""
    k = np.asarray(patch.kappa, dtype=float)
    top = 0.5 * eps**2
    # tighter inner tolerance so the reported values meet rtol
    tol = rtol * 1e-2
    if len(k) == 1:
        (k1,) = k
        half = eps / sqrt(k1)
        grad = adaptive_gauss(lambda y: np.ones_like(y), -half, half, tol)
        vol = adaptive_gauss(lambda y: top - 0.5 * k1 * y**2, -half, half, tol)
        bdry = adaptive_gauss(lambda y: np.sqrt(1 + (k1 * y) ** 2), -half, half, tol)
        return grad, vol, bdry
    if len(k) == 2:
        k1, k2 = k
        jac = 1.0 / sqrt(k1 * k2)
        # y_i = r (cos θ, sin θ)_i / √κ_i maps the sublevel set to the disc r ≤ ε
        lims = ((0.0, eps), (0.0, 2 * np.pi))
        grad = adaptive_gauss_2d(lambda r, th: r * jac, *lims, rtol=tol)
        vol = adaptive_gauss_2d(lambda r, th: (top - 0.5 * r**2) * r * jac, *lims, rtol=tol)
        bdry = adaptive_gauss_2d(
            lambda r, th: np.sqrt(1 + k1 * (r * np.cos(th)) ** 2 + k2 * (r * np.sin(th)) ** 2) * r * jac,
            *lims, rtol=tol,
        )
        return grad, vol, bdry
    raise ValueError("quadrature oracle implemented for N = 2 and N = 3 only")


@dataclass
class OrderEstimate:
    order: float          # fitted exponent q in error ∝ ε^q; inf when the error vanishes
    errors: list[float]
    exact: bool
    monotone: bool

    def describe(self) -> str:
        return "exact" if self.exact else f"{self.order:.3f}"


def _fit_order(eps: np.ndarray, err: np.ndarray, scale: np.ndarray) -> OrderEstimate:
    exact = bool(np.all(err <= 1e-12 * scale))
    monotone = bool(np.all(np.diff(err) < 0)) if not exact else True
    if exact:
        return OrderEstimate(float("inf"), err.tolist(), True, True)
    q = float(np.polyfit(np.log(eps), np.log(np.maximum(err, 1e-300)), 1)[0])
    return OrderEstimate(q, err.tolist(), False, monotone)


def convergence_order_check(patch: BoundaryPatch, eps_list) -> dict[str, OrderEstimate]:
    """Observed order of |oracle − expansion| for grad, vol and bdry.

    ``eps_list`` is expected to decrease; a non-monotone error sequence is
    flagged (``monotone=False``) and a warning is emitted.
    """
    eps = np.asarray(eps_list, dtype=float)
    rows = []
    for e in eps:
        exp = expansion_terms(ExpansionInput(patch.kappa, float(e)))
        orc = quadrature_oracle(patch, float(e))
        rows.append((exp, orc))
    out = {}
    for j, name in enumerate(("grad", "vol", "bdry")):
        err = np.array([abs(o[j] - x[j]) for x, o in rows])
        scale = np.array([abs(o[j]) for _, o in rows])
        est = _fit_order(eps, err, scale)
        if not est.monotone:
            warnings.warn(f"{name}: error sequence is not monotone in eps", RuntimeWarning)
        out[name] = est
    return out


def expansion_table(kappa, eps_list) -> list[dict]:
    """Rows for the ``asymptotics`` CSV output."""
    patch = BoundaryPatch(tuple(kappa))
    rows = []
    for e in eps_list:
        inp = ExpansionInput(tuple(kappa), float(e))
        g, v, b = expansion_terms(inp)
        og, ov, ob = quadrature_oracle(patch, float(e))
        rows.append({"eps": float(e), "grad_exp": g, "grad_oracle": og, "vol_exp": v,
                     "vol_oracle": ov, "bdry_exp": b, "bdry_oracle": ob,
                     "quotient": quotient_expansion(inp)})
    return rows
