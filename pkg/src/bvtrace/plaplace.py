"""P1 finite elements for the p-trace quotient and its continuation to p = 1.

    R_p(u) = (∫_Ω |∇u|^p + |u|^p) / ∫_∂Ω |u|^p

Gradients are constant per triangle, so ∫|∇u|^p is exact; the |u|^p integrals
use the vertex (lumped) rule. Minimisation is a nonlinear inverse power
iteration: with s = ∂_u(∫_∂Ω|u|^p)/p at the current iterate, solve the convex
problem  min_f  F(f)/p − ⟨s, f⟩  by damped Newton, then renormalise. Each step
does not increase R_p.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, TraceCollapse
from .mesh import TriMesh

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FEField:
    mesh: TriMesh
    values: np.ndarray

    def __post_init__(self):
        if len(self.values) != self.mesh.n_vertices:
            raise ValueError("one coefficient per mesh vertex required")

    @property
    def gradients(self) -> np.ndarray:
        """(n_tri, 2) constant gradient per triangle (exactly zero for constant fields)."""
        return _cell_gradients(self.mesh, self.values)

    @property
    def trace(self) -> np.ndarray:
        return self.values[self.mesh.boundary_vertices]


@dataclass(frozen=True)
class SolverParams:
    p: float = 2.0
    tau: float | None = None   # gradient smoothing; default 1e-6 × mesh diameter
    max_iter: int = 300
    tol: float = 1e-9          # relative change of λ between outer iterations
    newton_max: int = 200
    armijo: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")


@dataclass
class EigenResult:
    lam: float
    field: FEField | None
    p: float | None
    iterations: int
    residuals: list[float]
    method: str = "plaplace"
    normalization_error: float = 0.0
    diagnostics: dict = field(default_factory=dict)
    region: object = None
    history: list[float] = field(default_factory=list)
    tau: float = 0.0
    search_trace: object = None

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "p": self.p,
            "lambda": self.lam,
            "iterations": self.iterations,
            "residuals": list(self.residuals),
            "normalization_error": self.normalization_error,
            "diagnostics": dict(self.diagnostics),
        }


# --------------------------------------------------------------------------- functionals
def _cell_gradients(mesh: TriMesh, u: np.ndarray) -> np.ndarray:
    # differences against vertex 0 avoid round-off from Σ∇φ_i ≈ 0
    ut = u[mesh.triangles]
    d = ut[:, 1:] - ut[:, :1]
    return np.einsum("tij,tj->ti", mesh.gradients[:, :, 1:], d)


def _pnorm_terms(mesh: TriMesh, u: np.ndarray, p: float) -> tuple[float, float, float]:
    g = _cell_gradients(mesh, u)
    grad = float(mesh.areas @ np.linalg.norm(g, axis=1) ** p)
    au = np.abs(u) ** p
    return grad, float(mesh.lumped_mass @ au), float(mesh.lumped_boundary_mass @ au)


def rayleigh_quotient(mesh: TriMesh, u: np.ndarray, p: float) -> float:
    grad, vol, bdry = _pnorm_terms(mesh, u, p)
    if bdry <= 0:
        raise ZeroDivisionError("field vanishes on the boundary")
    return (grad + vol) / bdry


def _hole_vertices(mesh: TriMesh, hole) -> np.ndarray:
    if hole is None:
        return np.zeros(0, dtype=np.int64)
    cells = getattr(hole, "cells", hole)
    cells = np.asarray(cells, dtype=np.int64)
    return np.unique(mesh.triangles[cells])


class _Problem:
    """Inner problem Φ(f) = F_τ(f)/p − s·f on the free vertices.

    F_τ replaces |∇f| by √(|∇f|² + τ²) and |f| by √(f² + τ²); Φ is smooth and
    strictly convex, and Newton uses its exact Hessian.
    """

    def __init__(self, mesh: TriMesh, p: float, free: np.ndarray):
        self.mesh, self.p, self.free = mesh, p, free
        t = mesh.triangles
        self.rows = np.repeat(t, 3, axis=1).ravel()
        self.cols = np.tile(t, (1, 3)).ravel()
        self.restrict = sp.identity(mesh.n_vertices, format="csr")[free]

    def evaluate(self, f, s, tau, hessian=True):
        m, p = self.mesh, self.p
        g = np.einsum("tij,tj->ti", m.gradients, f[m.triangles])
        q = np.einsum("ti,ti->t", g, g) + tau * tau
        r = f * f + tau * tau
        value = (m.areas @ q ** (0.5 * p) + m.lumped_mass @ r ** (0.5 * p)) / p - float(s @ f)
        wq = m.areas * q ** (0.5 * p - 1)
        grad = np.zeros(m.n_vertices)
        np.add.at(grad, m.triangles.ravel(),
                  np.einsum("ti,tij->tj", wq[:, None] * g, m.gradients).ravel())
        grad += m.lumped_mass * r ** (0.5 * p - 1) * f - s
        if not hessian:
            return value, grad[self.free], None
        core = np.eye(2)[None] + (p - 2) * np.einsum("ti,tj->tij", g, g) / q[:, None, None]
        core *= wq[:, None, None]
        local = np.einsum("tai,tab,tbj->tij", m.gradients, core, m.gradients)
        n = m.n_vertices
        K = sp.coo_matrix((local.ravel(), (self.rows, self.cols)), shape=(n, n)).tocsr()
        dm = m.lumped_mass * r ** (0.5 * p - 2) * ((p - 1) * f * f + tau * tau)
        H = self.restrict @ (K + sp.diags(dm)) @ self.restrict.T
        return value, grad[self.free], H.tocsc()


def _newton(prob: _Problem, f: np.ndarray, s: np.ndarray, tau: float, max_iter: int, c1: float):
    """Damped Newton with Armijo backtracking; returns (minimiser, iterations)."""
    free = prob.free
    value, grad, H = prob.evaluate(f, s, tau)
    it = 0
    for it in range(1, max_iter + 1):
        d = np.zeros_like(f)
        d[free] = spla.spsolve(H, -grad)
        slope = float(grad @ d[free])
        if slope >= 0:  # numerical loss of definiteness: fall back to steepest descent
            d[free] = -grad
            slope = -float(grad @ grad)
        if -slope <= 1e-13 * max(abs(value), 1e-300):
            break
        step = 1.0
        while True:
            trial = f + step * d
            tv, tg, _ = prob.evaluate(trial, s, tau, hessian=False)
            if tv <= value + c1 * step * slope or step < 1e-10:
                break
            step *= 0.5
        f = trial
        value, grad, H = prob.evaluate(f, s, tau)
    return f, it


def solve_lambda_p(
    mesh: TriMesh,
    params: SolverParams,
    hole=None,
    initial: np.ndarray | None = None,
) -> EigenResult:
    """Minimise R_p over P1 fields vanishing on the hole triangles.

    Returns the nonnegative minimiser normalised by ∫_∂Ω u^p = 1.
    """
    p = params.p
    diam = float(np.ptp(mesh.vertices, axis=0).max())
    tau = params.tau if params.tau is not None else 1e-6 * diam
    fixed = _hole_vertices(mesh, hole)
    free_mask = np.ones(mesh.n_vertices, dtype=bool)
    free_mask[fixed] = False
    free = np.nonzero(free_mask)[0]
    bmass = mesh.lumped_boundary_mass
    if bmass[free].sum() <= 0:
        raise TraceCollapse("hole covers the whole boundary")

    if initial is None:
        rng = np.random.default_rng(params.seed)
        u = 1.0 + 0.1 * rng.random(mesh.n_vertices)
    else:
        u = np.abs(np.asarray(initial, dtype=float)).copy()
    u[~free_mask] = 0.0

    def normalise(v):
        G = float(bmass @ np.abs(v) ** p)
        if G < 1e-14 * max(1.0, float(np.max(np.abs(v))) ** p):
            raise TraceCollapse("boundary integral collapsed during iteration", best=None)
        return v / G ** (1.0 / p)

    u = normalise(u)
    lam = rayleigh_quotient(mesh, u, p)
    history, residuals = [lam], []
    prob = _Problem(mesh, p, free)
    linear = p == 2.0
    if linear:
        _, _, H = prob.evaluate(np.ones(mesh.n_vertices), np.zeros(mesh.n_vertices), 1.0)
        solve = spla.factorized(H)
    best = None
    for it in range(1, params.max_iter + 1):
        s = bmass * u ** (p - 1)
        if linear:
            f = np.zeros_like(u)
            f[free] = solve(s[free])
        else:
            # c·u with c^{p-1} = 1/λ is the best multiple of u for the inner problem
            scale = (1.0 / lam) ** (1.0 / (p - 1))
            f, _ = _newton(prob, scale * u, s, tau * scale, params.newton_max, params.armijo)
        f = np.abs(f)
        f[~free_mask] = 0.0
        u_new = normalise(f)
        lam_new = rayleigh_quotient(mesh, u_new, p)
        change = abs(lam_new - lam) / lam
        residuals.append(change)
        if lam_new > lam * (1 + 1e-10):
            log.debug("non-monotone step at iteration %d: %.3e", it, lam_new - lam)
        u, lam = u_new, lam_new
        history.append(lam)
        best = EigenResult(lam, FEField(mesh, u), p, it, residuals, history=history,
                           tau=0.0 if linear else tau)
        if change < params.tol:
            break
    else:
        raise ConvergenceError(f"no convergence in {params.max_iter} iterations", best=best)
    best.normalization_error = abs(float(bmass @ u**p) - 1.0)
    best.diagnostics = sigma_diagnostics(best, p)
    return best


# --------------------------------------------------------------------------- diagnostics
def sigma_field(result: EigenResult, p: float, tau: float | None = None) -> np.ndarray:
    """σ_p = |∇u|^{p−2}∇u per triangle, with |∇u| smoothed by ``tau`` (default: the solver's)."""
    tau = result.tau if tau is None else tau
    g = result.field.gradients
    ng = np.sqrt(np.einsum("ti,ti->t", g, g) + tau * tau)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(ng > 0, ng ** (p - 2), 0.0)
    return w[:, None] * g


def sigma_diagnostics(result: EigenResult, p: float) -> dict:
    """Flux-field checks for a discrete p-eigenfunction.

    max_sigma       max_T |σ_p|
    euler_residual  max over interior vertices v of |∫σ_p·∇φ_v + ∫u^{p−1}φ_v| / ∫φ_v
    limit_residual  same with u^{p−1} replaced by its p → 1 limit 1
    flux_gap        relative gap in ∫σ_p·∇1-balance: boundary flux vs λ_p ∫_∂Ω u^{p−1}
    """
    mesh = result.field.mesh
    u = result.field.values
    sigma = sigma_field(result, p)
    tested = np.einsum("ti,tij->tj", sigma * mesh.areas[:, None], mesh.gradients)
    weak = np.zeros(mesh.n_vertices)
    np.add.at(weak, mesh.triangles.ravel(), tested.ravel())
    m = mesh.lumped_mass
    up = np.sqrt(u * u + result.tau**2) ** (p - 2) * np.abs(u)
    interior = np.ones(mesh.n_vertices, dtype=bool)
    interior[mesh.boundary_vertices] = False
    interior &= u > 0
    euler = np.abs(weak + m * up)[interior] / m[interior]
    limit = np.abs(weak + m)[interior] / m[interior]
    b = mesh.lumped_boundary_mass
    bv = mesh.boundary_vertices
    flux_total = float(np.sum((weak + m * up)[bv]))
    target = result.lam * float(b @ up)
    return {
        "max_sigma": float(np.max(np.linalg.norm(sigma, axis=1))),
        "euler_residual": float(euler.max()) if euler.size else 0.0,
        "limit_residual": float(limit.max()) if limit.size else 0.0,
        "flux_gap": abs(flux_total - target) / target if target > 0 else float("nan"),
    }


# --------------------------------------------------------------------------- continuation
@dataclass
class ContinuationResult:
    p_values: list[float]
    lambdas: list[float]
    extrapolated_lambda1: float
    slope: float
    model: str
    results: list[EigenResult]

    def to_dict(self) -> dict:
        return {"p_values": self.p_values, "lambdas": self.lambdas,
                "extrapolated_lambda1": self.extrapolated_lambda1, "slope": self.slope,
                "model": self.model, "stages": [r.to_dict() for r in self.results]}


def extrapolate_linear(p_values: Sequence[float], lambdas: Sequence[float], points: int = 3):
    """Least-squares fit λ_p ≈ λ₁ + c(p − 1) on the last ``points`` values."""
    x = np.asarray(p_values[-points:], dtype=float) - 1.0
    y = np.asarray(lambdas[-points:], dtype=float)
    c, lam1 = np.polyfit(x, y, 1)
    return float(lam1), float(c)


def continuation_to_one(mesh: TriMesh, p_schedule: Sequence[float], params: SolverParams | None = None,
                        hole=None) -> ContinuationResult:
    """Solve along a decreasing p schedule with warm starts, then extrapolate to p = 1."""
    ps = [float(p) for p in p_schedule]
    if any(p <= 1 for p in ps) or any(b >= a for a, b in zip(ps, ps[1:])):
        raise ValueError("p schedule must be strictly decreasing and > 1")
    if len(ps) < 3:
        raise ValueError("need at least three p values to extrapolate")
    params = params or SolverParams()
    results: list[EigenResult] = []
    u = None
    for p in ps:
        stage = SolverParams(p=p, tau=params.tau, max_iter=params.max_iter, tol=params.tol,
                             newton_max=params.newton_max, armijo=params.armijo, seed=params.seed)
        try:
            res = solve_lambda_p(mesh, stage, hole=hole, initial=u)
        except ConvergenceError as exc:
            raise ConvergenceError(f"continuation failed at p = {p}: {exc}", best=results) from exc
        results.append(res)
        u = res.field.values
    lams = [r.lam for r in results]
    lam1, slope = extrapolate_linear(ps, lams)
    return ContinuationResult(ps, lams, lam1, slope, "linear in (p-1), last three points", results)
