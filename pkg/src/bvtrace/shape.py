"""Shape calculus for λ₁ under T_δ = id + δR.

For an eigenset A with trace measure P = |A∩∂Ω| the derivative is

    (1/P) [ ∫_{∂*A∩Ω} f(ν) − λ₁ ∫_{A∩∂Ω} f(n̄) − ∫_{∂*A} (R, ν) ],   f(X) = div R − Xᵀ DR X,

with ν the unit inner normal of A. With λ₁ = Q(A) this is exactly the
derivative of the transported quotient δ ↦ Q(T_δ A) at 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import curves
from .errors import GeometryError
from .geometry import Domain, unit_sphere_area
from .isoperimetric import SubsetRegion, geometric_quotient
from .quadrature import composite_nodes, sphere_points_rule

NU_CONVENTION = "nu = unit inner normal of A (density of Du with respect to |Du| for u = chi_A)"


# --------------------------------------------------------------------------- fields
@dataclass(frozen=True)
class PerturbationField:
    """C¹ vector field R with analytic Jacobian DR; both act on (n, N) point arrays."""

    R: Callable[[np.ndarray], np.ndarray]
    DR: Callable[[np.ndarray], np.ndarray]
    dim: int = 2
    name: str = "custom"
    is_divergence_free: bool = False
    is_constant: bool = False

    def __call__(self, x) -> np.ndarray:
        return self.R(np.atleast_2d(np.asarray(x, dtype=float)))

    def jacobian(self, x) -> np.ndarray:
        return self.DR(np.atleast_2d(np.asarray(x, dtype=float)))

    def divergence(self, x) -> np.ndarray:
        return np.trace(self.jacobian(x), axis1=1, axis2=2)

    def check(self, n_points: int = 10, seed: int = 0, step: float = 1e-6, rtol: float = 1e-6) -> float:
        """Max relative gap between DR and central differences at random points in [-2, 2]^N.

        Raises ``ValueError`` if the gap exceeds ``rtol`` or a divergence-free
        tag is contradicted.
        """
        rng = np.random.default_rng(seed)
        x = rng.uniform(-2, 2, size=(n_points, self.dim))
        J = self.jacobian(x)
        fd = np.empty_like(J)
        for j in range(self.dim):
            e = np.zeros(self.dim)
            e[j] = step
            fd[:, :, j] = (self(x + e) - self(x - e)) / (2 * step)
        scale = max(1.0, float(np.abs(J).max()))
        gap = float(np.abs(fd - J).max()) / scale
        if gap > rtol:
            raise ValueError(f"{self.name}: Jacobian disagrees with finite differences ({gap:.2e})")
        if self.is_divergence_free and np.abs(np.trace(J, axis1=1, axis2=2)).max() > 1e-10:
            raise ValueError(f"{self.name}: tagged divergence-free but trace(DR) ≠ 0")
        return gap


def dilation(dim: int = 2) -> PerturbationField:
    return PerturbationField(lambda x: x.copy(), lambda x: np.broadcast_to(np.eye(dim), (len(x), dim, dim)).copy(),
                             dim, "dilation")


def translation(v) -> PerturbationField:
    v = np.asarray(v, dtype=float)
    d = len(v)
    return PerturbationField(lambda x: np.broadcast_to(v, x.shape).copy(),
                             lambda x: np.zeros((len(x), d, d)), d, "translation",
                             is_divergence_free=True, is_constant=True)


def linear(M, name: str = "linear") -> PerturbationField:
    M = np.asarray(M, dtype=float)
    d = M.shape[0]
    return PerturbationField(lambda x: x @ M.T, lambda x: np.broadcast_to(M, (len(x), d, d)).copy(),
                             d, name, is_divergence_free=abs(np.trace(M)) < 1e-14)


def rotation(dim: int = 2) -> PerturbationField:
    """Infinitesimal rotation in the (x₁, x₂) plane."""
    M = np.zeros((dim, dim))
    M[0, 1], M[1, 0] = -1.0, 1.0
    return linear(M, "rotation")


def shear(dim: int = 2) -> PerturbationField:
    """R = (x₂, 0, …)."""
    M = np.zeros((dim, dim))
    M[0, 1] = 1.0
    return linear(M, "shear")


def shear_minus_trace(M=((1.0, 2.0), (0.0, 3.0))) -> PerturbationField:
    """Linear field M − (tr M/N)·I: a general shear with its divergence removed."""
    M = np.asarray(M, dtype=float)
    return linear(M - np.trace(M) / len(M) * np.eye(len(M)), "shear_minus_trace")


def tangential_polynomial(dim: int = 2) -> PerturbationField:
    """R = (1 + |x|²)(−x₂, x₁, 0, …): tangent to every centred sphere and divergence-free."""

    def R(x):
        q = 1.0 + np.sum(x * x, axis=1)
        out = np.zeros_like(x)
        out[:, 0], out[:, 1] = -q * x[:, 1], q * x[:, 0]
        return out

    def DR(x):
        q = 1.0 + np.sum(x * x, axis=1)
        J = np.zeros((len(x), dim, dim))
        J[:, 0, :] = -2.0 * x[:, 1, None] * x
        J[:, 1, :] = 2.0 * x[:, 0, None] * x
        J[:, 0, 1] -= q
        J[:, 1, 0] += q
        return J

    return PerturbationField(R, DR, dim, "tangential_polynomial", is_divergence_free=True)


def polynomial(terms, dim: int = 2, name: str = "polynomial") -> PerturbationField:
    """R_i = Σ c · Π_j x_j^{a_j} over ``terms`` given as (i, exponents, c)."""
    terms = [(int(i), tuple(int(a) for a in e), float(c)) for i, e, c in terms]
    for i, e, _ in terms:
        if not 0 <= i < dim or len(e) != dim or min(e) < 0:
            raise ValueError(f"bad polynomial term ({i}, {e})")

    def mono(x, e):
        return np.prod([x[:, j] ** e[j] for j in range(dim)], axis=0)

    def R(x):
        out = np.zeros_like(x)
        for i, e, c in terms:
            out[:, i] += c * mono(x, e)
        return out

    def DR(x):
        J = np.zeros((len(x), dim, dim))
        for i, e, c in terms:
            for j in range(dim):
                if e[j]:
                    d = list(e)
                    d[j] -= 1
                    J[:, i, j] += c * e[j] * mono(x, d)
        return J

    f = PerturbationField(R, DR, dim, name)
    div0 = np.abs(f.divergence(np.random.default_rng(1).normal(size=(12, dim)))).max() < 1e-12
    return PerturbationField(R, DR, dim, name, is_divergence_free=bool(div0))


BUILTINS = {"dilation": dilation, "translation": translation, "rotation": rotation, "shear": shear,
            "shear_minus_trace": lambda dim=2: shear_minus_trace(), "tangential_polynomial": tangential_polynomial}


# --------------------------------------------------------------------------- formula
def f_quadratic(X, x, field: PerturbationField) -> np.ndarray:
    """f(X) = div R(x) − Xᵀ DR(x) X for unit vectors X (row-wise)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if np.any(np.abs(np.linalg.norm(X, axis=1) - 1.0) > 1e-9):
        raise ValueError("X must be a unit vector")
    J = field.jacobian(x)
    return np.trace(J, axis1=1, axis2=2) - np.einsum("ni,nij,nj->n", X, J, X)


@dataclass
class ShapeDerivativeResult:
    value: float
    interior: float
    trace: float
    transport: float
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"value": self.value,
                "terms": {"interior": self.interior, "trace": self.trace, "transport": self.transport},
                "notes": list(self.notes)}


def _boundary_integrals(pieces, field: PerturbationField, lambda1: float, cells: int):
    interior = trace = transport = 0.0
    for piece in pieces:
        x, n_out, w = curves.piece_quadrature(piece, cells=cells)
        nu = -n_out  # inner normal of A
        if piece.on_boundary:
            trace -= lambda1 * float(w @ f_quadratic(n_out, x, field))
        else:
            interior += float(w @ f_quadratic(nu, x, field))
        transport -= float(w @ np.einsum("ni,ni->n", field(x), nu))
    return interior, trace, transport


def shape_derivative(A, lambda1: float, field: PerturbationField, rtol: float = 1e-8) -> ShapeDerivativeResult:
    """Evaluate the shape-derivative formula on a planar region or a whole ball.

    ``A`` is a :class:`SubsetRegion` (N = 2) or a ball :class:`Domain`, read
    as A = Ω̄ (any N with a sphere rule, i.e. N ∈ {2, 3}).
    """
    notes = [NU_CONVENTION, "extremality of (A, lambda1) is not checked"]
    if isinstance(A, Domain):
        if A.kind != "ball":
            A = SubsetRegion.whole(A)
        else:
            return _ball_whole(A, lambda1, field, notes)
    if A.trace_length <= 0:
        raise ValueError("no boundary trace: |A ∩ ∂Ω| = 0")
    pieces = A.oriented_pieces()
    cells, prev = 2, None
    while True:
        terms = _boundary_integrals(pieces, field, lambda1, cells)
        total = sum(terms)
        if prev is not None and abs(total - prev) <= rtol * max(1.0, abs(total)):
            break
        if cells > 256:
            notes.append(f"quadrature tolerance {rtol} not confirmed")
            break
        prev, cells = total, cells * 2
    P = A.trace_length
    i, t, r = (x / P for x in terms)
    return ShapeDerivativeResult(i + t + r, i, t, r, notes)


def _ball_whole(ball: Domain, lambda1: float, field: PerturbationField, notes) -> ShapeDerivativeResult:
    if field.dim != ball.dim:
        raise GeometryError("field and domain dimensions differ")
    x, n, w = sphere_points_rule(ball.dim, 64, ball.radius)
    x = x + np.asarray(ball.center)
    P = float(w.sum())
    trace = -lambda1 * float(w @ f_quadratic(n, x, field)) / P
    transport = float(w @ np.einsum("ni,ni->n", field(x), n)) / P
    return ShapeDerivativeResult(trace + transport, 0.0, trace, transport, notes)


def ball_specialization(N: int, field: PerturbationField, n: int = 64) -> float:
    """−((N−1)/N)·(1/|∂Ω|)∫_{∂Ω}(R, n̄) on the sphere of radius N."""
    x, normals, w = sphere_points_rule(N, n, float(N))
    area = unit_sphere_area(N) * float(N) ** (N - 1)
    return -((N - 1) / N) * float(w @ np.einsum("ni,ni->n", field(x), normals)) / area


def tangential_identity_gap(field: PerturbationField, radius: float = 2.0, n_points: int = 20,
                            seed: int = 0, step: float = 1e-3) -> float:
    """Max over sphere points of |div R − n̄·DR n̄ − (div_g R_∂ + H (R, n̄))|, H = (N−1)/radius.

    The tangential divergence of R_∂ = R − (R, n̄)n̄ is taken by central
    differences (fourth order) along great circles through each point.
    """
    N = field.dim
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n_points, N))
    x = radius * x / np.linalg.norm(x, axis=1, keepdims=True)
    H = (N - 1) / radius

    def tangential(y):
        nn = y / np.linalg.norm(y, axis=1, keepdims=True)
        R = field(y)
        return R - np.einsum("ni,ni->n", R, nn)[:, None] * nn

    worst = 0.0
    for p in x:
        n = p / radius
        basis = np.linalg.svd(np.eye(N) - np.outer(n, n))[0][:, : N - 1].T
        div_g = 0.0
        for e in basis:
            def walk(s):
                return (np.cos(s / radius) * p + radius * np.sin(s / radius) * e)[None]
            # fourth-order central difference
            diff = (8 * (tangential(walk(step)) - tangential(walk(-step)))
                    - (tangential(walk(2 * step)) - tangential(walk(-2 * step))))[0]
            div_g += float(e @ diff) / (12 * step)
        lhs = float(f_quadratic(n, p[None], field)[0])
        rhs = div_g + H * float(field(p[None])[0] @ n)
        worst = max(worst, abs(lhs - rhs))
    return worst


# --------------------------------------------------------------------------- transport
def _transported_measures(pieces, field: PerturbationField, delta: float, cells: int = 16):
    area = interior = trace = 0.0
    t, w = composite_nodes(0.0, 1.0, cells, 12)
    for piece in pieces:
        x = piece.point(t)
        dx = piece.derivative(t)
        J = np.eye(2)[None] + delta * field.jacobian(x)
        if np.any(np.linalg.det(J) <= 0):
            raise GeometryError("T_delta flips orientation: not injective")
        y = x + delta * field(x)
        dy = np.einsum("nij,nj->ni", J, dx)
        area += 0.5 * float(w @ (y[:, 0] * dy[:, 1] - y[:, 1] * dy[:, 0]))
        length = float(w @ np.hypot(dy[:, 0], dy[:, 1]))
        if piece.on_boundary:
            trace += length
        else:
            interior += length
    return area, interior, trace


def transported_quotient(domain: Domain, A: SubsetRegion, field: PerturbationField, delta: float) -> float:
    """Quotient of T_δ(A) in T_δ(Ω), with every boundary piece mapped parametrically."""
    if field.dim != 2:
        raise GeometryError("transport implemented for planar regions")
    pieces = A.oriented_pieces()
    probe = np.vstack([curves.sample(p, domain.diameter / 64) for p in domain.boundary_pieces()] +
                      [curves.sample(p, domain.diameter / 64) for p in pieces])
    sup = float(np.linalg.norm(field.jacobian(probe), ord=2, axis=(1, 2)).max())
    if abs(delta) * sup >= 0.5:
        raise GeometryError("|delta| sup|DR| must stay below 1/2")
    if delta == 0:
        return geometric_quotient(A)
    area, interior, trace = _transported_measures(pieces, field, delta)
    if trace <= 0:
        raise ValueError("no boundary trace after transport")
    return (interior + area) / trace


@dataclass
class FDCheck:
    delta: float
    formula: float
    central_diff: float
    gap: float
    left_diff: float
    right_diff: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def finite_difference_check(domain: Domain, A: SubsetRegion, lambda1: float, field: PerturbationField,
                            delta: float) -> FDCheck:
    """Compare the formula with central/one-sided differences of the transported quotient."""
    q0 = transported_quotient(domain, A, field, 0.0)
    qp = transported_quotient(domain, A, field, delta)
    qm = transported_quotient(domain, A, field, -delta)
    formula = shape_derivative(A, lambda1, field).value
    central = (qp - qm) / (2 * delta)
    return FDCheck(delta, formula, central, abs(formula - central), (q0 - qm) / delta, (qp - q0) / delta)


def radius_n_ball_report(N: int = 2, delta: float = 1e-3) -> dict:
    """Formula value vs one-sided differences of λ₁((1+δ)B_N) = min(1+δ, 1) under dilation."""
    from .exact import lambda1_closed_form

    ball = Domain.ball(float(N), N)
    lam = [lambda1_closed_form(ball.scaled(1 + s)).lambda1 for s in (-delta, 0.0, delta)]
    field = dilation(N)
    return {
        "N": N,
        "ball_specialization": ball_specialization(N, field),
        "shape_derivative": shape_derivative(ball, 1.0, field).value,
        "left_diff": (lam[1] - lam[0]) / delta,
        "right_diff": (lam[2] - lam[1]) / delta,
        "flag": "one-sided: lambda1 = min(1 + delta, 1) is not differentiable at delta = 0",
    }
