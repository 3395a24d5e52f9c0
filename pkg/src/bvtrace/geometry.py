"""Computational domains: balls, annuli, polygons and the square with a thin appendage."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gamma, pi

import numpy as np
import shapely

from . import curves
from .errors import GeometryError

KINDS = ("ball", "annulus", "polygon", "square_with_appendage")


def unit_ball_volume(k: int) -> float:
    """Lebesgue measure of the unit ball of ℝ^k (k = 0 gives 1)."""
    return pi ** (k / 2) / gamma(k / 2 + 1)


def unit_sphere_area(k: int) -> float:
    """H^{k-1} measure of the unit sphere of ℝ^k.

    For k = 1 the "sphere" is {-1, 1} with counting measure, so the value is 2.
    """
    return k * unit_ball_volume(k)


def _signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True)
class Domain:
    """Bounded domain of ℝ^N with outward normal convention.

    Use the ``ball``/``annulus``/``polygon``/``square_with_appendage``
    constructors rather than the raw initialiser.
    """

    kind: str
    dim: int = 2
    radius: float | None = None
    inner_radius: float | None = None
    vertices: tuple[tuple[float, float], ...] | None = None
    delta: float | None = None
    eta: float | None = None
    center: tuple[float, ...] = field(default=(0.0, 0.0))

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GeometryError(f"unknown domain kind {self.kind!r}")
        if self.dim < 2:
            raise GeometryError("dimension must be at least 2")
        if self.kind in ("polygon", "square_with_appendage") and self.dim != 2:
            raise GeometryError(f"{self.kind} domains exist only for N = 2")
        if self.kind in ("ball", "annulus"):
            if self.radius is None or self.radius <= 0:
                raise GeometryError("radius must be positive")
            if len(self.center) != self.dim:
                object.__setattr__(self, "center", (0.0,) * self.dim)
        if self.kind == "annulus":
            if self.inner_radius is None or not 0 < self.inner_radius < self.radius:
                raise GeometryError("annulus requires 0 < r < R")

    @classmethod
    def ball(cls, radius: float, dim: int = 2, center=None) -> "Domain":
        c = tuple(float(x) for x in center) if center is not None else (0.0,) * dim
        return cls("ball", dim=dim, radius=float(radius), center=c)

    @classmethod
    def annulus(cls, inner_radius: float, radius: float, dim: int = 2) -> "Domain":
        return cls("annulus", dim=dim, radius=float(radius), inner_radius=float(inner_radius),
                   center=(0.0,) * dim)

    @classmethod
    def polygon(cls, vertices) -> "Domain":
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise GeometryError("polygon needs at least three planar vertices")
        if not shapely.LinearRing(v).is_simple:
            raise GeometryError("polygon vertex list is self-intersecting")
        if _signed_area(v) < 0:
            v = v[::-1]
        return cls("polygon", vertices=tuple(map(tuple, v.tolist())))

    @classmethod
    def square_with_appendage(cls, delta: float, eta: float) -> "Domain":
        """Unit square with the rectangle [1, 1+eta] × [0, delta] attached."""
        if not (0 < delta < 1 and eta > 0):
            raise GeometryError("appendage needs 0 < delta < 1 and eta > 0")
        verts = (
            (0.0, 0.0), (1.0, 0.0), (1.0 + eta, 0.0), (1.0 + eta, delta),
            (1.0, delta), (1.0, 1.0), (0.0, 1.0),
        )
        return cls("square_with_appendage", vertices=verts, delta=float(delta), eta=float(eta))

    @classmethod
    def unit_square(cls) -> "Domain":
        return cls.polygon([(0, 0), (1, 0), (1, 1), (0, 1)])

    # ------------------------------------------------------------------ queries
    @property
    def is_polygonal(self) -> bool:
        return self.kind in ("polygon", "square_with_appendage")

    @property
    def vertex_array(self) -> np.ndarray:
        if self.vertices is None:
            raise GeometryError(f"{self.kind} has no vertex list")
        return np.asarray(self.vertices, dtype=float)

    @property
    def diameter(self) -> float:
        if self.kind in ("ball", "annulus"):
            return 2.0 * self.radius
        v = self.vertex_array
        return float(np.max(np.linalg.norm(v[:, None] - v[None], axis=-1)))

    @property
    def feature_size(self) -> float:
        """Length scale below which a mesh can resolve the domain."""
        if self.kind == "ball":
            return self.radius
        if self.kind == "annulus":
            return self.radius - self.inner_radius
        vol, per = measures(self)
        return 2.0 * vol / per

    def boundary_pieces(self) -> list:
        """Exact, positively oriented boundary as trace-tagged pieces (N = 2 only)."""
        if self.dim != 2:
            raise GeometryError("boundary pieces exist only for planar domains")
        if self.kind == "ball":
            return [curves.circle(self.center, self.radius, True)]
        if self.kind == "annulus":
            return [curves.circle(self.center, self.radius, True),
                    curves.circle(self.center, self.inner_radius, True, ccw=False)]
        return curves.polygon_pieces(self.vertices, True)

    def contains(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind in ("ball", "annulus"):
            r = np.linalg.norm(p - np.asarray(self.center), axis=1)
            ok = r < self.radius
            if self.kind == "annulus":
                ok &= r > self.inner_radius
            return ok
        return curves.contains(self.boundary_pieces(), p, max_step=np.inf)

    def boundary_distance(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind in ("ball", "annulus"):
            r = np.linalg.norm(p - np.asarray(self.center), axis=1)
            d = np.abs(r - self.radius)
            if self.kind == "annulus":
                d = np.minimum(d, np.abs(r - self.inner_radius))
            return d
        ring = shapely.LinearRing(self.vertex_array)
        return shapely.distance(ring, shapely.points(p))

    def as_shapely(self, arc_step: float | None = None) -> shapely.Polygon:
        """Polygon (approximation for curved kinds) usable for boolean operations."""
        if self.is_polygonal:
            return shapely.Polygon(self.vertex_array)
        step = arc_step or self.radius * 2 * pi / 1024
        outer = curves.sample(curves.circle(self.center[:2], self.radius, True), step)[:-1]
        holes = []
        if self.kind == "annulus":
            holes = [curves.sample(curves.circle(self.center[:2], self.inner_radius, True), step)[:-1]]
        return shapely.Polygon(outer, holes)

    def scaled(self, t: float) -> "Domain":
        """Dilation tΩ about the origin."""
        if self.kind == "ball":
            return Domain.ball(t * self.radius, self.dim, tuple(t * c for c in self.center))
        if self.kind == "annulus":
            return Domain.annulus(t * self.inner_radius, t * self.radius, self.dim)
        return Domain.polygon(t * self.vertex_array)


def measures(domain: Domain) -> tuple[float, float]:
    """(|Ω|, H^{N-1}(∂Ω)) in closed form."""
    N = domain.dim
    if domain.kind == "ball":
        R = domain.radius
        return unit_ball_volume(N) * R**N, unit_sphere_area(N) * R ** (N - 1)
    if domain.kind == "annulus":
        R, r = domain.radius, domain.inner_radius
        return (unit_ball_volume(N) * (R**N - r**N),
                unit_sphere_area(N) * (R ** (N - 1) + r ** (N - 1)))
    if domain.is_polygonal:
        v = domain.vertex_array
        per = float(np.sum(np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)))
        return _signed_area(v), per
    raise GeometryError(f"no measures for {domain.kind} in dimension {N}")


def curvature(domain: Domain, point, tol: float = 1e-9) -> np.ndarray:
    """Principal curvatures at a boundary point, positive where ∂Ω bulges outward."""
    p = np.asarray(point, dtype=float)
    if p.shape != (domain.dim,):
        raise GeometryError(f"boundary point must have {domain.dim} coordinates")
    scale = tol * max(domain.diameter, 1.0)
    if domain.kind in ("ball", "annulus"):
        r = float(np.linalg.norm(p - np.asarray(domain.center)))
        if abs(r - domain.radius) <= scale:
            return np.full(domain.dim - 1, 1.0 / domain.radius)
        if domain.kind == "annulus" and abs(r - domain.inner_radius) <= scale:
            return np.full(domain.dim - 1, -1.0 / domain.inner_radius)
        raise GeometryError("point is not on the boundary")
    v = domain.vertex_array
    if np.min(np.linalg.norm(v - p, axis=1)) <= scale:
        raise GeometryError("curvature is undefined at a polygon corner")
    if domain.boundary_distance(p)[0] > scale:
        raise GeometryError("point is not on the boundary")
    return np.zeros(1)


def outward_normal(domain: Domain, point) -> np.ndarray:
    p = np.asarray(point, dtype=float)
    if domain.kind in ("ball", "annulus"):
        rel = p - np.asarray(domain.center)
        r = np.linalg.norm(rel)
        n = rel / r
        if domain.kind == "annulus" and abs(r - domain.inner_radius) < abs(r - domain.radius):
            n = -n
        return n
    v = domain.vertex_array
    e0, e1 = v, np.roll(v, -1, axis=0)
    seg = e1 - e0
    t = np.clip(np.einsum("ij,ij->i", p - e0, seg) / np.einsum("ij,ij->i", seg, seg), 0, 1)
    k = int(np.argmin(np.linalg.norm(e0 + t[:, None] * seg - p, axis=1)))
    s = seg[k] / np.linalg.norm(seg[k])
    return np.array([s[1], -s[0]])


@dataclass(frozen=True)
class BoundaryPatch:
    """Local graph t = ρ(y) of ∂Ω over its tangent plane at a boundary point.

    ρ(y) = ½ Σ κ_i y_i² (1 + O(|y|^a)); the outward normal at the origin is
    (0, …, 0, 1). Only the exact paraboloid (no remainder) is represented
    numerically; ``a`` is carried for the curvature criterion.
    """

    kappa: tuple[float, ...]
    a: float = np.inf
    radius: float = 1.0

    @property
    def dim(self) -> int:
        return len(self.kappa) + 1

    def rho(self, y: np.ndarray) -> np.ndarray:
        y = np.atleast_2d(y)
        return 0.5 * np.sum(np.asarray(self.kappa) * y**2, axis=-1)


def good_point_test(kappa, a: float) -> bool:
    """Curvature criterion: all κ_i > 0, Σκ_i > 1 and graph remainder exponent a > 2."""
    k = np.asarray(kappa, dtype=float)
    return bool(np.all(k > 0) and k.sum() > 1.0 and a > 2)
