"""Oriented boundary pieces (segments and circular arcs) and half-plane clipping.

A planar region is stored as an unordered collection of oriented pieces whose
union is a set of closed curves, with the region on the left. Each piece is
tagged ``on_boundary`` when it lies on ∂Ω (trace part) rather than inside Ω.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence, Union

import numpy as np

from .errors import GeometryError
from .quadrature import composite_nodes

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Segment:
    p0: tuple[float, float]
    p1: tuple[float, float]
    on_boundary: bool = False

    def point(self, t):
        t = np.asarray(t, dtype=float)[..., None]
        return (1.0 - t) * np.asarray(self.p0) + t * np.asarray(self.p1)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        d = np.asarray(self.p1) - np.asarray(self.p0)
        return np.broadcast_to(d, t.shape + (2,)).copy()

    @property
    def length(self) -> float:
        return float(np.hypot(self.p1[0] - self.p0[0], self.p1[1] - self.p0[1]))

    @property
    def green_area(self) -> float:
        (x0, y0), (x1, y1) = self.p0, self.p1
        return 0.5 * (x0 * y1 - x1 * y0)

    def roots(self, d, c) -> list[float]:
        s0 = d[0] * self.p0[0] + d[1] * self.p0[1] - c
        s1 = d[0] * self.p1[0] + d[1] * self.p1[1] - c
        if (s0 > 0) == (s1 > 0) or s0 == s1:
            return []
        t = s0 / (s0 - s1)
        return [t] if 0.0 < t < 1.0 else []

    def sub(self, t0: float, t1: float) -> "Segment":
        a, b = self.point([t0, t1])
        return Segment(tuple(a), tuple(b), self.on_boundary)

    def reversed(self) -> "Segment":
        return Segment(self.p1, self.p0, self.on_boundary)

    def transformed(self, A: np.ndarray, b: np.ndarray) -> "Segment":
        return Segment(tuple(A @ self.p0 + b), tuple(A @ self.p1 + b), self.on_boundary)


@dataclass(frozen=True)
class Arc:
    """Circular arc θ ∈ [theta0, theta1]; counter-clockwise when theta1 > theta0."""

    center: tuple[float, float]
    radius: float
    theta0: float
    theta1: float
    on_boundary: bool = False

    def _theta(self, t):
        return self.theta0 + np.asarray(t, dtype=float) * (self.theta1 - self.theta0)

    def point(self, t):
        th = self._theta(t)
        return np.stack(
            [self.center[0] + self.radius * np.cos(th), self.center[1] + self.radius * np.sin(th)],
            axis=-1,
        )

    def derivative(self, t):
        th = self._theta(t)
        k = self.radius * (self.theta1 - self.theta0)
        return np.stack([-k * np.sin(th), k * np.cos(th)], axis=-1)

    @property
    def length(self) -> float:
        return abs(self.radius * (self.theta1 - self.theta0))

    @property
    def green_area(self) -> float:
        cx, cy = self.center
        r, a, b = self.radius, self.theta0, self.theta1
        return 0.5 * (
            r * r * (b - a) + r * cx * (np.sin(b) - np.sin(a)) - r * cy * (np.cos(b) - np.cos(a))
        )

    def roots(self, d, c) -> list[float]:
        dn = float(np.hypot(*d))
        k = (c - d[0] * self.center[0] - d[1] * self.center[1]) / (self.radius * dn)
        if abs(k) >= 1.0:
            return []
        phi = np.arctan2(d[1], d[0])
        span = self.theta1 - self.theta0
        lo, hi = min(self.theta0, self.theta1), max(self.theta0, self.theta1)
        out = []
        for base in (phi + np.arccos(k), phi - np.arccos(k)):
            m0 = np.floor((lo - base) / TWO_PI)
            for m in range(int(m0), int(m0) + 3):
                th = base + m * TWO_PI
                if lo < th < hi:
                    out.append((th - self.theta0) / span)
        return sorted(t for t in out if 0.0 < t < 1.0)

    def sub(self, t0: float, t1: float) -> "Arc":
        th = self._theta([t0, t1])
        return Arc(self.center, self.radius, float(th[0]), float(th[1]), self.on_boundary)

    def reversed(self) -> "Arc":
        return Arc(self.center, self.radius, self.theta1, self.theta0, self.on_boundary)

    def transformed(self, A: np.ndarray, b: np.ndarray) -> "Arc":
        """Image under x ↦ A x + b for A a rotation or reflection times a scale."""
        scale = float(np.sqrt(abs(np.linalg.det(A))))
        Q = A / scale
        if not np.allclose(Q @ Q.T, np.eye(2), atol=1e-12):
            raise GeometryError("arcs only map to arcs under similarities")
        rot = np.arctan2(Q[1, 0], Q[0, 0])
        if np.linalg.det(Q) > 0:
            th0, th1 = self.theta0 + rot, self.theta1 + rot
        else:
            th0, th1 = rot - self.theta0, rot - self.theta1
        c = A @ np.asarray(self.center) + b
        return Arc((float(c[0]), float(c[1])), self.radius * scale, th0, th1, self.on_boundary)


Piece = Union[Segment, Arc]


def circle(center, radius: float, on_boundary: bool, ccw: bool = True) -> Arc:
    a, b = (0.0, TWO_PI) if ccw else (TWO_PI, 0.0)
    return Arc((float(center[0]), float(center[1])), float(radius), a, b, on_boundary)


def polygon_pieces(vertices, on_boundary: bool) -> list[Segment]:
    v = [tuple(map(float, p)) for p in vertices]
    return [Segment(v[i], v[(i + 1) % len(v)], on_boundary) for i in range(len(v))]


def total_area(pieces: Sequence[Piece]) -> float:
    return float(sum(p.green_area for p in pieces))


def total_length(pieces: Sequence[Piece], on_boundary: bool | None = None) -> float:
    return float(
        sum(p.length for p in pieces if on_boundary is None or p.on_boundary == on_boundary)
    )


def piece_quadrature(piece: Piece, cells: int = 4, order: int = 10):
    """Gauss points on a piece: (points, outward unit normals, arc-length weights).

    "Outward" is relative to the region on the piece's left.
    """
    t, w = composite_nodes(0.0, 1.0, cells, order)
    x = piece.point(t)
    dx = piece.derivative(t)
    speed = np.hypot(dx[:, 0], dx[:, 1])
    normals = np.column_stack([dx[:, 1], -dx[:, 0]]) / speed[:, None]
    return x, normals, w * speed


def sample(piece: Piece, max_step: float) -> np.ndarray:
    """Points along a piece (endpoints included) with spacing ≤ ``max_step``."""
    n = max(1, int(np.ceil(piece.length / max_step)))
    if isinstance(piece, Arc):
        n = max(n, int(np.ceil(abs(piece.theta1 - piece.theta0) / (np.pi / 16))))
    return piece.point(np.linspace(0.0, 1.0, n + 1))


def _key(p, tol: float) -> tuple[int, int]:
    return (int(round(p[0] / tol)), int(round(p[1] / tol)))


def clip_halfplane(pieces: Sequence[Piece], direction, offset: float, tol: float = 1e-10) -> list[Piece]:
    """Intersect a region with {x : direction·x ≥ offset}.

    Boundary pieces are split at their crossings with the line; the line parts
    inside the region become new interior (``on_boundary=False``) chords.
    Generic position is assumed (the line does not run along a piece).
    """
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    kept: list[Piece] = []
    for piece in pieces:
        ts = [0.0] + piece.roots(d, offset) + [1.0]
        for a, b in zip(ts[:-1], ts[1:]):
            if b - a <= 1e-15:
                continue
            mid = piece.point(0.5 * (a + b))
            if d @ mid >= offset:
                kept.append(piece if (a == 0.0 and b == 1.0) else piece.sub(a, b))
    if not kept:
        return []
    starts: dict[tuple[int, int], int] = {}
    ends: dict[tuple[int, int], int] = {}
    coords: dict[tuple[int, int], np.ndarray] = {}
    for piece in kept:
        p0, p1 = piece.point(0.0), piece.point(1.0)
        k0, k1 = _key(p0, tol), _key(p1, tol)
        starts[k0] = starts.get(k0, 0) + 1
        ends[k1] = ends.get(k1, 0) + 1
        coords.setdefault(k0, p0)
        coords.setdefault(k1, p1)
    free_ends = []
    for k in set(starts) | set(ends):
        bal = ends.get(k, 0) - starts.get(k, 0)
        if bal:
            free_ends.append((k, bal))
    if not free_ends:
        return kept
    tangent = np.array([d[1], -d[0]])
    free_ends.sort(key=lambda kb: float(tangent @ coords[kb[0]]))
    if len(free_ends) % 2:
        raise GeometryError("degenerate half-plane clip (odd number of line crossings)")
    for (ka, ba), (kb, bb) in zip(free_ends[0::2], free_ends[1::2]):
        # a chord must leave an exit (dangling end) and reach an entry (dangling start)
        if ba <= 0 or bb >= 0:
            raise GeometryError("degenerate half-plane clip (unpaired crossings)")
        pa, pb = coords[ka], coords[kb]
        kept.append(Segment((float(pa[0]), float(pa[1])), (float(pb[0]), float(pb[1])), False))
    return kept


def reclassify(pieces: Sequence[Piece], on_boundary: bool) -> list[Piece]:
    return [replace(p, on_boundary=on_boundary) for p in pieces]


def contains(pieces: Sequence[Piece], points: np.ndarray, max_step: float) -> np.ndarray:
    """Even–odd point-in-region test on a polygonal sampling of the pieces."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    inside = np.zeros(len(pts), dtype=bool)
    x, y = pts[:, 0][:, None], pts[:, 1][:, None]
    for piece in pieces:
        s = sample(piece, max_step)
        x0, y0 = s[:-1, 0][None, :], s[:-1, 1][None, :]
        x1, y1 = s[1:, 0][None, :], s[1:, 1][None, :]
        crosses = (y0 > y) != (y1 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
        hits = crosses & (x < xc)
        inside ^= (hits.sum(axis=1) % 2).astype(bool)
    return inside

