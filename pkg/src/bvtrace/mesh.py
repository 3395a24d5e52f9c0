"""Planar triangulations of domains (constrained Delaunay via ``triangle``)."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import triangle

from .errors import GeometryError
from .geometry import Domain


@dataclass(frozen=True, eq=False)
class TriMesh:
    """P1 mesh. ``boundary_edges`` are oriented with Ω on their left."""

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    h: float

    def __post_init__(self):
        for a in (self.vertices, self.triangles, self.boundary_edges):
            a.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def areas(self) -> np.ndarray:
        return self.signed_areas

    @cached_property
    def gradients(self) -> np.ndarray:
        """(n_tri, 2, 3): ∇φ of the three local hat functions on each triangle."""
        p = self.vertices[self.triangles]
        # ∇φ_i = rot(p_{i+2} - p_{i+1}) / (2|T|)
        e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=2)
        g = np.stack([-e[:, 1], e[:, 0]], axis=1)
        return g / (2.0 * self.signed_areas[:, None, None])

    @cached_property
    def boundary_lengths(self) -> np.ndarray:
        e = self.vertices[self.boundary_edges]
        return np.linalg.norm(e[:, 1] - e[:, 0], axis=1)

    @cached_property
    def boundary_normals(self) -> np.ndarray:
        e = self.vertices[self.boundary_edges]
        d = (e[:, 1] - e[:, 0]) / self.boundary_lengths[:, None]
        return np.column_stack([d[:, 1], -d[:, 0]])

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self.boundary_edges)

    @cached_property
    def lumped_mass(self) -> np.ndarray:
        m = np.zeros(self.n_vertices)
        np.add.at(m, self.triangles.ravel(), np.repeat(self.areas / 3.0, 3))
        return m

    @cached_property
    def lumped_boundary_mass(self) -> np.ndarray:
        b = np.zeros(self.n_vertices)
        np.add.at(b, self.boundary_edges.ravel(), np.repeat(self.boundary_lengths / 2.0, 2))
        return b

    @cached_property
    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique edges and, per triangle, the indices of its three edges.

        Local edge i of a triangle is opposite its vertex i.
        """
        t = self.triangles
        local = np.stack([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]], axis=1).reshape(-1, 2)
        key = np.sort(local, axis=1)
        uniq, inv = np.unique(key, axis=0, return_inverse=True)
        return uniq, inv.reshape(-1, 3)

    @cached_property
    def neighbors(self) -> np.ndarray:
        """(n_tri, 3) neighbour across local edge i, or -1 on ∂Ω."""
        _, tri_edges = self.edges
        flat = tri_edges.ravel()
        owner = np.repeat(np.arange(len(self.triangles)), 3)
        order = np.argsort(flat, kind="stable")
        nb = np.full(flat.shape, -1)
        fs, os_ = flat[order], owner[order]
        same = fs[1:] == fs[:-1]
        i = np.nonzero(same)[0]
        nb[order[i]] = os_[i + 1]
        nb[order[i + 1]] = os_[i]
        return nb.reshape(-1, 3)

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        """(n_tri, 3) length of local edge i."""
        p = self.vertices[self.triangles]
        return np.stack([np.linalg.norm(p[:, (i + 2) % 3] - p[:, (i + 1) % 3], axis=1)
                         for i in range(3)], axis=1)

    @property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def boundary_loops(self) -> list[list[int]]:
        nxt = {int(a): int(b) for a, b in self.boundary_edges}
        loops, seen = [], set()
        for start in nxt:
            if start in seen:
                continue
            loop, v = [], start
            while v not in seen:
                seen.add(v)
                loop.append(v)
                v = nxt[v]
            loops.append(loop)
        return loops

    def to_text(self) -> str:
        """Plain-text export: counts, "x y" lines, "i j k" lines, "i j" boundary lines."""
        lines = [f"{self.n_vertices} {len(self.triangles)} {len(self.boundary_edges)}"]
        lines += [f"{x:.17g} {y:.17g}" for x, y in self.vertices]
        lines += [f"{i} {j} {k}" for i, j, k in self.triangles]
        lines += [f"{i} {j}" for i, j in self.boundary_edges]
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str, h: float = float("nan")) -> "TriMesh":
        rows = text.split("\n")
        nv, nt, nb = map(int, rows[0].split())
        v = np.array([list(map(float, r.split())) for r in rows[1:1 + nv]])
        t = np.array([list(map(int, r.split())) for r in rows[1 + nv:1 + nv + nt]], dtype=np.int64)
        b = np.array([list(map(int, r.split())) for r in rows[1 + nv + nt:1 + nv + nt + nb]],
                     dtype=np.int64)
        return cls(v, t, b.reshape(-1, 2), h)


def _boundary_polyline(domain: Domain, h: float) -> tuple[list[np.ndarray], bool]:
    """Boundary loops as vertex arrays; curved loops have chord sagitta ≤ h²/8."""
    if domain.is_polygonal:
        return [domain.vertex_array], False
    loops = []
    radii = [domain.radius] + ([domain.inner_radius] if domain.kind == "annulus" else [])
    for k, r in enumerate(radii):
        step = h * min(1.0, np.sqrt(r))
        n = max(8, int(np.ceil(2 * np.pi * r / step)))
        th = 2 * np.pi * np.arange(n) / n
        pts = np.column_stack([r * np.cos(th), r * np.sin(th)]) + np.asarray(domain.center[:2])
        loops.append(pts if k == 0 else pts[::-1])
    return loops, True


def triangulate(domain: Domain, h: float, min_angle: float = 28.0) -> TriMesh:
    """Quality triangulation with target edge length ``h``.

    Polygon vertices are kept exactly (boundary points inserted on straight
    edges only); circles are replaced by inscribed polygons with chord
    sagitta ≤ h²/8.
    """
    if domain.dim != 2:
        raise GeometryError("triangulation is implemented for N = 2 only")
    if not h > 0:
        raise GeometryError("mesh size must be positive")
    if h > domain.feature_size:
        raise GeometryError(f"h = {h} exceeds the domain feature size {domain.feature_size:.4g}")
    loops, curved = _boundary_polyline(domain, h)
    pts, segs, holes, off = [], [], [], 0
    for k, loop in enumerate(loops):
        n = len(loop)
        pts.append(loop)
        segs.append(np.column_stack([np.arange(n), (np.arange(n) + 1) % n]) + off)
        off += n
        if k > 0:
            holes.append(np.asarray(domain.center[:2], dtype=float))
    spec = {"vertices": np.vstack(pts), "segments": np.vstack(segs)}
    if holes:
        spec["holes"] = np.array(holes)
    max_area = np.sqrt(3) / 4 * h * h
    flags = f"pq{min_angle:g}a{max_area:.17g}Q" + ("Y" if curved else "")
    out = triangle.triangulate(spec, flags)
    v = np.asarray(out["vertices"], dtype=float)
    t = np.asarray(out["triangles"], dtype=np.int64)
    p = v[t]
    sa = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    t[sa < 0] = t[sa < 0][:, [0, 2, 1]]
    return TriMesh(v, t, _oriented_boundary(t), h)


def _oriented_boundary(t: np.ndarray) -> np.ndarray:
    """Edges used by exactly one triangle, in that triangle's (counter-clockwise) order."""
    directed = np.stack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=1).reshape(-1, 2)
    key = np.sort(directed, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    return directed[counts[inv.ravel()] == 1]


def mesh_from_arrays(vertices, triangles, h: float = float("nan")) -> TriMesh:
    t = np.asarray(triangles, dtype=np.int64)
    return TriMesh(np.asarray(vertices, dtype=float), t, _oriented_boundary(t), h)
