"""Set formulation of λ₁: quotient (|∂A∩Ω| + |A|)/|A∩∂Ω|, eigenset search and hole problems.

Candidate sets come in two representations:

* ``pieces``: exact oriented boundary pieces (segments and arcs), trace parts
  tagged ``on_boundary``; measures are exact.
* ``cells``: a set of triangles of a mesh; ∂A∩Ω is the set of mesh edges
  separating in/out triangles, A∩∂Ω the mesh boundary edges of in-triangles.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from math import exp

import numpy as np
import shapely

from . import curves
from .errors import GeometryError, InfeasibleSearch, NotAGoodPoint
from .geometry import Domain, curvature, good_point_test, measures, outward_normal
from .mesh import TriMesh, triangulate
from .plaplace import EigenResult

log = logging.getLogger(__name__)


# --------------------------------------------------------------------------- regions
@dataclass(frozen=True, eq=False)
class SubsetRegion:
    """Candidate set A ⊆ Ω̄ with cached |A|, |∂A∩Ω| and |A∩∂Ω|."""

    kind: str  # "pieces" | "cells"
    pieces: tuple = ()
    mesh: TriMesh | None = None
    mask: np.ndarray | None = None
    area: float = 0.0
    interior_length: float = 0.0
    trace_length: float = 0.0
    label: str = ""

    @classmethod
    def from_pieces(cls, pieces, label: str = "") -> "SubsetRegion":
        pieces = tuple(pieces)
        return cls("pieces", pieces=pieces, area=curves.total_area(pieces),
                   interior_length=curves.total_length(pieces, False),
                   trace_length=curves.total_length(pieces, True), label=label)

    @classmethod
    def whole(cls, domain: Domain) -> "SubsetRegion":
        return cls.from_pieces(domain.boundary_pieces(), "whole domain")

    @classmethod
    def from_polygon(cls, vertices, domain: Domain, label: str = "") -> "SubsetRegion":
        """Polygon A; an edge is trace iff its endpoints and midpoint lie within 10⁻⁹·diam of ∂Ω."""
        v = np.asarray(vertices, dtype=float)
        if not shapely.LinearRing(v).is_simple:
            raise GeometryError("region polygon is self-intersecting")
        if np.dot(v[:, 0], np.roll(v[:, 1], -1)) - np.dot(np.roll(v[:, 0], -1), v[:, 1]) < 0:
            v = v[::-1]
        tol = 1e-9 * domain.diameter
        dist = domain.boundary_distance(v)
        inside = domain.contains(v) | (dist <= tol)
        if not np.all(inside):
            raise GeometryError("region polygon leaves the domain")
        pieces = []
        for i in range(len(v)):
            a, b = v[i], v[(i + 1) % len(v)]
            mid = domain.boundary_distance(0.5 * (a + b))[0]
            on = dist[i] <= tol and dist[(i + 1) % len(v)] <= tol and mid <= tol
            pieces.append(curves.Segment(tuple(a), tuple(b), bool(on)))
        return cls.from_pieces(pieces, label)

    @classmethod
    def from_cells(cls, mesh: TriMesh, cells, label: str = "") -> "SubsetRegion":
        mask = np.zeros(len(mesh.triangles), dtype=bool)
        c = np.asarray(cells)
        if c.dtype == bool:
            mask[:] = c
        else:
            mask[c.astype(np.int64)] = True
        mask.setflags(write=False)
        area, interior, trace = _cell_measures(mesh, mask)
        return cls("cells", mesh=mesh, mask=mask, area=area, interior_length=interior,
                   trace_length=trace, label=label)

    @property
    def cells(self) -> np.ndarray:
        if self.kind != "cells":
            raise GeometryError("region is not a cell set")
        return np.nonzero(self.mask)[0]

    def oriented_pieces(self) -> list:
        """Boundary of A as oriented pieces (cell sets give their mesh edges)."""
        if self.kind == "pieces":
            return list(self.pieces)
        mesh, mask = self.mesh, self.mask
        nb = mesh.neighbors
        out = []
        for t in np.nonzero(mask)[0]:
            tri = mesh.triangles[t]
            for i in range(3):
                n = nb[t, i]
                if n >= 0 and mask[n]:
                    continue
                a, b = mesh.vertices[tri[(i + 1) % 3]], mesh.vertices[tri[(i + 2) % 3]]
                out.append(curves.Segment(tuple(a), tuple(b), bool(n < 0)))
        return out

    def loops(self, max_step: float = 0.01) -> list[np.ndarray]:
        """Closed vertex loops of ∂A (arcs sampled with spacing ≤ ``max_step``)."""
        return _chain_loops(self.oriented_pieces(), max_step)

    def to_text(self, max_step: float = 0.01) -> str:
        lines = []
        for k, loop in enumerate(self.loops(max_step)):
            lines.append(f"# loop {k}")
            lines += [f"{x:.12g} {y:.12g}" for x, y in loop]
        return "\n".join(lines) + "\n"

    def centroid_mask(self, mesh: TriMesh) -> np.ndarray:
        """Triangles of ``mesh`` whose centroid lies in A."""
        if self.kind == "cells" and self.mesh is mesh:
            return np.array(self.mask)
        step = mesh.h if np.isfinite(mesh.h) else 0.01
        return curves.contains(self.oriented_pieces(), mesh.centroids, max_step=0.25 * step)


def _cell_measures(mesh: TriMesh, mask: np.ndarray) -> tuple[float, float, float]:
    area = float(mesh.areas[mask].sum())
    nb = mesh.neighbors
    L = mesh.edge_lengths
    in_nb = np.where(nb >= 0, mask[np.maximum(nb, 0)], False)
    m = mask[:, None]
    trace = float(L[m[:, [0, 0, 0]] & (nb < 0)].sum())
    # each interface edge is seen once from its inside triangle
    interior = float(L[m[:, [0, 0, 0]] & (nb >= 0) & ~in_nb].sum())
    return area, interior, trace


def _chain_loops(pieces, max_step: float) -> list[np.ndarray]:
    polys = [curves.sample(p, max_step) for p in pieces]
    tol = 1e-9
    by_start: dict = {}
    for k, s in enumerate(polys):
        by_start.setdefault(curves._key(s[0], tol), []).append(k)
    used = np.zeros(len(polys), dtype=bool)
    loops = []
    for k0 in range(len(polys)):
        if used[k0]:
            continue
        loop, k = [], k0
        while k is not None and not used[k]:
            used[k] = True
            loop.append(polys[k][:-1])
            nxt = [j for j in by_start.get(curves._key(polys[k][-1], tol), []) if not used[j]]
            k = nxt[0] if nxt else None
        loops.append(np.vstack(loop))
    return loops


def geometric_quotient(A: SubsetRegion, domain: Domain | None = None) -> float:
    """(|∂A∩Ω| + |A|)/|A∩∂Ω|."""
    if A.trace_length <= 0:
        raise ValueError("no boundary trace: |A ∩ ∂Ω| = 0")
    if A.area <= 0:
        raise ValueError("region has no volume")
    return (A.interior_length + A.area) / A.trace_length


# --------------------------------------------------------------------------- seeds
def boundary_caps(domain: Domain, n_directions: int = 16, n_offsets: int = 12) -> list[SubsetRegion]:
    """Exact half-plane caps {d·x ≥ c} ∩ Ω̄.

    For polygons the offsets are midpoints between consecutive vertex
    projections, refined geometrically towards the extreme vertex so that
    thin caps at every supporting edge are included.
    """
    pieces = domain.boundary_pieces()
    out = []
    for k in range(n_directions):
        th = 2 * np.pi * k / n_directions
        d = np.array([np.cos(th), np.sin(th)])
        if domain.is_polygonal:
            proj = np.unique(np.round(domain.vertex_array @ d, 12))
            cuts = list(0.5 * (proj[1:] + proj[:-1]))
            top, below = proj[-1], proj[-2] if len(proj) > 1 else proj[-1] - domain.diameter
            cuts += [top - (top - below) * 0.5**j for j in range(2, 2 + n_offsets)]
            # one cut just above every vertex level, to isolate thin features
            gap = np.min(np.diff(proj)) if len(proj) > 1 else domain.diameter
            cuts += list(proj[:-1] + 1e-3 * gap)
        else:
            c = np.asarray(domain.center[:2]) @ d
            depth = domain.radius * (1 - np.cos(np.linspace(0, np.pi, n_offsets + 2)[1:-1]))
            cuts = list(c + domain.radius - depth)
        for c in sorted(set(float(x) for x in cuts)):
            try:
                cap = curves.clip_halfplane(pieces, d, c)
            except GeometryError:
                continue
            if cap:
                A = SubsetRegion.from_pieces(cap, f"cap d=({d[0]:.4f},{d[1]:.4f}) c={c:.17g}")
                if A.trace_length > 0 and A.area > 0:
                    out.append(A)
    return out


def collars(domain: Domain, fractions=(1e-3, 1e-2, 1e-1)) -> list[SubsetRegion]:
    """Boundary collars {dist(x, ∂Ω) < t} for t = fraction · feature size."""
    out = []
    for f in fractions:
        t = f * domain.feature_size
        if domain.kind == "ball":
            pieces = [curves.circle(domain.center, domain.radius, True),
                      curves.circle(domain.center, domain.radius - t, False, ccw=False)]
        elif domain.kind == "annulus":
            pieces = domain.boundary_pieces() + [
                curves.circle(domain.center, domain.radius - t, False, ccw=False),
                curves.circle(domain.center, domain.inner_radius + t, False)]
        else:
            inner = shapely.Polygon(domain.vertex_array).buffer(-t, join_style="mitre")
            if inner.is_empty or inner.geom_type != "Polygon":
                continue
            ring = np.asarray(inner.exterior.coords)[:-1]
            pieces = domain.boundary_pieces() + curves.polygon_pieces(ring[::-1] if _ccw(ring) else ring, False)
        out.append(SubsetRegion.from_pieces(pieces, f"collar t={t:.6g}"))
    return out


def _ccw(v: np.ndarray) -> bool:
    return np.dot(v[:, 0], np.roll(v[:, 1], -1)) - np.dot(np.roll(v[:, 0], -1), v[:, 1]) > 0


def layer_set(domain: Domain, point, eps: float, normal=None) -> SubsetRegion:
    """Good-point layer {x ∈ Ω : 0 ≤ (x₀ − x)·n̄ ≤ ε²/2} at boundary point x₀."""
    x0 = np.asarray(point, dtype=float)
    n = outward_normal(domain, x0) if normal is None else np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    pieces = curves.clip_halfplane(domain.boundary_pieces(), n, float(n @ x0) - 0.5 * eps**2)
    if not pieces:
        raise GeometryError("empty layer")
    return SubsetRegion.from_pieces(pieces, f"layer eps={eps:g}")


def good_point_layers(domain: Domain, eps_values=(0.05, 0.1, 0.2), n_points: int = 8) -> list[SubsetRegion]:
    if domain.kind not in ("ball", "annulus"):
        return []
    out = []
    for k in range(n_points):
        th = 2 * np.pi * k / n_points
        x0 = np.asarray(domain.center[:2]) + domain.radius * np.array([np.cos(th), np.sin(th)])
        if not good_point_test(curvature(domain, x0), np.inf):
            continue
        for e in eps_values:
            if e * e / 2 < domain.radius:
                out.append(layer_set(domain, x0, e))
    return out


# --------------------------------------------------------------------------- search
@dataclass(frozen=True)
class SearchParams:
    family: str = "cell_annealing"  # or "boundary_caps"
    T0: float = 0.05
    T_end: float = 1e-4
    budget: int = 20000
    seed: int = 0
    n_directions: int = 16
    n_offsets: int = 12
    h: float | None = None

    def __post_init__(self):
        if self.family not in ("cell_annealing", "boundary_caps"):
            raise ValueError(f"unknown search family {self.family!r}")
        if self.budget <= 0:
            raise ValueError("budget must be positive")
        if not self.T0 > self.T_end > 0:
            raise ValueError("temperatures must decrease: T0 > T_end > 0")


@dataclass
class SearchTrace:
    rows: list[tuple[int, float, bool]] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["iteration,quotient,accepted"]
        lines += [f"{i},{q:.12g},{int(a)}" for i, q, a in self.rows]
        return "\n".join(lines) + "\n"


class _CellState:
    """Mutable cell set with O(1) flip updates of (area, interior, trace)."""

    def __init__(self, mesh: TriMesh, mask: np.ndarray, frozen: np.ndarray):
        self.mesh = mesh
        self.mask = mask.copy()
        self.frozen = frozen
        self.nb = mesh.neighbors
        self.L = mesh.edge_lengths
        self.A = mesh.areas
        self.area, self.interior, self.trace = _cell_measures(mesh, self.mask)
        self.members: list[int] = []
        self.pos: dict[int, int] = {}
        for t in range(len(mask)):
            self._refresh(t)

    def _is_frontier(self, t: int) -> bool:
        if self.frozen[t]:
            return False
        for n in self.nb[t]:
            if n < 0 or self.mask[n] != self.mask[t]:
                return True
        return False

    def _refresh(self, t: int) -> None:
        want, have = self._is_frontier(t), t in self.pos
        if want and not have:
            self.pos[t] = len(self.members)
            self.members.append(t)
        elif have and not want:
            i = self.pos.pop(t)
            last = self.members.pop()
            if last != t:
                self.members[i] = last
                self.pos[last] = i

    def delta(self, t: int) -> tuple[float, float, float]:
        s = -1.0 if self.mask[t] else 1.0
        da, di, dt = s * self.A[t], 0.0, 0.0
        for n, L in zip(self.nb[t], self.L[t]):
            if n < 0:
                dt += s * L
            elif self.mask[n] == self.mask[t]:
                di += L
            else:
                di -= L
        return da, di, dt

    def flip(self, t: int, d) -> None:
        self.mask[t] = ~self.mask[t]
        self.area += d[0]
        self.interior += d[1]
        self.trace += d[2]
        self._refresh(t)
        for n in self.nb[t]:
            if n >= 0:
                self._refresh(int(n))

    def quotient(self) -> float:
        return (self.interior + self.area) / self.trace if self.trace > 0 else np.inf


def _anneal(mesh: TriMesh, start: np.ndarray, frozen: np.ndarray, params: SearchParams,
            rng: np.random.Generator, band: tuple[float, float] | None, trace: SearchTrace,
            it0: int = 0):
    """Metropolis single-cell flips on the relative change of the quotient."""
    st = _CellState(mesh, start, frozen)
    total = float(mesh.areas.sum())
    q = st.quotient()
    best_q, best_mask = q, st.mask.copy()
    ratio = params.T_end / params.T0
    for k in range(params.budget):
        if not st.members:
            break
        T = params.T0 * ratio ** (k / max(1, params.budget - 1))
        t = st.members[int(rng.integers(len(st.members)))]
        d = st.delta(t)
        area, tr = st.area + d[0], st.trace + d[2]
        accepted = False
        if area > 0 and tr > 1e-14:
            if band is None or band[0] <= total - area <= band[1]:
                q_new = (st.interior + d[1] + area) / tr
                dq = (q_new - q) / q
                if dq <= 0 or rng.random() < exp(-dq / T):
                    st.flip(t, d)
                    q, accepted = q_new, True
                    if q < best_q:
                        best_q, best_mask = q, st.mask.copy()
        if accepted or k % 100 == 0:
            trace.rows.append((it0 + k, q, accepted))
    return best_q, best_mask


def _removal_blob(mesh: TriMesh, alpha: float, allowed: np.ndarray, center) -> np.ndarray:
    """Cells nearest ``center`` whose total area is closest to ``alpha``."""
    order = np.argsort(np.linalg.norm(mesh.centroids - np.asarray(center), axis=1), kind="stable")
    order = order[allowed[order]]
    acc = np.cumsum(mesh.areas[order])
    k = int(np.argmin(np.abs(acc - alpha)))
    out = np.zeros(len(mesh.triangles), dtype=bool)
    out[order[:k + 1]] = True
    return out


def eigenset_search(domain: Domain, params: SearchParams | None = None, hole: SubsetRegion | None = None,
                    trapped_volume: float | None = None) -> EigenResult:
    """Upper bound for λ₁ (λ_{1,A} with a hole, λ̃₁(α) with a trapped volume) by set search.

    Exact seeds (whole domain, collars, caps, good-point layers) are evaluated
    first when no constraint is present; ``cell_annealing`` then improves the
    best cell-representable candidate on a triangulation.
    """
    params = params or SearchParams()
    rng = np.random.default_rng(params.seed)
    trace = SearchTrace()
    constrained = hole is not None or trapped_volume is not None
    best_q, best_region, source = np.inf, None, ""

    seeds: list[SubsetRegion] = []
    if domain.dim != 2:
        raise GeometryError("set search is implemented for N = 2 only")
    if not constrained:
        seeds = [SubsetRegion.whole(domain)] + collars(domain)
        seeds += boundary_caps(domain, params.n_directions, params.n_offsets)
        seeds += good_point_layers(domain)
        for k, A in enumerate(seeds):
            q = geometric_quotient(A)
            trace.rows.append((k, q, True))
            if q < best_q:
                best_q, best_region, source = q, A, A.label
    it0 = len(trace.rows)

    run_cells = params.family == "cell_annealing" or constrained
    if run_cells:
        h = params.h or 0.05 * domain.feature_size * 2
        h = min(h, domain.feature_size)
        mesh = hole.mesh if (hole is not None and hole.kind == "cells") else triangulate(domain, h)
        ntri = len(mesh.triangles)
        frozen = hole.centroid_mask(mesh) if hole is not None else np.zeros(ntri, dtype=bool)
        boundary_tri = np.any(mesh.neighbors < 0, axis=1)
        if np.all(frozen[boundary_tri]):
            raise InfeasibleSearch("the hole covers the whole boundary")
        band = None
        starts = []
        if trapped_volume is not None:
            total = float(mesh.areas.sum())
            if not 0 < trapped_volume < total:
                raise InfeasibleSearch("trapped volume must lie in (0, |Ω|)")
            tol = float(mesh.areas.max())
            band = (trapped_volume - tol, trapped_volume + tol)
            removed = _removal_blob(mesh, trapped_volume, ~boundary_tri | frozen,
                                    mesh.centroids.mean(axis=0))
            starts.append((~removed & ~frozen, "whole minus central blob"))
        else:
            starts.append((~frozen, "whole minus hole"))
            if best_region is not None and best_region.kind == "pieces":
                m = best_region.centroid_mask(mesh) & ~frozen
                if m.any():
                    starts.append((m, f"cells of {best_region.label}"))
            if hole is not None:
                for A in collars(domain) + boundary_caps(domain, params.n_directions, params.n_offsets):
                    m = A.centroid_mask(mesh) & ~frozen
                    if m.any() and _cell_measures(mesh, m)[2] > 0:
                        starts.append((m, f"cells of {A.label}"))
                # anneal from the best few cell seeds only
                starts.sort(key=lambda s: _quotient_of(mesh, s[0]))
                starts = starts[:3]
        for mask, label in starts:
            a, _, tr = _cell_measures(mesh, mask)
            if tr <= 0 or a <= 0:
                continue
            if band is not None and not band[0] <= float(mesh.areas.sum()) - a <= band[1]:
                continue
            q, m = _anneal(mesh, mask, frozen, params, rng, band, trace, it0)
            it0 = len(trace.rows) and trace.rows[-1][0] + 1
            if q < best_q:
                best_q, best_region, source = q, SubsetRegion.from_cells(mesh, m, f"annealed from {label}"), label
    if best_region is None or not np.isfinite(best_q):
        raise InfeasibleSearch("no feasible candidate set")
    diag = {"best_source": source, "family": params.family, "upper_bound": True,
            "area_fraction": best_region.area / measures(domain)[0]}
    if trapped_volume is not None:
        diag["trapped_volume_error"] = abs(float(best_region.mesh.areas.sum()) - best_region.area
                                           - trapped_volume)
    return EigenResult(best_q, None, None, len(trace.rows), [], method="isoperimetric",
                       diagnostics=diag, region=best_region, history=[r[1] for r in trace.rows],
                       search_trace=trace)


def _quotient_of(mesh: TriMesh, mask: np.ndarray) -> float:
    a, i, t = _cell_measures(mesh, mask)
    return (i + a) / t if t > 0 else np.inf


# --------------------------------------------------------------------------- holes
def hole_placement_bound(domain: Domain, good_point, hole_radius: float, alpha: float,
                         kappa=None, normal=None) -> float:
    """Upper bound for λ₁(α): the layer quotient at a good point, with the hole kept off B(x, r).

    The layer uses ε = r/2 and lies inside B(x, r); any hole of volume α
    placed in Ω ∖ B(x, r) leaves it admissible. ``kappa``/``normal`` override
    the curvature and normal for polygons approximating a smooth boundary.
    """
    x0 = np.asarray(good_point, dtype=float)
    k = np.asarray(curvature(domain, x0) if kappa is None else kappa, dtype=float).ravel()
    if not good_point_test(k, np.inf):
        raise NotAGoodPoint(f"not a good point: curvatures {k.tolist()} (need all > 0 and sum > 1)")
    r = float(hole_radius)
    vol = measures(domain)[0]
    if not (r > 0 and 0 < alpha < vol):
        raise InfeasibleSearch("need r > 0 and 0 < alpha < |Ω|")
    ball = shapely.Point(*x0).buffer(r, quad_segs=256)
    near = domain.as_shapely().intersection(ball).area
    if near > vol - alpha:
        raise InfeasibleSearch(f"B(x, r) ∩ Ω has volume {near:.6g} > |Ω| − α = {vol - alpha:.6g}")
    if normal is None and domain.is_polygonal:
        v = domain.vertex_array
        hit = np.nonzero(np.linalg.norm(v - x0, axis=1) <= 1e-9 * domain.diameter)[0]
        if hit.size:
            i = int(hit[0])
            e_in, e_out = v[i] - v[i - 1], v[(i + 1) % len(v)] - v[i]
            n_in = np.array([e_in[1], -e_in[0]]) / np.linalg.norm(e_in)
            n_out = np.array([e_out[1], -e_out[0]]) / np.linalg.norm(e_out)
            normal = n_in + n_out
    eps = 0.5 * r
    A = layer_set(domain, x0, eps, normal)
    pts = np.vstack([curves.sample(p, eps / 20) for p in A.pieces])
    if np.max(np.linalg.norm(pts - x0, axis=1)) > r:
        raise InfeasibleSearch("the layer does not fit inside B(x, r); decrease r")
    q = geometric_quotient(A)
    if q >= 1:
        warnings.warn(f"layer quotient {q:.8f} is not below 1", RuntimeWarning)
    return q


@dataclass
class HoleGapReport:
    alpha: float
    lambda1_alpha_upper: float      # min over searched hole placements of λ_{1,A}
    lambda1_tilde_alpha: float      # set search with |Ω ∖ C| = α
    gap: float
    best_hole_center: tuple[float, float]

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "lambda1_alpha_upper": self.lambda1_alpha_upper,
                "lambda1_tilde_alpha": self.lambda1_tilde_alpha, "gap": self.gap,
                "best_hole_center": list(self.best_hole_center), "upper_bounds": True}


def disk_hole(mesh: TriMesh, center, alpha: float) -> SubsetRegion:
    """Cells nearest ``center`` with total area closest to α."""
    allowed = np.ones(len(mesh.triangles), dtype=bool)
    return SubsetRegion.from_cells(mesh, _removal_blob(mesh, alpha, allowed, center), "hole")


def hole_gap_report(domain: Domain, alpha: float, params: SearchParams | None = None,
                    centers=None) -> HoleGapReport:
    """Compare λ₁(α) (best relocated hole, upper bound) with λ̃₁(α)."""
    params = params or SearchParams()
    h = min(params.h or 0.1 * domain.feature_size, domain.feature_size)
    mesh = triangulate(domain, h)
    if centers is None:
        c = mesh.centroids.mean(axis=0)
        centers = [tuple(c)]
        inner = mesh.centroids[~np.any(mesh.neighbors < 0, axis=1)]
        far = inner[np.argsort(np.linalg.norm(inner - c, axis=1))[-1]]
        centers.append(tuple(0.5 * (c + far)))
    best, best_c = np.inf, None
    for c in centers:
        A = disk_hole(mesh, c, alpha)
        r = eigenset_search(domain, SearchParams(**{**params.__dict__, "h": h}), hole=A)
        if r.lam < best:
            best, best_c = r.lam, c
    tilde = eigenset_search(domain, SearchParams(**{**params.__dict__, "h": h}), trapped_volume=alpha).lam
    return HoleGapReport(alpha, best, tilde, tilde - best, (float(best_c[0]), float(best_c[1])))
