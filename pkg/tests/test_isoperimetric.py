import math

import numpy as np
import pytest
import shapely
from hypothesis import given, settings
from hypothesis import strategies as st

from bvtrace import curves, svg
from bvtrace.errors import GeometryError, InfeasibleSearch, NotAGoodPoint
from bvtrace.geometry import Domain, measures
from bvtrace.isoperimetric import (SearchParams, SubsetRegion, boundary_caps, collars, disk_hole,
                                   eigenset_search, geometric_quotient, hole_gap_report,
                                   hole_placement_bound, layer_set)
from bvtrace.mesh import triangulate


def test_quotient_examples():
    assert geometric_quotient(SubsetRegion.whole(Domain.ball(1.0))) == pytest.approx(0.5, abs=1e-14)
    assert geometric_quotient(SubsetRegion.whole(Domain.unit_square())) == pytest.approx(0.25, abs=1e-15)
    d = Domain.square_with_appendage(0.01, 0.5)
    A = SubsetRegion.from_polygon([(1, 0), (1.5, 0), (1.5, 0.01), (1, 0.01)], d)
    assert A.interior_length == pytest.approx(0.01)
    assert A.trace_length == pytest.approx(1.01)
    assert geometric_quotient(A) == pytest.approx((0.01 + 0.005) / 1.01, rel=1e-12)
    assert geometric_quotient(A) == pytest.approx(0.0148515, abs=1e-7)


def test_no_trace_error():
    d = Domain.unit_square()
    A = SubsetRegion.from_polygon([(0.2, 0.2), (0.4, 0.2), (0.3, 0.4)], d)
    with pytest.raises(ValueError, match="no boundary trace"):
        geometric_quotient(A)


def test_from_polygon_rejects_outside():
    with pytest.raises(GeometryError):
        SubsetRegion.from_polygon([(0.5, 0.5), (1.5, 0.5), (0.5, 0.9)], Domain.unit_square())


def _rigid(v, th, b):
    Q = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    return np.asarray(v) @ Q.T + b


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(-3, 3), st.floats(-3, 3))
def test_rigid_motion_invariance(th, bx, by):
    omega = [(0, 0), (2, 0), (2.5, 1), (1, 2), (-0.5, 1)]
    A = [(0, 0), (2, 0), (1.5, 0.8), (0.3, 0.6)]
    q0 = geometric_quotient(SubsetRegion.from_polygon(A, Domain.polygon(omega)))
    d1 = Domain.polygon(_rigid(omega, th, (bx, by)))
    q1 = geometric_quotient(SubsetRegion.from_polygon(_rigid(A, th, (bx, by)), d1))
    assert q1 == pytest.approx(q0, abs=1e-12)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_dilation_monotonicity(seed):
    rng = np.random.default_rng(seed)
    hull = shapely.MultiPoint(rng.uniform(0, 1, size=(12, 2))).convex_hull
    v = np.asarray(hull.exterior.coords)[:-1]
    qs = []
    for t in (0.5, 1.0, 2.0):
        d = Domain.polygon(t * v)
        cap = curves.clip_halfplane(d.boundary_pieces(), (1.0, 0.3), float(t * (v @ [1.0, 0.3]).mean()))
        qs.append(geometric_quotient(SubsetRegion.from_pieces(cap)))
    assert qs[0] < qs[1] < qs[2]


def test_caps_match_closed_form_on_disk():
    caps = boundary_caps(Domain.ball(1.0), n_directions=4, n_offsets=5)
    for A in caps[:5]:
        th = math.acos(max(-1, min(1, float(A.label.split("c=")[1]))))
        assert A.area == pytest.approx(th - math.sin(th) * math.cos(th), rel=1e-12)
        assert A.trace_length == pytest.approx(2 * th, rel=1e-12)


def test_collar_quotients_tend_to_one():
    qs = [geometric_quotient(A) for A in collars(Domain.ball(3.0))]
    assert qs[0] < qs[1] < qs[2]
    t = 3e-3
    assert qs[0] == pytest.approx((2 * math.pi * (3 - t) + math.pi * (9 - (3 - t) ** 2)) / (6 * math.pi))
    sq = collars(Domain.unit_square(), (0.1,))[0]
    assert sq.area == pytest.approx(1 - (1 - 2 * 0.05) ** 2)


def test_cell_measures_on_square():
    m = triangulate(Domain.unit_square(), 0.1)
    A = SubsetRegion.from_cells(m, np.arange(len(m.triangles)))
    assert geometric_quotient(A) == pytest.approx(0.25, abs=1e-13)
    assert A.interior_length == 0
    half = SubsetRegion.from_cells(m, m.centroids[:, 0] < 0.5)
    assert half.area + SubsetRegion.from_cells(m, m.centroids[:, 0] >= 0.5).area == pytest.approx(1.0)
    assert half.interior_length > 0


def test_search_disk():
    r = eigenset_search(Domain.ball(1.0), SearchParams(budget=3000, h=0.1))
    assert r.lam <= 0.505 and r.method == "isoperimetric"
    assert r.region.area >= 0.95 * math.pi
    assert r.lam <= geometric_quotient(SubsetRegion.whole(Domain.ball(1.0))) + 1e-12


def test_search_large_disk_collar():
    r = eigenset_search(Domain.ball(3.0), SearchParams(family="boundary_caps"))
    assert r.lam <= 1.02


@pytest.mark.parametrize("delta,bound", [(0.01, 0.02), (0.001, 0.003)])
def test_search_appendage(delta, bound):
    d = Domain.square_with_appendage(delta, 0.5)
    r = eigenset_search(d, SearchParams(budget=2000))
    assert r.lam <= bound
    assert r.lam <= geometric_quotient(SubsetRegion.whole(d))


def test_search_rejects_bad_params():
    with pytest.raises(ValueError):
        SearchParams(T0=1e-4, T_end=1e-2)
    with pytest.raises(ValueError):
        SearchParams(budget=0)
    with pytest.raises(ValueError):
        SearchParams(family="genetic")


def test_hole_monotonicity_nested():
    d = Domain.ball(1.0)
    m = triangulate(d, 0.1)
    sp = SearchParams(budget=1500, h=0.1, seed=7)
    lams = []
    for a in (0.05, 0.2, 0.5):
        hole = disk_hole(m, (0.0, 0.0), a)
        r = eigenset_search(d, sp, hole=hole)
        assert not np.any(r.region.mask & hole.mask)
        lams.append(r.lam)
    assert lams[0] <= lams[1] <= lams[2]
    free = eigenset_search(d, sp).lam
    assert free <= lams[0]


def test_hole_covering_boundary_is_infeasible():
    m = triangulate(Domain.ball(1.0), 0.2)
    with pytest.raises(InfeasibleSearch):
        eigenset_search(Domain.ball(1.0), SearchParams(budget=100, h=0.2),
                        hole=SubsetRegion.from_cells(m, np.arange(len(m.triangles))))


def test_trapped_volume_band():
    d = Domain.ball(1.0)
    alpha = 0.3
    r = eigenset_search(d, SearchParams(budget=2000, h=0.1), trapped_volume=alpha)
    m = r.region.mesh
    assert abs(m.areas.sum() - r.region.area - alpha) <= m.areas.max()
    with pytest.raises(InfeasibleSearch):
        eigenset_search(d, SearchParams(budget=10, h=0.1), trapped_volume=10.0)


def test_hole_placement_bound():
    with pytest.raises(NotAGoodPoint):
        hole_placement_bound(Domain.ball(1.0), (1.0, 0.0), 0.2, 0.1)
    d = Domain.ball(0.5)
    q = hole_placement_bound(d, (0.5, 0.0), 0.2, 0.1 * measures(d)[0])
    assert q < 1
    with pytest.raises(InfeasibleSearch):
        hole_placement_bound(d, (0.5, 0.0), 0.2, 0.95 * measures(d)[0])


def test_hole_placement_bound_on_ellipse_polygon():
    # ellipse x²/9 + y² = 1 has curvature a/b² = 3 at (3, 0)
    th = np.linspace(0, 2 * np.pi, 721)[:-1]
    d = Domain.polygon(np.column_stack([3 * np.cos(th), np.sin(th)]))
    q = hole_placement_bound(d, (3.0, 0.0), 0.2, 0.05, kappa=[3.0])
    assert q < 1


def test_layer_set_is_thin():
    A = layer_set(Domain.ball(0.5), (0.5, 0.0), 0.1)
    h = 0.1**2 / 2
    assert A.area == pytest.approx(0.25 * (math.acos(1 - h / 0.5) - (1 - h / 0.5) * math.sqrt(1 - (1 - h / 0.5) ** 2)) * 1,
                                   rel=1e-9)


def test_hole_gap_report_orders_bounds():
    rep = hole_gap_report(Domain.ball(1.0), 0.3, SearchParams(budget=800, h=0.1))
    assert rep.lambda1_alpha_upper <= rep.lambda1_tilde_alpha + 1e-12
    assert rep.to_dict()["upper_bounds"]


def test_exports_are_deterministic():
    d = Domain.square_with_appendage(0.05, 0.5)
    A = SubsetRegion.from_polygon([(1, 0), (1.5, 0), (1.5, 0.05), (1, 0.05)], d)
    txt = A.to_text()
    assert txt.startswith("# loop 0\n")
    assert len(A.loops(1.0)) == 1 and len(A.loops(1.0)[0]) == 4
    s1, s2 = svg.region_overlay(d, A), svg.region_overlay(d, A)
    assert s1 == s2 and 'width="800"' in s1
    r = eigenset_search(Domain.ball(1.0), SearchParams(budget=300, h=0.2))
    csv = r.search_trace.to_csv()
    assert csv.splitlines()[0] == "iteration,quotient,accepted"
