import math

import numpy as np
import pytest
import shapely
from hypothesis import given, settings
from hypothesis import strategies as st

from bvtrace.errors import GeometryError
from bvtrace.geometry import (BoundaryPatch, Domain, curvature, good_point_test, measures,
                              outward_normal, unit_ball_volume, unit_sphere_area)


def test_unit_disk_measures():
    vol, area = measures(Domain.ball(1.0))
    assert vol == pytest.approx(math.pi, rel=1e-15)
    assert area == pytest.approx(2 * math.pi, rel=1e-15)


def test_unit_square_measures():
    assert measures(Domain.unit_square()) == (1.0, 4.0)


def test_appendage_measures_against_polygon_oracle():
    d = Domain.square_with_appendage(0.01, 0.5)
    vol, per = measures(d)
    oracle = shapely.Polygon(d.vertex_array)
    assert vol == pytest.approx(1.005, abs=1e-14)
    assert per == pytest.approx(5.0, abs=1e-14)
    assert vol == pytest.approx(oracle.area, abs=1e-14)
    assert per == pytest.approx(oracle.length, abs=1e-14)


def test_ball_measures_3d_and_annulus():
    vol, area = measures(Domain.ball(2.0, 3))
    assert vol == pytest.approx(4 / 3 * math.pi * 8)
    assert area == pytest.approx(4 * math.pi * 4)
    vol, area = measures(Domain.annulus(1.0, 4.0))
    assert vol / area == pytest.approx(1.5)


def test_unit_sphere_constants():
    assert unit_sphere_area(1) == pytest.approx(2.0, abs=1e-14)
    assert unit_ball_volume(1) == pytest.approx(2.0)
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_sphere_area(2) == pytest.approx(2 * math.pi)
    assert unit_sphere_area(3) == pytest.approx(4 * math.pi)


@pytest.mark.parametrize("t", [0.5, 2.0])
def test_dilation_scaling(t):
    for d in (Domain.ball(1.3), Domain.ball(0.7, 3), Domain.polygon([(0, 0), (2, 0), (1, 1.5), (0.2, 1)])):
        v0, a0 = measures(d)
        v1, a1 = measures(d.scaled(t))
        assert v1 == pytest.approx(t ** d.dim * v0, rel=1e-13)
        assert a1 == pytest.approx(t ** (d.dim - 1) * a0, rel=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0, 2 * math.pi))
def test_polygon_measures_rigid_invariance(dx, dy, th):
    v = np.array([(0, 0), (1.5, 0.2), (1.1, 1.3), (0.3, 0.9)])
    Q = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    w = v @ Q.T + [dx, dy]
    a, b = measures(Domain.polygon(v)), measures(Domain.polygon(w))
    assert b[0] == pytest.approx(a[0], abs=1e-12)
    assert b[1] == pytest.approx(a[1], abs=1e-12)


def test_polygon_orientation_and_simplicity():
    d = Domain.polygon([(0, 0), (0, 1), (1, 1), (1, 0)])
    assert measures(d)[0] == pytest.approx(1.0)
    with pytest.raises(GeometryError):
        Domain.polygon([(0, 0), (1, 1), (1, 0), (0, 1)])


def test_domain_invariants():
    with pytest.raises(GeometryError):
        Domain.annulus(2.0, 1.0)
    with pytest.raises(GeometryError):
        Domain.ball(1.0, 1)
    with pytest.raises(GeometryError):
        Domain("polygon", dim=3, vertices=((0, 0), (1, 0), (0, 1)))


def test_curvature_examples():
    assert curvature(Domain.ball(2.0), np.array([0.0, 2.0])) == pytest.approx([0.5])
    assert curvature(Domain.ball(2.0, 3), np.array([0.0, 0.0, 2.0])) == pytest.approx([0.5, 0.5])
    assert curvature(Domain.unit_square(), np.array([0.5, 0.0])) == pytest.approx([0.0])
    assert curvature(Domain.annulus(0.5, 1.0), np.array([0.5, 0.0])) == pytest.approx([-2.0])
    with pytest.raises(GeometryError):
        curvature(Domain.unit_square(), np.array([1.0, 1.0]))
    with pytest.raises(GeometryError):
        curvature(Domain.ball(1.0), np.array([0.2, 0.0]))


def test_outward_normal():
    assert outward_normal(Domain.unit_square(), [0.5, 0.0]) == pytest.approx([0, -1])
    assert outward_normal(Domain.annulus(0.5, 1.0), [0.0, 0.5]) == pytest.approx([0, -1])


def test_good_point_examples():
    assert good_point_test([2.0], 3)
    assert not good_point_test([0.4, 0.4], 3)
    assert not good_point_test([2.0, -0.1], 3)
    assert not good_point_test([2.0], 2)


def test_boundary_patch():
    p = BoundaryPatch((1.0, 3.0))
    assert p.dim == 3
    assert p.rho(np.array([1.0, 1.0]))[0] == pytest.approx(2.0)


def test_boundary_distance_and_contains():
    d = Domain.square_with_appendage(0.1, 0.5)
    assert d.contains([[1.2, 0.05], [1.2, 0.5]]).tolist() == [True, False]
    assert d.boundary_distance([[0.5, 0.5]])[0] == pytest.approx(0.5)
