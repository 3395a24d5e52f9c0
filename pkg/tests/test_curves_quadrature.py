import math

import numpy as np
import pytest

from bvtrace import curves
from bvtrace.errors import QuadratureError
from bvtrace.quadrature import adaptive_gauss, adaptive_gauss_2d, circle_rule, sphere_rule


def test_adaptive_gauss_smooth_and_error():
    assert adaptive_gauss(np.exp, 0.0, 1.0) == pytest.approx(math.e - 1, rel=1e-12)
    with pytest.raises(QuadratureError) as e:
        adaptive_gauss(lambda x: np.sign(x - 1 / 3), 0.0, 1.0, rtol=1e-14, max_level=3)
    assert e.value.estimate is not None


def test_adaptive_gauss_2d():
    v = adaptive_gauss_2d(lambda x, y: x * x * np.cos(y), (0, 1), (0, math.pi / 2), rtol=1e-12)
    assert v == pytest.approx(1 / 3, rel=1e-12)


def test_circle_and_sphere_rules():
    x, n, w = circle_rule(32, 2.0)
    assert w.sum() == pytest.approx(4 * math.pi)
    assert (w @ x[:, 0] ** 2) == pytest.approx(8 * math.pi)
    x, n, w = sphere_rule(16, 2.0)
    assert w.sum() == pytest.approx(16 * math.pi)
    assert (w @ x[:, 2] ** 2) == pytest.approx(16 * math.pi * 4 / 3)


def test_arc_area_and_length():
    c = curves.circle((0.3, -0.2), 1.5, True)
    assert c.green_area == pytest.approx(math.pi * 2.25)
    assert c.length == pytest.approx(3 * math.pi)
    assert curves.circle((0, 0), 1, True, ccw=False).green_area == pytest.approx(-math.pi)


def test_clip_disk_halfplane_matches_segment_formula():
    R, c = 1.0, 0.6
    cap = curves.clip_halfplane([curves.circle((0, 0), R, True)], (1, 0), c)
    th = math.acos(c / R)
    assert curves.total_area(cap) == pytest.approx(R * R * (th - math.sin(th) * math.cos(th)), rel=1e-13)
    assert curves.total_length(cap, True) == pytest.approx(2 * R * th)
    assert curves.total_length(cap, False) == pytest.approx(2 * R * math.sin(th))


def test_clip_nonconvex_polygon_two_components():
    # U shape cut horizontally gives two prongs
    v = [(0, 0), (3, 0), (3, 2), (2, 2), (2, 1), (1, 1), (1, 2), (0, 2)]
    cap = curves.clip_halfplane(curves.polygon_pieces(v, True), (0, 1), 1.5)
    assert curves.total_area(cap) == pytest.approx(1.0)
    assert curves.total_length(cap, False) == pytest.approx(2.0)


def test_piece_quadrature_divergence_theorem():
    pieces = curves.polygon_pieces([(0, 0), (2, 0), (2, 1), (0, 1)], True)
    flux = 0.0
    for p in pieces:
        x, n, w = curves.piece_quadrature(p)
        flux += w @ np.einsum("ni,ni->n", x, n)
    assert flux == pytest.approx(2 * 2.0)


def test_contains():
    inside = curves.contains([curves.circle((0, 0), 1, True)], np.array([[0, 0], [0.99, 0], [1.01, 0]]), 0.01)
    assert inside.tolist() == [True, True, False]
