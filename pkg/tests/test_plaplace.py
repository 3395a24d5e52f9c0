import numpy as np
import pytest

from bvtrace.errors import ConvergenceError, TraceCollapse
from bvtrace.geometry import Domain
from bvtrace.isoperimetric import disk_hole
from bvtrace.mesh import triangulate
from bvtrace.plaplace import (EigenResult, FEField, SolverParams, continuation_to_one, extrapolate_linear,
                              rayleigh_quotient, sigma_diagnostics, solve_lambda_p)

from conftest import bessel_i


@pytest.fixture(scope="module")
def disk05():
    return triangulate(Domain.ball(1.0), 0.05)


def test_params_validation():
    with pytest.raises(ValueError):
        SolverParams(p=1.0)
    with pytest.raises(ValueError):
        SolverParams(p=2.0, tol=0.0)


def test_bessel_series_oracle_sanity():
    # I1(1)/I0(1) to 10 digits
    assert bessel_i(1, 1.0) / bessel_i(0, 1.0) == pytest.approx(0.4463899658965, rel=1e-10)


@pytest.mark.parametrize("R,h", [(1.0, 0.05), (2.0, 0.05)])
def test_p2_matches_bessel_oracle(R, h):
    m = triangulate(Domain.ball(R), h)
    res = solve_lambda_p(m, SolverParams(p=2.0))
    oracle = bessel_i(1, R) / bessel_i(0, R)
    assert abs(res.lam - oracle) / oracle < 0.01
    assert res.normalization_error < 1e-12
    assert np.all(res.field.values >= 0)
    assert res.method == "plaplace"


def test_mesh_refinement_change_below_one_percent(disk_mesh_coarse, disk05):
    a = solve_lambda_p(disk_mesh_coarse, SolverParams(p=2.0)).lam
    b = solve_lambda_p(disk05, SolverParams(p=2.0)).lam
    assert abs(a - b) / b < 0.01


def test_scale_invariance(disk_mesh_coarse):
    rng = np.random.default_rng(3)
    for p in (1.3, 2.0, 3.0):
        u = rng.normal(size=disk_mesh_coarse.n_vertices)
        q = rayleigh_quotient(disk_mesh_coarse, u, p)
        for c in (-2.5, 1e-3, 7.0):
            assert rayleigh_quotient(disk_mesh_coarse, c * u, p) == pytest.approx(q, rel=1e-12)


@pytest.mark.parametrize("p", [2.0, 1.5, 1.2])
def test_monotone_descent(disk_mesh_coarse, p):
    res = solve_lambda_p(disk_mesh_coarse, SolverParams(p=p, seed=4))
    h = np.array(res.history)
    assert np.all(np.diff(h) <= 1e-9 * h[:-1])


@pytest.mark.parametrize("p", [2.0, 1.5])
def test_hole_monotonicity(disk_mesh_coarse, p):
    m = disk_mesh_coarse
    free = solve_lambda_p(m, SolverParams(p=p)).lam
    lams = [free]
    for area in (0.05, 0.2, 0.6):
        hole = disk_hole(m, (0.1, 0.0), area)
        res = solve_lambda_p(m, SolverParams(p=p), hole=hole)
        assert np.all(res.field.values[np.unique(m.triangles[hole.cells])] == 0)
        lams.append(res.lam)
    assert all(b >= a - 1e-6 for a, b in zip(lams, lams[1:]))
    assert lams[1] > free


def test_trace_collapse_when_hole_covers_boundary(disk_mesh_coarse):
    m = disk_mesh_coarse
    with pytest.raises(TraceCollapse):
        solve_lambda_p(m, SolverParams(p=2.0), hole=np.arange(len(m.triangles)))


def test_non_convergence_carries_best(disk_mesh_coarse):
    with pytest.raises(ConvergenceError) as e:
        solve_lambda_p(disk_mesh_coarse, SolverParams(p=1.5, max_iter=1, tol=1e-15))
    assert isinstance(e.value.best, EigenResult)


def test_sigma_of_constant_field(disk_mesh_coarse):
    m = disk_mesh_coarse
    res = EigenResult(1.0, FEField(m, np.full(m.n_vertices, 0.3)), 1.5, 0, [])
    assert sigma_diagnostics(res, 1.5)["max_sigma"] == 0.0


def test_euler_residual_p2(disk_mesh_coarse, disk05):
    for m in (disk_mesh_coarse, disk05):
        d = solve_lambda_p(m, SolverParams(p=2.0)).diagnostics
        assert d["euler_residual"] <= 0.02
        assert d["flux_gap"] <= 1e-6


def test_extrapolate_linear_exact_on_line():
    lam1, c = extrapolate_linear([2, 1.5, 1.25, 1.1], [0.9, 0.7, 0.6, 0.54])
    assert lam1 == pytest.approx(0.5)
    assert c == pytest.approx(0.4)


def test_continuation_schedule_validation(disk_mesh_coarse):
    for bad in ([2, 1.5, 1.5], [2, 1.0, 0.9], [2, 1.5]):
        with pytest.raises(ValueError):
            continuation_to_one(disk_mesh_coarse, bad)


def test_continuation_unit_disk_coarse(disk_mesh_coarse):
    c = continuation_to_one(disk_mesh_coarse, [2.0, 1.5, 1.25, 1.1, 1.05])
    assert abs(c.extrapolated_lambda1 - 0.5) / 0.5 < 0.02
    assert c.model.startswith("linear")
    assert c.to_dict()["stages"][0]["p"] == 2.0


def test_continuation_disk_radius_two():
    m = triangulate(Domain.ball(2.0), 0.1)
    c = continuation_to_one(m, [2.0, 1.5, 1.25, 1.1, 1.05])
    assert abs(c.extrapolated_lambda1 - 1.0) < 0.03


def test_continuation_square_below_universal_bound():
    m = triangulate(Domain.unit_square(), 0.05)
    c = continuation_to_one(m, [2.0, 1.5, 1.25, 1.1, 1.05])
    assert c.extrapolated_lambda1 <= 1.03


def test_sigma_bounded_at_small_p(disk_mesh_coarse):
    c = continuation_to_one(disk_mesh_coarse, [2.0, 1.5, 1.25, 1.1])
    assert c.results[-1].diagnostics["max_sigma"] <= 1.05


def test_result_serialisation(disk_mesh_coarse):
    d = solve_lambda_p(disk_mesh_coarse, SolverParams(p=2.0)).to_dict()
    assert set(d) == {"method", "p", "lambda", "iterations", "residuals", "normalization_error", "diagnostics"}
    assert set(d["diagnostics"]) >= {"max_sigma", "euler_residual", "flux_gap"}
