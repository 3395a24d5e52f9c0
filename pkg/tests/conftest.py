from __future__ import annotations

import math

import pytest


def bessel_i(nu: int, x: float, terms: int = 60) -> float:
    """Modified Bessel function I_nu by its power series (independent of scipy)."""
    return sum((x / 2) ** (2 * k + nu) / (math.factorial(k) * math.factorial(k + nu)) for k in range(terms))


@pytest.fixture(scope="session")
def disk_mesh_coarse():
    from bvtrace.geometry import Domain
    from bvtrace.mesh import triangulate

    return triangulate(Domain.ball(1.0), 0.1)
