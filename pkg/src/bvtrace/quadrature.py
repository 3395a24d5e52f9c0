"""Gauss-type quadrature rules: adaptive 1-D/2-D Gauss–Legendre, circle and sphere rules."""

from __future__ import annotations

from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import QuadratureError


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the n-point rule on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def composite_nodes(a: float, b: float, cells: int, order: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights of a composite Gauss–Legendre rule with ``cells`` equal cells."""
    x, w = gauss_legendre(order)
    edges = np.linspace(a, b, cells + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def adaptive_gauss(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    rtol: float = 1e-10,
    order: int = 8,
    max_level: int = 14,
    atol: float = 0.0,
) -> float:
    """Integrate ``f`` over [a, b] by dyadic refinement of a composite rule.

    ``f`` is vectorised. Refinement doubles the cell count until two successive
    levels agree to ``rtol`` (relative) or ``atol``.
    """
    prev = None
    for level in range(max_level + 1):
        x, w = composite_nodes(a, b, 2**level, order)
        val = float(np.dot(w, f(x)))
        if prev is not None and abs(val - prev) <= max(rtol * abs(val), atol):
            return val
        prev = val
    raise QuadratureError("adaptive Gauss–Legendre did not converge", prev)


def adaptive_gauss_2d(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    xlim: tuple[float, float],
    ylim: tuple[float, float],
    rtol: float = 1e-10,
    order: int = 8,
    max_level: int = 9,
    atol: float = 0.0,
) -> float:
    """Tensorised Gauss–Legendre over a rectangle with uniform dyadic subdivision."""
    prev = None
    for level in range(max_level + 1):
        x, wx = composite_nodes(*xlim, 2**level, order)
        y, wy = composite_nodes(*ylim, 2**level, order)
        X, Y = np.meshgrid(x, y, indexing="ij")
        val = float(wx @ f(X, Y) @ wy)
        if prev is not None and abs(val - prev) <= max(rtol * abs(val), atol):
            return val
        prev = val
    raise QuadratureError("adaptive tensor Gauss–Legendre did not converge", prev)


def circle_rule(n: int, radius: float = 1.0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Trapezoid rule on the circle of given radius.

    Returns (points, outward unit normals, arc-length weights). Exact for
    trigonometric polynomials of degree < n.
    """
    theta = 2.0 * np.pi * np.arange(n) / n
    normals = np.column_stack([np.cos(theta), np.sin(theta)])
    weights = np.full(n, 2.0 * np.pi * radius / n)
    return radius * normals, normals, weights


def sphere_rule(n: int, radius: float = 1.0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Product rule on the 2-sphere: Gauss–Legendre in z, trapezoid in azimuth.

    Exact for polynomials of degree ≤ 2n - 1 in (x, y, z).
    """
    z, wz = gauss_legendre(n)
    phi = 2.0 * np.pi * np.arange(2 * n) / (2 * n)
    Z, PHI = np.meshgrid(z, phi, indexing="ij")
    s = np.sqrt(1.0 - Z**2)
    normals = np.column_stack([(s * np.cos(PHI)).ravel(), (s * np.sin(PHI)).ravel(), Z.ravel()])
    weights = np.outer(wz, np.full(2 * n, np.pi / n)).ravel() * radius**2
    return radius * normals, normals, weights


def sphere_points_rule(dim: int, n: int, radius: float = 1.0):
    """Circle rule for ``dim == 2``, product sphere rule for ``dim == 3``."""
    if dim == 2:
        return circle_rule(2 * n, radius)
    if dim == 3:
        return sphere_rule(n, radius)
    raise ValueError(f"sphere quadrature implemented for dimensions 2 and 3, got {dim}")
