"""Deterministic hand-written SVG output (fixed 800×800 canvas)."""

from __future__ import annotations

import numpy as np

from . import curves
from .geometry import Domain

SIZE = 800
MARGIN = 40


def _fmt(v: float) -> str:
    return f"{v:.3f}"


class _Frame:
    """Maps a data bounding box into the canvas with y pointing up."""

    def __init__(self, lo, hi):
        lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
        span = np.maximum(hi - lo, 1e-12)
        self.lo, self.hi = lo, hi
        self.s = (SIZE - 2 * MARGIN) / span

    def __call__(self, p) -> tuple[float, float]:
        x = MARGIN + (p[0] - self.lo[0]) * self.s[0]
        y = SIZE - MARGIN - (p[1] - self.lo[1]) * self.s[1]
        return x, y


def _path(loops, frame: _Frame) -> str:
    parts = []
    for loop in loops:
        pts = [frame(p) for p in loop]
        parts.append("M " + " L ".join(f"{_fmt(x)} {_fmt(y)}" for x, y in pts) + " Z")
    return " ".join(parts)


def _header(extra: str = "") -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">',
        '<defs><pattern id="hatch" width="8" height="8" patternUnits="userSpaceOnUse">'
        '<path d="M 0 8 L 8 0" stroke="#444" stroke-width="1"/></pattern></defs>',
        f'<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>',
    ] + ([extra] if extra else [])


def region_overlay(domain: Domain, region=None, hole=None) -> str:
    """Domain outline in black, region shaded, hole hatched."""
    step = domain.diameter / 400
    outline = [curves.sample(p, step)[:-1] for p in domain.boundary_pieces()]
    pts = np.vstack(outline)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    # square frame so shapes are not distorted
    c, half = 0.5 * (lo + hi), 0.5 * float(np.max(hi - lo))
    frame = _Frame(c - half, c + half)
    out = _header()
    if region is not None:
        out.append(f'<path d="{_path(region.loops(step), frame)}" fill="#9ecae1" fill-rule="evenodd" stroke="#3182bd" stroke-width="1"/>')
    if hole is not None:
        out.append(f'<path d="{_path(hole.loops(step), frame)}" fill="url(#hatch)" fill-rule="evenodd" stroke="#444" stroke-width="1"/>')
    out.append(f'<path d="{_path(outline, frame)}" fill="none" fill-rule="evenodd" stroke="black" stroke-width="2"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def sweep_plot(p_values, lambdas, extrapolated: float) -> str:
    """Polyline of (p, λ_p) with the extrapolated value marked at p = 1."""
    ps = np.asarray([1.0] + list(p_values), dtype=float)
    ls = np.asarray([extrapolated] + list(lambdas), dtype=float)
    pad = 0.05 * max(float(np.ptp(ls)), 1e-3)
    frame = _Frame((1.0 - 0.02, ls.min() - pad), (ps.max() + 0.02, ls.max() + pad))
    out = _header()
    x0, y0 = frame((frame.lo[0], frame.lo[1]))
    x1, y1 = frame((frame.hi[0], frame.hi[1]))
    out.append(f'<path d="M {_fmt(x0)} {_fmt(y0)} L {_fmt(x1)} {_fmt(y0)} M {_fmt(x0)} {_fmt(y0)} L {_fmt(x0)} {_fmt(y1)}" stroke="black" fill="none"/>')
    pts = [frame((p, l)) for p, l in zip(p_values, lambdas)]
    out.append('<polyline fill="none" stroke="#3182bd" stroke-width="2" points="'
               + " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts) + '"/>')
    for x, y in pts:
        out.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="4" fill="#3182bd"/>')
    ex, ey = frame((1.0, extrapolated))
    out.append(f'<path d="M {_fmt(ex - 6)} {_fmt(ey - 6)} L {_fmt(ex + 6)} {_fmt(ey + 6)} M {_fmt(ex - 6)} {_fmt(ey + 6)} L {_fmt(ex + 6)} {_fmt(ey - 6)}" stroke="#e6550d" stroke-width="2"/>')
    out.append(f'<text x="{_fmt(ex + 10)}" y="{_fmt(ey - 10)}" font-family="monospace" font-size="14">'
               f'p=1: {extrapolated:.5f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
