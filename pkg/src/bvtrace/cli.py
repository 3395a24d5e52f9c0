"""Command-line runner: strict key=value configs, deterministic result files.

Config files are line oriented::

    [eigenset-search]        # optional section header naming the command
    command=eigenset-search  # optional when a header is given
    domain=square_with_appendage
    delta=0.01
    eta=0.5

``#`` starts a comment. Unknown keys are errors. Outputs go to ``--out``:
``result.json`` (config echo and payload, byte-stable), command-specific
CSV/TXT/SVG files, and ``timing.json`` (wall time and timestamp, which are
kept out of ``result.json`` so that reruns stay byte-identical).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, ConvergenceError, GeometryError, InfeasibleSearch, QuadratureError

log = logging.getLogger("bvtrace")

COMMANDS = ("exact", "asymptotics", "solve-p", "sweep-p", "eigenset-search", "hole-search",
            "shape-derivative", "fd-check")

# value parsers
def _float(s):
    return float(s)


def _int(s):
    v = float(s)
    if v != int(v):
        raise ValueError("not an integer")
    return int(v)


def _floats(s):
    return [float(x) for x in s.split(",") if x.strip()]


def _points(s):
    pts = [[float(c) for c in p.split(",")] for p in s.split(";") if p.strip()]
    if any(len(p) != 2 for p in pts):
        raise ValueError("expected 'x,y;x,y;...'")
    return pts


def _str(s):
    return s


def _poly_terms(s):
    """'i:a:b:c, ...' → [(i, (a, b), c), ...] for planar polynomial fields."""
    out = []
    for t in s.split(","):
        if t.strip():
            i, a, b, c = t.split(":")
            out.append([int(i), [int(a), int(b)], float(c)])
    return out


DOMAIN_KEYS = {"domain": _str, "N": _int, "R": _float, "r": _float, "vertices": _points,
               "delta": _float, "eta": _float}
MESH_KEYS = {"h": _float}
SOLVER_KEYS = {"tol": _float, "max_iter": _int, "tau": _float}
SEARCH_KEYS = {"family": _str, "budget": _int, "T0": _float, "T_end": _float,
               "n_directions": _int, "n_offsets": _int}
HOLE_KEYS = {"hole_area": _float, "hole_center": _floats}
FIELD_KEYS = {"field": _str, "v": _floats, "coefficients": _poly_terms, "lambda1": _float}

SCHEMA = {
    "exact": {**DOMAIN_KEYS},
    "asymptotics": {"kappa": _floats, "eps": _floats},
    "solve-p": {**DOMAIN_KEYS, **MESH_KEYS, **SOLVER_KEYS, **HOLE_KEYS, "p": _float},
    "sweep-p": {**DOMAIN_KEYS, **MESH_KEYS, **SOLVER_KEYS, "p_schedule": _floats},
    "eigenset-search": {**DOMAIN_KEYS, **MESH_KEYS, **SEARCH_KEYS, **HOLE_KEYS, "trapped_volume": _float},
    "hole-search": {**DOMAIN_KEYS, **MESH_KEYS, **SEARCH_KEYS, "alpha": _float, "good_point": _floats,
                    "hole_radius": _float, "kappa": _floats},
    "shape-derivative": {**DOMAIN_KEYS, **FIELD_KEYS, "delta_fd": _float},
    "fd-check": {**DOMAIN_KEYS, **FIELD_KEYS, "delta_fd": _float},
}
REQUIRED = {
    "exact": ["domain"],
    "asymptotics": ["kappa", "eps"],
    "solve-p": ["domain", "p", "h"],
    "sweep-p": ["domain", "p_schedule", "h"],
    "eigenset-search": ["domain"],
    "hole-search": ["domain", "alpha"],
    "shape-derivative": ["domain", "field"],
    "fd-check": ["domain", "field", "delta_fd"],
}
DOMAIN_REQUIRED = {"ball": ["R"], "annulus": ["r", "R"], "polygon": ["vertices"],
                   "square_with_appendage": ["delta", "eta"], "unit_square": []}


@dataclass
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def echo(self) -> dict:
        return {"command": self.command, "seed": self.seed, **dict(sorted(self.params.items()))}


def parse_config(text: str) -> RunConfig:
    """Parse a strict key=value config; errors name the offending line."""
    section = None
    raw: dict[str, tuple[int, str]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if s.startswith("[") and s.endswith("]"):
            if section is not None:
                raise ConfigError(f"line {lineno}: only one [command] section is allowed")
            section = s[1:-1].strip()
            continue
        if "=" not in s:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        k, v = (x.strip() for x in s.split("=", 1))
        if k in raw:
            raise ConfigError(f"line {lineno}: duplicate key {k!r}")
        raw[k] = (lineno, v)
    command = raw.pop("command", (0, section))[1]
    if section is not None and command != section:
        raise ConfigError(f"command {command!r} does not match section [{section}]")
    if command is None:
        raise ConfigError("missing command")
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    seed = 0
    if "seed" in raw:
        lineno, v = raw.pop("seed")
        try:
            seed = _int(v)
        except ValueError:
            raise ConfigError(f"line {lineno}: seed must be an integer") from None
    schema = SCHEMA[command]
    params = {}
    for k, (lineno, v) in raw.items():
        if k not in schema:
            raise ConfigError(f"line {lineno}: unknown key {k!r} for command {command}")
        try:
            params[k] = schema[k](v)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {k!r}: {v!r} ({exc})") from None
    for k in REQUIRED[command]:
        if k not in params:
            raise ConfigError(f"missing {k}")
    if "domain" in params:
        kind = params["domain"]
        if kind not in DOMAIN_REQUIRED:
            raise ConfigError(f"unknown domain kind {kind!r}")
        for k in DOMAIN_REQUIRED[kind]:
            if k not in params:
                raise ConfigError(f"missing {k}")
    _validate(command, params)
    return RunConfig(command, params, seed)


def _validate(command: str, params: dict) -> None:
    if "p" in params and not params["p"] > 1:
        raise ConfigError("p must exceed 1")
    if "p_schedule" in params:
        ps = params["p_schedule"]
        if len(ps) < 3 or any(p <= 1 for p in ps) or any(b >= a for a, b in zip(ps, ps[1:])):
            raise ConfigError("p_schedule must have ≥ 3 strictly decreasing values > 1")
    for k in ("h", "R", "r", "delta", "eta", "alpha", "hole_radius", "hole_area", "trapped_volume",
              "budget", "tol", "delta_fd"):
        if k in params and not params[k] > 0:
            raise ConfigError(f"{k} must be positive")
    if params.get("family", "cell_annealing") not in ("cell_annealing", "boundary_caps"):
        raise ConfigError(f"unknown search family {params['family']!r}")
    if "field" in params:
        name = params["field"]
        from .shape import BUILTINS
        if name not in BUILTINS and name != "polynomial":
            raise ConfigError(f"unknown field {name!r}")
        if name == "translation" and "v" not in params:
            raise ConfigError("missing v")
        if name == "polynomial" and "coefficients" not in params:
            raise ConfigError("missing coefficients")


# --------------------------------------------------------------------------- routing
def build_domain(params: dict):
    from .geometry import Domain

    kind = params["domain"]
    N = params.get("N", 2)
    if kind == "ball":
        return Domain.ball(params["R"], N)
    if kind == "annulus":
        return Domain.annulus(params["r"], params["R"], N)
    if kind == "polygon":
        return Domain.polygon(params["vertices"])
    if kind == "unit_square":
        return Domain.unit_square()
    return Domain.square_with_appendage(params["delta"], params["eta"])


def build_field(params: dict, dim: int):
    from . import shape

    name = params["field"]
    if name == "translation":
        return shape.translation(params["v"])
    if name == "polynomial":
        return shape.polynomial(params["coefficients"], dim)
    return shape.BUILTINS[name](dim)


def _search_params(params: dict, seed: int):
    from .isoperimetric import SearchParams

    keys = ("family", "budget", "T0", "T_end", "n_directions", "n_offsets", "h")
    return SearchParams(seed=seed, **{k: params[k] for k in keys if k in params})


def _solver_params(params: dict, seed: int, p: float = 2.0):
    from .plaplace import SolverParams

    return SolverParams(p=p, seed=seed, **{k: params[k] for k in ("tol", "max_iter", "tau") if k in params})


def _run(cfg: RunConfig) -> tuple[dict, dict[str, str]]:
    """Execute a command; returns (payload, extra files name → text)."""
    P, files = cfg.params, {}
    cmd = cfg.command
    if cmd == "exact":
        from .exact import lambda1_closed_form

        return lambda1_closed_form(build_domain(P)).to_dict(), files
    if cmd == "asymptotics":
        from .asymptotics import expansion_table

        rows = expansion_table(P["kappa"], P["eps"])
        cols = list(rows[0])
        files["asymptotics.csv"] = "\n".join([",".join(cols)] + [
            ",".join(f"{r[c]:.12g}" for c in cols) for r in rows]) + "\n"
        return {"kappa": P["kappa"], "rows": rows}, files

    domain = build_domain(P)
    if cmd in ("solve-p", "sweep-p"):
        from .mesh import triangulate
        from .plaplace import continuation_to_one, solve_lambda_p

        mesh = triangulate(domain, P["h"])
        if cmd == "solve-p":
            hole = None
            if "hole_area" in P:
                from .isoperimetric import disk_hole
                hole = disk_hole(mesh, P.get("hole_center", [0.0, 0.0]), P["hole_area"])
            res = solve_lambda_p(mesh, _solver_params(P, cfg.seed, P["p"]), hole=hole)
            out = res.to_dict()
            out["n_vertices"] = mesh.n_vertices
            return out, files
        from . import svg

        cont = continuation_to_one(mesh, P["p_schedule"], _solver_params(P, cfg.seed))
        lines = ["p,lambda,iterations,extrapolated_lambda1"]
        lines += [f"{p:.12g},{r.lam:.12g},{r.iterations},{cont.extrapolated_lambda1:.12g}"
                  for p, r in zip(cont.p_values, cont.results)]
        files["sweep.csv"] = "\n".join(lines) + "\n"
        files["sweep.svg"] = svg.sweep_plot(cont.p_values, cont.lambdas, cont.extrapolated_lambda1)
        return cont.to_dict(), files

    if cmd == "eigenset-search":
        from . import svg
        from .isoperimetric import disk_hole, eigenset_search
        from .mesh import triangulate

        sp = _search_params(P, cfg.seed)
        hole = None
        if "hole_area" in P:
            h = min(sp.h or 0.1 * domain.feature_size, domain.feature_size)
            mesh = triangulate(domain, h)
            hole = disk_hole(mesh, P.get("hole_center", [0.0, 0.0]), P["hole_area"])
        res = eigenset_search(domain, sp, hole=hole, trapped_volume=P.get("trapped_volume"))
        files["trace.csv"] = res.search_trace.to_csv()
        files["eigenset.txt"] = res.region.to_text(domain.diameter / 400)
        files["eigenset.svg"] = svg.region_overlay(domain, res.region, hole)
        out = res.to_dict()
        out["region"] = {"label": res.region.label, "area": res.region.area,
                         "interior_length": res.region.interior_length,
                         "trace_length": res.region.trace_length}
        return out, files

    if cmd == "hole-search":
        from .isoperimetric import hole_gap_report, hole_placement_bound

        out = hole_gap_report(domain, P["alpha"], _search_params(P, cfg.seed)).to_dict()
        if "good_point" in P:
            r = P.get("hole_radius", 0.2 * domain.feature_size)
            out["hole_placement_bound"] = hole_placement_bound(domain, P["good_point"], r, P["alpha"],
                                                               kappa=P.get("kappa"))
        return out, files

    # shape-derivative / fd-check on A = Ω̄
    from .exact import lambda1_closed_form
    from .errors import NoClosedForm
    from .isoperimetric import SubsetRegion, geometric_quotient
    from .shape import finite_difference_check, shape_derivative

    fld = build_field(P, domain.dim)
    if "lambda1" in P:
        lam = P["lambda1"]
    else:
        try:
            lam = lambda1_closed_form(domain).lambda1
        except NoClosedForm:
            lam = geometric_quotient(SubsetRegion.whole(domain))
    if domain.dim != 2:
        return shape_derivative(domain, lam, fld).to_dict() | {"lambda1": lam}, files
    A = SubsetRegion.whole(domain)
    out = shape_derivative(A, lam, fld).to_dict()
    out["lambda1"] = lam
    if cmd == "fd-check" or "delta_fd" in P:
        fd = finite_difference_check(domain, A, lam, fld, P.get("delta_fd", 1e-3))
        out["fd_check"] = {"delta": fd.delta, "central_diff": fd.central_diff, "gap": fd.gap,
                           "left_diff": fd.left_diff, "right_diff": fd.right_diff}
    return out, files


# --------------------------------------------------------------------------- records
def _clean(x):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if np.isfinite(v) else repr(v)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


@dataclass
class ResultRecord:
    config: dict
    payload: dict
    version: str = __version__

    def to_json(self) -> str:
        return json.dumps(_clean({"config": self.config, "result": self.payload, "version": self.version}),
                          indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ResultRecord":
        d = json.loads(text)
        return cls(d["config"], d["result"], d["version"])


def run(cfg: RunConfig, out_dir, quiet: bool = False) -> int:
    out = Path(out_dir)
    t0 = time.perf_counter()
    try:
        payload, files = _run(cfg)
    except (ConvergenceError, InfeasibleSearch, QuadratureError, GeometryError, ValueError,
            ZeroDivisionError, FloatingPointError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return 3
    wall = time.perf_counter() - t0
    record = ResultRecord(cfg.echo(), payload)
    out.mkdir(parents=True, exist_ok=True)
    (out / "result.json").write_text(record.to_json())
    for name, text in sorted(files.items()):
        (out / name).write_text(text)
    if not any(n.endswith(".svg") for n in files):
        log.info("nothing plottable for %s; no SVG written", cfg.command)
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    (out / "timing.json").write_text(json.dumps({"wall_time_s": wall, "timestamp": stamp}, indent=2) + "\n")
    if not quiet:
        print(f"{cfg.command}: wrote {out / 'result.json'} ({wall:.2f} s)")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="bvtrace", description="Trace-constant experiments for BV(Ω) → L¹(∂Ω).")
    ap.add_argument("--config", required=True, help="key=value config file")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--seed", type=int, default=None, help="override the config seed")
    ap.add_argument("--quiet", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        cfg = parse_config(Path(args.config).read_text())
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.seed = args.seed
    return run(cfg, args.out, quiet=args.quiet)


if __name__ == "__main__":
    sys.exit(main())
