"""Command-line interface: ``gapfield {solve,sweep,validate,oracle-compare}``.

Exit codes: 0 success, 1 validation failure, 2 configuration error,
3 numerical failure (uncertified truncation or ill-conditioned oracle).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from . import analysis
from .errors import ConfigurationError, DomainError, SeriesError
from .fields import Affine, HarmonicPoly
from .geometry import (
    Disk,
    DiskInDiskConfig,
    DiskInDiskGeometry,
    TwoDiskConfig,
    TwoDiskGeometry,
)
from .oracle import IllConditionedWarning

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

_conductivity = {
    "oneOf": [
        {"type": "number", "minimum": 0},
        {"type": "string", "enum": ["inf", "Infinity", "+inf"]},
    ]
}
_vec2 = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_positive = {"type": "number", "exclusiveMinimum": 0}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["problem", "geometry", "conductivity", "driver"],
    "additionalProperties": False,
    "properties": {
        "problem": {"enum": ["two_disks", "dirichlet", "neumann"]},
        "geometry": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "r1": _positive, "r2": _positive, "rho": _positive, "r": _positive,
                "eps": _positive,
                "disks": {
                    "type": "array", "minItems": 2, "maxItems": 2,
                    "items": {
                        "type": "object", "required": ["center", "radius"],
                        "properties": {"center": _vec2, "radius": _positive},
                        "additionalProperties": False,
                    },
                },
            },
        },
        "conductivity": {"oneOf": [_conductivity, {"type": "array", "items": _conductivity,
                                                   "minItems": 1, "maxItems": 2}]},
        "driver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "affine": _vec2,
                "poly": {
                    "type": "object", "required": ["coeffs"], "additionalProperties": False,
                    "properties": {"center": _vec2, "coeffs": {"type": "array", "items": _vec2}},
                },
                "fourier": {"type": "array", "items": _vec2, "minItems": 1},
            },
            "minProperties": 1,
            "maxProperties": 1,
        },
        "numerics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "M": {"type": "integer", "minimum": 16},
                "tol": _positive,
                "eps_floor": _positive,
                "sup_sampling": {"type": "integer", "minimum": 16},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "eps": {"type": "array", "items": _positive, "minItems": 1},
                "k": {"type": "array", "items": {"oneOf": [_conductivity, {"type": "array", "items": _conductivity}]},
                      "minItems": 1},
                "oracle": {"type": "boolean"},
            },
        },
        "points": {"type": "array", "items": _vec2},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "json": {"type": "string"},
                "csv": {"type": "string"},
                "svg": {"type": ["string", "null"]},
            },
        },
    },
}


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


class RunConfig:
    """Validated configuration plus the objects built from it."""

    def __init__(self, raw: dict, base_dir: Path = Path(".")):
        try:
            jsonschema.validate(raw, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigurationError(f"config schema violation at {path}: {exc.message}") from None
        self.raw = raw
        self.base_dir = base_dir
        self.problem = raw["problem"]
        num = raw.get("numerics", {})
        self.M: Optional[int] = num.get("M")
        if self.M is not None and self.M & (self.M - 1):
            raise ConfigurationError("numerics/M must be a power of two")
        self.tol = float(num.get("tol", 1e-10))
        self.eps_floor = float(num.get("eps_floor", 1e-9))
        self.sup_sampling = int(num.get("sup_sampling", 256))
        self.config = self._build_config()
        self.driver = self._build_driver()

    def _ks(self):
        k = self.raw["conductivity"]
        ks = k if isinstance(k, list) else [k]
        return [_parse_k(v) for v in ks]

    def _build_config(self):
        geo = self.raw["geometry"]
        ks = self._ks()
        if self.problem == "two_disks":
            if "disks" in geo:
                d1, d2 = (Disk(tuple(d["center"]), d["radius"]) for d in geo["disks"])
                g = TwoDiskGeometry.from_disks(d1, d2, geo.get("eps"))
            else:
                _require(geo, ("r1", "r2", "eps"))
                g = TwoDiskGeometry(geo["r1"], geo["r2"], geo["eps"])
            k1, k2 = (ks[0], ks[0]) if len(ks) == 1 else ks
            return TwoDiskConfig(g, k1, k2, self.tol, self.eps_floor)
        if "disks" in geo:
            om, b = (Disk(tuple(d["center"]), d["radius"]) for d in geo["disks"])
            g = DiskInDiskGeometry.from_disks(om, b, geo.get("eps"))
        else:
            _require(geo, ("rho", "r", "eps"))
            g = DiskInDiskGeometry(geo["rho"], geo["r"], geo["eps"])
        if len(ks) != 1:
            raise ConfigurationError("disk-in-disk problems take a single conductivity")
        return DiskInDiskConfig(g, ks[0], self.problem, self.tol, self.eps_floor)

    def _build_driver(self):
        drv = self.raw["driver"]
        if self.problem == "two_disks":
            if "affine" in drv:
                return Affine(tuple(drv["affine"]))
            if "poly" in drv:
                p = drv["poly"]
                coeffs = tuple(complex(a, b) for a, b in p["coeffs"])
                return HarmonicPoly(complex(*p.get("center", (0.0, 0.0))), coeffs)
            raise ConfigurationError("two-disk drivers are 'affine' or 'poly'")
        if "affine" in drv:
            return np.asarray(drv["affine"], dtype=float)
        if "fourier" in drv:
            coeffs = tuple(complex(a, b) for a, b in drv["fourier"])
            return coeffs
        raise ConfigurationError("disk-in-disk drivers are 'affine' or 'fourier'")

    def output_path(self, key: str, default: str, override: Optional[str] = None) -> Optional[Path]:
        if override:
            return Path(override)
        out = self.raw.get("output", {})
        name = out.get(key, default)
        if name is None:
            return None
        return Path(out.get("dir", ".")) / name

    def sweep_lists(self):
        sw = self.raw.get("sweep", {})
        eps = sw.get("eps", [self.config.geometry.eps])
        ks = sw.get("k")
        if ks is None:
            ks = [self.raw["conductivity"]]
        ks = [_k_entry(k, self.problem) for k in ks]
        return eps, ks


def _require(d, keys):
    missing = [k for k in keys if k not in d]
    if missing:
        raise ConfigurationError(f"geometry is missing {', '.join(missing)}")


def _k_entry(k, problem):
    if not isinstance(k, list):
        return _parse_k(k)
    if problem != "two_disks" or len(k) > 2:
        raise ConfigurationError(f"bad conductivity entry {k!r}")
    return tuple(_parse_k(v) for v in (k * 2)[:2])


def _parse_k(v):
    if isinstance(v, str):
        return math.inf
    return float(v)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigurationError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from None
    return RunConfig(raw, path.parent)


def _num(x):
    """JSON-safe float (infinities as strings)."""
    if isinstance(x, (float, np.floating)):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return None
        return float(x)
    return x


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_solve(rc: RunConfig, out: Optional[str]) -> int:
    sol = analysis.solve(rc.config, rc.driver, rc.M)
    gX1, gX2 = sol.critical_gradients()
    sup = analysis.grad_sup_norm(sol, sampling=rc.sup_sampling)
    bf = analysis.bound_factors(rc.config, rc.driver)
    geo = rc.config.geometry
    theta = 2 * np.pi * np.arange(64) / 64
    traces = {}
    if rc.problem == "two_disks":
        for i in (1, 2):
            for side, name in ((+1, "outer"), (-1, "inner")):
                tr = sol.trace(i, theta, side)
                traces[f"B{i}_{name}"] = {"normal": tr.normal.tolist(), "tangential": tr.tangential.tolist()}
    else:
        outer, inner = sol.inclusion_traces(theta)
        traces["B_outer"] = {"normal": outer.normal.tolist(), "tangential": outer.tangential.tolist()}
        traces["B_inner"] = {"normal": inner.normal.tolist(), "tangential": inner.tangential.tolist()}
        bt = sol.boundary_trace(theta)
        traces["Omega_inner"] = {"normal": bt.normal.tolist(), "tangential": bt.tangential.tolist()}
    pts = rc.raw.get("points")
    if pts is None:
        pts = _default_points(rc)
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    fields = {
        "points": pts.tolist(),
        "u": sol.eval(pts).tolist() if len(pts) else [],
        "grad": sol.grad(pts).tolist() if len(pts) else [],
    }
    report = {
        "config": rc.raw,
        "problem": rc.problem,
        "eps": geo.eps,
        "grad_X1": gX1,
        "grad_X2": gX2,
        "sup_norm": sup.value,
        "sup_location": sup.location.tolist(),
        "bound_factors": {k: _num(v) for k, v in bf.__dict__.items()},
        "trace_angles": theta.tolist(),
        "traces": traces,
        "fields": fields,
    }
    path = rc.output_path("json", "solve_report.json", out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2, default=_num))
    print(f"|grad u|(X1) = {gX1:.10g}   |grad u|(X2) = {gX2:.10g}   sup = {sup.value:.10g}")
    print(f"report written to {path}")
    return EXIT_OK


def _default_points(rc: RunConfig):
    geo = rc.config.geometry
    frame = geo.frame
    if rc.problem == "two_disks":
        zs = [complex(geo.r1 + geo.eps / 2), complex(-0.5 * geo.r1, 0.2 * geo.r1),
              complex(geo.d, 0.3 * geo.r2), complex(geo.r1, 2.0 * geo.r_max)]
    else:
        zs = [complex(geo.rho - geo.eps / 2), complex(geo.B.center[0], 0.1 * geo.r),
              complex(-0.9 * geo.rho, 0.0)]
    z = frame.from_canonical(np.array(zs))
    return np.stack([z.real, z.imag], axis=-1).tolist()


def write_csv(report: analysis.SweepReport, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(analysis.CSV_COLUMNS)
        for row in report.rows:
            w.writerow([_csv_cell(v) for v in row.csv_values()])
        if report.fit is not None:
            fh.write(f"# slope={report.fit.slope:.6f} stderr={report.fit.stderr:.6f} "
                     f"intercept={report.fit.intercept:.6f}\n")
        errors = [r for r in report.rows if r.error]
        for r in errors:
            fh.write(f"# failed eps={r.eps!r}: {r.error}\n")


def _csv_cell(v):
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        return repr(v)
    return v


def emit_plot(report: analysis.SweepReport, path) -> Path:
    """Log-log plot of ``|grad u|(X1)`` against ``eps`` plus the gap-axis profile."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = [r for r in report.rows if r.error is None and np.isfinite(r.grad_X1)]
    if len(rows) < 2:
        raise ConfigurationError("plot needs at least two successful rows")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    eps = np.array([r.eps for r in rows])
    val = np.array([r.grad_X1 for r in rows])
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    ax = axes[0]
    ax.loglog(eps, val, "o-", label=r"$|\nabla u|(X_1)$")
    if report.fit is not None:
        ax.set_title(f"fitted slope {report.fit.slope:.3f} ± {report.fit.stderr:.3f}")
    ax.set_xlabel(r"$\varepsilon$")
    ax.set_ylabel(r"$|\nabla u|$")
    ax.legend()
    ax = axes[1]
    if report.gap_profile is not None:
        s, mag = report.gap_profile
        ax.plot(s, mag)
        ax.set_title(f"gap axis, eps = {min(eps):.1e}")
    ax.set_xlabel("distance from X1")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def cmd_sweep(rc: RunConfig, oracle: bool, out: Optional[str], svg: Optional[str]) -> int:
    eps, ks = rc.sweep_lists()
    oracle = oracle or rc.raw.get("sweep", {}).get("oracle", False)
    report = analysis.sweep(rc.config, eps, ks, rc.driver, oracle=oracle, sup_sampling=rc.sup_sampling)
    path = rc.output_path("csv", "sweep.csv", out)
    write_csv(report, path)
    print(f"{len(report.rows)} rows written to {path}")
    if report.fit is not None:
        print(f"fitted slope {report.fit.slope:.4f} ± {report.fit.stderr:.4f}")
    svg_path = rc.output_path("svg", None, svg) if (svg or rc.raw.get("output", {}).get("svg")) else None
    if svg_path is not None:
        emit_plot(report, svg_path)
        print(f"plot written to {svg_path}")
    if oracle:
        for r in report.rows:
            if r.oracle_delta is not None:
                print(f"eps={r.eps:.1e}: series vs oracle relative L2 = {r.oracle_delta:.2e}")
    if any(r.error and "SeriesError" in r.error for r in report.rows):
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_oracle_compare(rc: RunConfig) -> int:
    eps, ks = rc.sweep_lists()
    print(f"{'eps':>10} {'k':>12} {'rel L2':>12}")
    worst = 0.0
    for k in ks:
        for e in eps:
            if e < 1e-3:
                continue
            cfg = analysis._with_eps(rc.config, e, k)
            if rc.problem == "neumann":
                delta = _neumann_delta(cfg, rc.driver)
            else:
                delta = analysis._oracle_delta(cfg, rc.driver)
            worst = max(worst, delta)
            print(f"{e:10.1e} {str(k):>12} {delta:12.3e}")
    return EXIT_OK if worst < 1e-6 else EXIT_VALIDATION


def _neumann_delta(cfg, driver) -> float:
    from .oracle import nystrom_neumann_disk_in_disk
    from .solver import solve_neumann_disk_in_disk, _canonical_data

    sol = solve_neumann_disk_in_disk(cfg, driver)
    data = _canonical_data(cfg.geometry, driver, "neumann")
    ref = nystrom_neumann_disk_in_disk(cfg, data, sol.M)
    z = ref.first.grid.nodes_c
    u = sol.eval(sol._out_point(z))
    return float(np.linalg.norm(u - ref.first.values) / np.linalg.norm(ref.first.values))


def cmd_validate(suite: str) -> int:
    from .validation import run_suites

    results = run_suites(suite)
    width = max(len(name) for name, _, _ in results)
    failed = 0
    for name, ok, detail in results:
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}")
    return EXIT_OK if failed == 0 else EXIT_VALIDATION


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gapfield", description="Gradient blow-up in narrow gaps between disks.")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve", help="solve one configuration and write a JSON report")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s = sub.add_parser("sweep", help="sweep the gap (and conductivity) and write a CSV")
    s.add_argument("--config", required=True)
    s.add_argument("--oracle", action="store_true", help="add dense-solve density errors for eps >= 1e-3")
    s.add_argument("--out")
    s.add_argument("--svg")
    s = sub.add_parser("validate", help="run the built-in invariant suites")
    s.add_argument("--suite", choices=["all", "jumps", "series", "oracle"], default="all")
    s = sub.add_parser("oracle-compare", help="series densities against the dense solver")
    s.add_argument("--config", required=True)
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", IllConditionedWarning)
            if args.command == "validate":
                return cmd_validate(args.suite)
            rc = load_config(args.config)
            if args.command == "solve":
                return cmd_solve(rc, args.out)
            if args.command == "sweep":
                return cmd_sweep(rc, args.oracle, args.out, args.svg)
            return cmd_oracle_compare(rc)
    except (ConfigurationError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SeriesError, IllConditionedWarning) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
