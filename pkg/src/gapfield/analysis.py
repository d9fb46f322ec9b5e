"""Bound factors, gap sweeps, rate fits and two-sided (sandwich) checks."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, NamedTuple, Optional, Sequence

import numpy as np
from scipy import stats

from .errors import ConfigurationError, GapfieldError
from .fields import rigid
from .geometry import (
    DiskInDiskGeometry,
    TwoDiskConfig,
    TwoDiskGeometry,
    derived_scalars,
    fixed_points,
)
from .oracle import nystrom_disk_in_disk, nystrom_two_disks
from .solver import (
    critical_terms,
    grad_sup_norm,
    solve_dirichlet_disk_in_disk,
    solve_neumann_disk_in_disk,
    solve_two_disks,
    _canonical_data,
)
from .densities import densities_disk_in_disk, phi_two_disks

CSV_COLUMNS = (
    "eps", "k1", "k2", "grad_X1", "grad_X2", "sup_norm",
    "lower_factor", "upper_factor", "terms_used", "ratio_low", "ratio_up",
)


@dataclass(frozen=True)
class BoundFactors:
    kind: str
    lower_factor: float
    upper_factor: float
    inf_term: float
    projection: Optional[str]
    vacuous: bool = False


def _inf_projection(grad_fn, pts, direction) -> float:
    G = grad_fn(pts)
    return float(np.min(np.abs(G @ np.asarray(direction, dtype=float))))


def bound_factors(config, driver, samples: int = 1024) -> BoundFactors:
    """Lower/upper blow-up factors and the driver infimum along the gap segment.

    Two disks: ``1/(1 - tau + (r*/r_min) sqrt(eps))`` and
    ``1/(1 - |tau| + (r*/r_max) sqrt(eps))``; the projection is normal when
    both conductivities exceed 1, tangential when both are below 1, and the
    lower bound is flagged vacuous otherwise.  Disk in disk: Dirichlet uses
    ``1 - sigma + 4 r^ sqrt(eps)``, Neumann ``1 + sigma + 4 r^ sqrt(eps)``, both
    with upper denominator ``1 - |sigma| + r^ sqrt(eps)``.
    """
    ds = derived_scalars(config)
    geo = config.geometry
    se = math.sqrt(geo.eps)
    crit = fixed_points(geo)
    if isinstance(config, TwoDiskConfig):
        low_den = 1.0 - ds.tau + (ds.r_star / ds.r_min) * se
        up_den = 1.0 - abs(ds.tau) + (ds.r_star / ds.r_max) * se
        k1, k2 = config.k1, config.k2
        if k1 > 1 and k2 > 1:
            proj = "normal"
        elif k1 < 1 and k2 < 1:
            proj = "tangential"
        else:
            proj = None
        H = rigid(driver, geo.frame)
        pts = crit.segment_points("I", samples)
        direction = (1.0, 0.0) if proj != "tangential" else (0.0, 1.0)
        inf = _inf_projection(H.grad, pts, direction)
        return BoundFactors("two_disks", 1.0 / low_den, 1.0 / up_den, inf, proj,
                            vacuous=proj is None or inf == 0.0)
    sig = ds.sigma
    ru = ds.r_upper
    up_den = 1.0 - abs(sig) + ru * se
    pts = crit.segment_points("J1", samples)
    if config.boundary == "dirichlet":
        low_den = 1.0 - sig + 4.0 * ru * se
        proj = "normal" if config.k > 1 else None
        data = _canonical_data(geo, driver, "dirichlet")
        inside = data.double_layer_fields()[0]
        inf = _inf_projection(inside.grad, pts, (1.0, 0.0))
        kind = "dirichlet"
    else:
        low_den = 1.0 + sig + 4.0 * ru * se
        proj = "tangential" if config.k < 1 else None
        data = _canonical_data(geo, driver, "neumann")
        inside = data.single_layer_fields()[0]
        inf = _inf_projection(inside.grad, pts, (0.0, 1.0))
        kind = "neumann"
    return BoundFactors(kind, 1.0 / low_den, 1.0 / up_den, inf, proj, vacuous=proj is None or inf == 0.0)


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------


@dataclass
class SweepRow:
    eps: float
    k1: float
    k2: float
    grad_X1: float = math.nan
    grad_X2: float = math.nan
    sup_norm: float = math.nan
    lower_factor: float = math.nan
    upper_factor: float = math.nan
    terms_used: int = 0
    ratio_low: float = math.nan
    ratio_up: float = math.nan
    inf_term: float = math.nan
    vacuous: bool = False
    certified: bool = False
    oracle_delta: Optional[float] = None
    error: Optional[str] = None

    def csv_values(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]


class FitResult(NamedTuple):
    slope: float
    stderr: float
    intercept: float
    residual: float


@dataclass
class SweepReport:
    kind: str
    rows: List[SweepRow]
    gap_profile: Optional[tuple] = None  # (arc length, |grad u|) at the smallest eps
    fit: Optional[FitResult] = None
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)


def _with_eps(config, eps: float, k):
    geo = config.geometry
    if isinstance(config, TwoDiskConfig):
        k1, k2 = k if isinstance(k, (tuple, list)) else (k, k)
        g = TwoDiskGeometry(geo.r1, geo.r2, eps, geo.frame)
        return replace(config, geometry=g, k1=k1, k2=k2)
    k = k[0] if isinstance(k, (tuple, list)) else k
    g = DiskInDiskGeometry(geo.rho, geo.r, eps, geo.frame, geo.guard)
    return replace(config, geometry=g, k=k)


def solve(config, driver, M: Optional[int] = None):
    if isinstance(config, TwoDiskConfig):
        return solve_two_disks(config, driver, M)
    if config.boundary == "dirichlet":
        return solve_dirichlet_disk_in_disk(config, driver, M)
    return solve_neumann_disk_in_disk(config, driver, M)


def _oracle_delta(config, driver) -> float:
    if isinstance(config, TwoDiskConfig):
        sol = solve_two_disks(config, driver)
        ref = nystrom_two_disks(config, sol.H)
        ser = phi_two_disks(config, sol.H, (ref.first.grid, ref.second.grid))
    elif config.boundary == "dirichlet":
        data = _canonical_data(config.geometry, driver, "dirichlet")
        ref = nystrom_disk_in_disk(config, data)
        ser = densities_disk_in_disk(config, data, (ref.first.grid, ref.second.grid))
    else:
        return math.nan
    num = math.hypot(np.linalg.norm(ser[0].values - ref.first.values), np.linalg.norm(ser[1].values - ref.second.values))
    den = math.hypot(np.linalg.norm(ref.first.values), np.linalg.norm(ref.second.values))
    return num / den if den > 0 else num


def gap_profile(solution, n: int = 129) -> tuple:
    """``|grad u|`` along the segment joining the two critical points."""
    geo = solution.geometry
    X1, X2 = geo.X1, geo.X2
    t = np.linspace(0.0, 1.0, n)[1:-1]
    z = (1 - t) * complex(*X1) + t * complex(*X2)
    G = solution.grad_series(solution._out_point(z))
    return t * geo.eps, np.linalg.norm(G, axis=-1)


def _row(config, driver, eps, k, oracle: bool, sup_sampling: int) -> tuple:
    cfg = _with_eps(config, eps, k)
    if isinstance(cfg, TwoDiskConfig):
        row = SweepRow(eps, cfg.k1, cfg.k2)
    else:
        row = SweepRow(eps, cfg.k, cfg.k)
    try:
        sol = solve(cfg, driver)
        row.grad_X1, row.grad_X2 = sol.critical_gradients()
        row.sup_norm = grad_sup_norm(sol, sampling=sup_sampling).value
        row.sup_norm = max(row.sup_norm, row.grad_X1, row.grad_X2)
        bf = bound_factors(cfg, driver)
        row.lower_factor, row.upper_factor = bf.lower_factor, bf.upper_factor
        row.inf_term, row.vacuous = bf.inf_term, bf.vacuous
        row.terms_used = critical_terms(sol)
        row.certified = True  # every series above either met its tail bound or raised
        if not bf.vacuous:
            row.ratio_low = row.grad_X1 / (bf.lower_factor * bf.inf_term)
        row.ratio_up = row.sup_norm / bf.upper_factor
        if oracle and eps >= 1e-3:
            row.oracle_delta = _oracle_delta(cfg, driver)
        return row, sol
    except GapfieldError as exc:
        row.error = f"{type(exc).__name__}: {exc}"
        return row, None


def thread_count() -> int:
    env = os.environ.get("GAPFIELD_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigurationError(f"GAPFIELD_THREADS must be an integer, got {env!r}")
    return min(4, os.cpu_count() or 1)


def sweep(config, eps_list: Sequence[float], k_list: Sequence, driver, oracle: bool = False,
          sup_sampling: int = 256, profile: bool = True) -> SweepReport:
    """Solve on the grid ``eps_list x k_list``; failures are recorded per row."""
    if not len(eps_list) or not len(k_list):
        raise ConfigurationError("sweep needs at least one gap and one conductivity")
    floor = config.eps_floor
    jobs = []
    for k in k_list:
        for eps in eps_list:
            if not eps > 0:
                raise ConfigurationError(f"gap values must be positive, got {eps}")
            jobs.append((eps, k))
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        results = list(pool.map(lambda job: _row(config, driver, job[0], job[1], oracle, sup_sampling), jobs))
    rows = [r for r, _ in results]
    order = sorted(range(len(rows)), key=lambda i: (rows[i].k1, rows[i].k2, rows[i].eps))
    rows = [rows[i] for i in order]
    kind = "two_disks" if isinstance(config, TwoDiskConfig) else config.boundary
    report = SweepReport(kind, rows, meta={"eps_floor": floor})
    ok = [(r, s) for r, s in results if s is not None]
    if profile and ok:
        _, sol = min(ok, key=lambda rs: rs[0].eps)
        report.gap_profile = gap_profile(sol)
    usable = [r for r in rows if r.certified and r.error is None]
    if len(usable) >= 4 and len({(r.k1, r.k2) for r in usable}) == 1:
        try:
            report.fit = fit_blowup_rate(report)
        except ConfigurationError:
            pass
    return report


def fit_blowup_rate(report, column: str = "grad_X1") -> FitResult:
    """Least-squares slope of ``log column`` against ``log eps``."""
    rows = [r for r in report.rows if r.certified and r.error is None] if isinstance(report, SweepReport) else report
    eps = np.array([r.eps for r in rows], dtype=float)
    val = np.array([getattr(r, column) for r in rows], dtype=float)
    keep = np.isfinite(val) & (val > 0)
    eps, val = eps[keep], val[keep]
    if len(eps) < 4 or np.log10(eps.max() / eps.min()) < 2.0 - 1e-12:
        raise ConfigurationError("rate fit needs at least 4 rows spanning 2 decades of eps")
    res = stats.linregress(np.log(eps), np.log(val))
    fitted = res.intercept + res.slope * np.log(eps)
    resid = float(np.max(np.abs(np.log(val) - fitted)))
    return FitResult(float(res.slope), float(res.stderr), float(res.intercept), resid)


class SandwichResult(NamedTuple):
    ratio_low: np.ndarray
    ratio_up: np.ndarray
    dispersion_low: float
    dispersion_up: float
    excluded: tuple


def _dispersion(x) -> float:
    x = np.asarray(x, dtype=float)
    x = x[np.isfinite(x)]
    if len(x) == 0:
        return math.nan
    return float(x.max() / x.min())


def sandwich_check(report: SweepReport) -> SandwichResult:
    """Per-row ratios to the theoretical factors and their max/min spread."""
    rows = [r for r in report.rows if r.error is None]
    excluded = tuple(i for i, r in enumerate(rows) if r.vacuous)
    low = np.array([r.ratio_low if not r.vacuous else math.nan for r in rows])
    up = np.array([r.ratio_up for r in rows])
    return SandwichResult(low, up, _dispersion(low), _dispersion(up), excluded)
