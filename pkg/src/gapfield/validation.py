"""Self-contained numerical checks shared by ``gapfield validate`` and the tests.

Each check returns the measured error so callers can compare it with their
own tolerance.
"""
from __future__ import annotations

import numpy as np

from .densities import densities_disk_in_disk, phi_two_disks, residual_check
from .fields import Affine
from .geometry import (
    Disk,
    DiskInDiskConfig,
    DiskInDiskGeometry,
    TwoDiskConfig,
    TwoDiskGeometry,
)
from .oracle import nystrom_disk_in_disk, nystrom_two_disks, single_inclusion_closed_form
from .potentials import (
    BoundaryDensity,
    BoundaryGrid,
    kstar_apply,
    single_layer_eval,
)
from .solver import solve_two_disks

# one-sided first derivative, sixth-order accurate
_FORWARD = np.array([-137.0 / 60.0, 5.0, -5.0, 10.0 / 3.0, -5.0 / 4.0, 1.0 / 5.0])


def one_sided_normal_derivative(fn, grid: BoundaryGrid, side: int, h: float) -> np.ndarray:
    """``d/dnu`` of ``fn`` at the grid nodes from one side by forward differences."""
    nu = grid.normals_c
    acc = np.zeros(grid.M)
    for j, c in enumerate(_FORWARD):
        z = grid.nodes_c + side * j * h * nu
        acc += c * fn(z, side)
    return side * acc / h


def smooth_density(grid: BoundaryGrid, seed: int = 0) -> BoundaryDensity:
    rng = np.random.default_rng(seed)
    t = grid.theta
    a = rng.normal(size=4)
    vals = a[0] + a[1] * np.exp(np.cos(t - a[2])) + a[3] * np.sin(3 * t) + 0.5 * np.cos(5 * t + a[2])
    return BoundaryDensity(grid, vals)


def jump_relation_error(M: int = 512, seed: int = 0, h_rel: float = 2e-3) -> float:
    """Sup error of ``(+-1/2 + K*) phi`` against one-sided FD of ``S phi``."""
    disk = Disk((0.3, -0.1), 1.2)
    grid = BoundaryGrid(disk, M)
    phi = smooth_density(grid, seed)
    ks = kstar_apply(phi).values

    def S(z, side):
        P = np.stack([z.real, z.imag], axis=-1)
        return single_layer_eval(phi, P, side=side)

    err = 0.0
    for side in (+1, -1):
        fd = one_sided_normal_derivative(S, grid, side, h_rel * disk.radius)
        err = max(err, float(np.max(np.abs(fd - (side * 0.5 * phi.values + ks)))))
    return err


def _rel_l2(a, b) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def oracle_two_disk_error(M: int = 256) -> float:
    cfg = TwoDiskConfig(TwoDiskGeometry(1.0, 1.0, 0.1), 10.0, 10.0)
    H = Affine((1.0, 0.0))
    ref = nystrom_two_disks(cfg, H, M)
    p1, p2, _ = phi_two_disks(cfg, H, (ref.first.grid, ref.second.grid))
    return max(_rel_l2(p1.values, ref.first.values), _rel_l2(p2.values, ref.second.values))


def oracle_disk_in_disk_error(M: int = 256) -> float:
    cfg = DiskInDiskConfig(DiskInDiskGeometry(2.0, 1.0, 0.1), 10.0)
    A = np.array([1.0, 0.0])
    ref = nystrom_disk_in_disk(cfg, A, M)
    g, phi, _ = densities_disk_in_disk(cfg, A, (ref.first.grid, ref.second.grid))
    return max(_rel_l2(g.values, ref.first.values), _rel_l2(phi.values, ref.second.values))


def series_residuals() -> float:
    cfg = TwoDiskConfig(TwoDiskGeometry(1.0, 1.5, 0.05), 20.0, 0.3)
    H = Affine((0.6, -0.8))
    p1, p2, _ = phi_two_disks(cfg, H, M=256)
    r = residual_check(cfg, (p1, p2), H).max
    dcfg = DiskInDiskConfig(DiskInDiskGeometry(2.0, 1.0, 0.05), 0.2)
    A = np.array([0.3, 1.0])
    g, phi, _ = densities_disk_in_disk(dcfg, A, M=256)
    return max(r, residual_check(dcfg, (g, phi), A).max)


def equivalent_forms_error() -> float:
    cfg = DiskInDiskConfig(DiskInDiskGeometry(2.0, 1.0, 0.1), 10.0)
    A = np.array([1.0, 0.5])
    g1, p1, _ = densities_disk_in_disk(cfg, A, M=256, form="new")
    g2, p2, _ = densities_disk_in_disk(cfg, A, M=256, form="sr")
    scale = max(np.max(np.abs(g1.values)), np.max(np.abs(p1.values)))
    return float(max(np.max(np.abs(g1.values - g2.values)), np.max(np.abs(p1.values - p2.values))) / scale)


def single_inclusion_error(k: float = 4.0) -> float:
    A = np.array([1.0, -0.5])
    cfg = TwoDiskConfig(TwoDiskGeometry(1.0, 1.0, 0.2), k, 1.0)
    sol = solve_two_disks(cfg, Affine(tuple(A)))
    ref = single_inclusion_closed_form(k, Disk((0.0, 0.0), 1.0), A)
    rng = np.random.default_rng(3)
    r = np.sqrt(rng.uniform(0, 0.9**2, 50))
    t = rng.uniform(0, 2 * np.pi, 50)
    X = np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)
    return float(np.max(np.abs(sol.grad_series(X) - ref.grad(X))))


def run_suites(suite: str = "all") -> list:
    """``[(name, passed, detail)]`` for the selected suites."""
    checks = []
    if suite in ("all", "jumps"):
        checks.append(("jump relation, M=512", jump_relation_error, 1e-6))
    if suite in ("all", "series"):
        checks.append(("integral-system residual of series densities", series_residuals, 1e-8))
        checks.append(("equivalent series forms agree", equivalent_forms_error, 1e-10))
    if suite in ("all", "oracle"):
        checks.append(("two disks: series vs dense solve", oracle_two_disk_error, 1e-8))
        checks.append(("disk in disk: series vs dense solve", oracle_disk_in_disk_error, 1e-8))
        checks.append(("single inclusion interior gradient", single_inclusion_error, 1e-10))
    out = []
    for name, fn, tol in checks:
        err = fn()
        out.append((name, bool(err < tol), f"error {err:.2e} (tolerance {tol:.0e})"))
    return out
