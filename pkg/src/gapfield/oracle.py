"""Independent reference solutions.

Dense Nyström discretizations of the boundary integral systems, built only
from kernel quadrature (no reflection series), and the classical closed form
for a single disk in a uniform field.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import ConfigurationError
from .fields import HarmonicField
from .geometry import (
    Disk,
    DiskInDiskConfig,
    TwoDiskConfig,
    derived_scalars,
    inverse_lambda,
    parse_conductivity,
    sigma_of,
    to_complex,
    to_points,
)
from .potentials import (
    BoundaryData,
    BoundaryDensity,
    BoundaryGrid,
    double_layer_grad,
    single_layer_self_matrix,
    upsample,
)

COND_LIMIT = 1e12
MAX_UPSAMPLE = 16


class IllConditionedWarning(UserWarning):
    pass


@dataclass(frozen=True)
class DenseSystem:
    matrix: np.ndarray
    rhs: np.ndarray
    solution: np.ndarray
    cond: float

    @property
    def degraded(self) -> bool:
        return not self.cond < COND_LIMIT

    @property
    def residual(self) -> float:
        return float(np.max(np.abs(self.matrix @ self.solution - self.rhs)))


class NystromSolution(NamedTuple):
    first: BoundaryDensity
    second: BoundaryDensity
    system: DenseSystem


def auto_grid_size(eps: float, r_min: float) -> int:
    """Smallest power of two >= max(256, 64 / sqrt(eps / r_min))."""
    need = max(256.0, 64.0 / math.sqrt(eps / r_min))
    return 1 << int(math.ceil(math.log2(need)))


def _interp_matrix(M: int, p: int) -> np.ndarray:
    if p == 1:
        return np.eye(M)
    return np.stack([upsample(col, p) for col in np.eye(M)], axis=1)


def _upsample_factor(grid: BoundaryGrid, gap: float) -> int:
    p = 1
    while grid.spacing / p >= gap / 5.0 and p < MAX_UPSAMPLE:
        p *= 2
    return p


def kernel_matrix(kind: str, src: BoundaryGrid, targets, normals=None, gap: Optional[float] = None) -> np.ndarray:
    """Matrix from nodal densities on ``src`` to off-circle target quantities.

    ``kind``: ``"S"`` single layer value, ``"dS"`` normal derivative of the
    single layer, ``"dD"`` normal derivative of the double layer.  The density
    is trigonometrically upsampled when targets sit within a few node
    spacings of the circle.
    """
    z = to_complex(targets).ravel()
    if gap is None:
        gap = float(np.min(np.abs(np.abs(z - src.disk.zc) - src.disk.radius)))
    p = _upsample_factor(src, gap)
    Mf = src.M * p
    t = 2 * np.pi * np.arange(Mf) / Mf
    nu_y = np.exp(1j * t)
    Y = src.disk.zc + src.disk.radius * nu_y
    w = 2 * np.pi * src.disk.radius / Mf / (2 * np.pi)
    d = z[:, None] - Y[None, :]
    if kind == "S":
        K = np.log(np.abs(d))
    else:
        nu_x = np.asarray(normals, dtype=complex).ravel()[:, None]
        if kind == "dS":
            G = 1.0 / np.conj(d)
        elif kind == "dD":
            G = np.conj(nu_y[None, :] / d**2)
        else:
            raise ValueError(kind)
        K = (np.conj(nu_x) * G).real
    return (K * w) @ _interp_matrix(src.M, p)


def _solve(A, b) -> DenseSystem:
    x, _, _, s = np.linalg.lstsq(A, b, rcond=None)
    cond = float(s[0] / s[-1]) if s[-1] > 0 else math.inf
    sysm = DenseSystem(A, b, x, cond)
    if sysm.degraded:
        warnings.warn(f"Nyström system condition estimate {cond:.2e} exceeds {COND_LIMIT:.0e}",
                      IllConditionedWarning, stacklevel=3)
    return sysm


def nystrom_two_disks(config: TwoDiskConfig, H: HarmonicField, M: Optional[int] = None) -> NystromSolution:
    """Collocation solve for ``(phi_1, phi_2)`` (canonical frame driver ``H``).

    On each circle ``phi_l - (1/lambda_l) d(S_i phi_i)/dnu_l = (1/lambda_l) dH/dnu_l``,
    augmented with the two mean-zero rows.
    """
    geo = config.geometry
    M = M or auto_grid_size(geo.eps, geo.r_min)
    ds = derived_scalars(config)
    grids = (BoundaryGrid(geo.B1, M), BoundaryGrid(geo.B2, M))
    A = np.zeros((2 * M + 2, 2 * M))
    b = np.zeros(2 * M + 2)
    for l, o in ((0, 1), (1, 0)):
        inv = ds.inv_lam[l]
        tgt = grids[l]
        rows = slice(l * M, (l + 1) * M)
        A[rows, l * M:(l + 1) * M] = np.eye(M)
        A[rows, o * M:(o + 1) * M] = -inv * kernel_matrix("dS", grids[o], tgt.nodes, tgt.normals_c, gap=geo.eps)
        b[rows] = inv * np.einsum("ij,ij->i", H.grad(tgt.nodes), tgt.normals)
        A[2 * M + l, l * M:(l + 1) * M] = 1.0
    sysm = _solve(A, b)
    x = sysm.solution
    return NystromSolution(BoundaryDensity(grids[0], x[:M]), BoundaryDensity(grids[1], x[M:]), sysm)


def _data_density(grid: BoundaryGrid, f) -> BoundaryDensity:
    if isinstance(f, BoundaryData):
        return f.on_grid(grid)
    A = np.asarray(f, dtype=float)
    if A.shape != (2,):
        raise ConfigurationError("boundary data must be an affine vector or BoundaryData")
    return BoundaryDensity(grid, grid.nodes @ A)


def nystrom_disk_in_disk(config: DiskInDiskConfig, f, M: Optional[int] = None) -> NystromSolution:
    """Collocation solve for ``(g, phi)`` of the Dirichlet problem.

    ``g/2 - d(S_B phi)/dnu_Omega = d(D f)/dnu_Omega`` on dOmega and
    ``phi + (1/lambda) d(S_Omega g)/dnu_B = (1/lambda) d(D f)/dnu_B`` on dB.
    The driver terms are computed by quadrature of the data.
    """
    geo = config.geometry
    M = M or auto_grid_size(geo.eps, geo.r)
    inv = inverse_lambda(config.k)
    go, gb = BoundaryGrid(geo.Omega, M), BoundaryGrid(geo.B, M)
    fd = _data_density(go, f)
    # normal derivative of D f is continuous across the circle: take the inner limit
    dD_om = np.einsum("ij,ij->i", double_layer_grad(fd, go.nodes, side=-1), go.normals)
    dD_b = np.einsum("ij,ij->i", double_layer_grad(fd, gb.nodes), gb.normals)
    A = np.zeros((2 * M + 2, 2 * M))
    b = np.zeros(2 * M + 2)
    A[:M, :M] = 0.5 * np.eye(M)
    A[:M, M:] = -kernel_matrix("dS", gb, go.nodes, go.normals_c, gap=geo.eps)
    b[:M] = dD_om
    A[M:2 * M, :M] = inv * kernel_matrix("dS", go, gb.nodes, gb.normals_c, gap=geo.eps)
    A[M:2 * M, M:] = np.eye(M)
    b[M:2 * M] = inv * dD_b
    A[2 * M, :M] = 1.0
    A[2 * M + 1, M:] = 1.0
    sysm = _solve(A, b)
    x = sysm.solution
    return NystromSolution(BoundaryDensity(go, x[:M]), BoundaryDensity(gb, x[M:]), sysm)


def nystrom_neumann_disk_in_disk(config: DiskInDiskConfig, g_data, M: Optional[int] = None) -> NystromSolution:
    """Collocation solve of the Neumann problem for ``(u|dOmega, phi)``.

    With ``h = u|dOmega`` and ``u = D h - S_Omega g + S_B phi``:
    ``-h/2 + S_B phi = S_Omega g`` on dOmega,
    ``phi - (1/lambda) d(D h)/dnu_B = -(1/lambda) d(S_Omega g)/dnu_B`` on dB,
    with ``int h = int phi = 0``.
    """
    geo = config.geometry
    M = M or auto_grid_size(geo.eps, geo.r)
    inv = inverse_lambda(config.k)
    go, gb = BoundaryGrid(geo.Omega, M), BoundaryGrid(geo.B, M)
    gd = _neumann_density(go, g_data)
    S_self = single_layer_self_matrix(go)
    A = np.zeros((2 * M + 2, 2 * M))
    b = np.zeros(2 * M + 2)
    A[:M, :M] = -0.5 * np.eye(M)
    A[:M, M:] = kernel_matrix("S", gb, go.nodes, gap=geo.eps)
    b[:M] = S_self @ gd.values
    A[M:2 * M, :M] = -inv * kernel_matrix("dD", go, gb.nodes, gb.normals_c, gap=geo.eps)
    A[M:2 * M, M:] = np.eye(M)
    b[M:2 * M] = -inv * kernel_matrix("dS", go, gb.nodes, gb.normals_c, gap=geo.eps) @ gd.values
    A[2 * M, :M] = 1.0
    A[2 * M + 1, M:] = 1.0
    sysm = _solve(A, b)
    x = sysm.solution
    return NystromSolution(BoundaryDensity(go, x[:M]), BoundaryDensity(gb, x[M:]), sysm)


def _neumann_density(grid: BoundaryGrid, g_data) -> BoundaryDensity:
    if isinstance(g_data, BoundaryData):
        dens = g_data.on_grid(grid)
    else:
        A = np.asarray(g_data, dtype=float)
        if A.shape != (2,):
            raise ConfigurationError("Neumann data must be a vector A (for A.nu) or BoundaryData")
        dens = BoundaryDensity(grid, grid.normals @ A)
    if abs(dens.mean) > 1e-12 * max(1.0, float(np.max(np.abs(dens.values)))):
        raise ConfigurationError("Neumann data must have zero mean")
    return dens


# --------------------------------------------------------------------------
# closed form for one disk
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SingleInclusionSolution:
    """``u`` for one disk of conductivity ``k`` in the uniform field ``A.(X-Z)``."""

    k: float
    disk: Disk
    A: tuple

    @property
    def sigma(self) -> float:
        return sigma_of(self.k)

    def _parts(self, X):
        w = to_complex(X) - self.disk.zc
        Ac = complex(*self.A)
        inside = np.abs(w) < self.disk.radius
        return w, Ac, inside

    def eval(self, X):
        w, Ac, inside = self._parts(X)
        lin = (np.conj(Ac) * w).real
        with np.errstate(divide="ignore", invalid="ignore"):
            ext = lin - self.sigma * self.disk.radius**2 * lin / np.abs(w) ** 2
        return np.where(inside, (1.0 - self.sigma) * lin, ext)

    def grad(self, X):
        w, Ac, inside = self._parts(X)
        # the dipole term -sigma r^2 Re(A / w) has complex gradient sigma r^2 conj(A / w^2)
        with np.errstate(divide="ignore", invalid="ignore"):
            ext = Ac + self.sigma * self.disk.radius**2 * np.conj(Ac / w**2)
        G = np.where(inside, (1.0 - self.sigma) * Ac, ext)
        return to_points(G)


def single_inclusion_closed_form(k, disk: Disk, A) -> SingleInclusionSolution:
    return SingleInclusionSolution(parse_conductivity(k), disk, tuple(float(a) for a in np.asarray(A).reshape(2)))


# --------------------------------------------------------------------------
# finite-difference harmonicity probe
# --------------------------------------------------------------------------


class HarmonicResidual(NamedTuple):
    max_residual: float
    residuals: np.ndarray
    skipped: np.ndarray


def harmonic_residual(solution, points, interfaces: Sequence[Disk] = (), h: Optional[float] = None,
                      scale: Optional[float] = None) -> HarmonicResidual:
    """Fourth-order FD Laplacian of ``solution.eval`` normalized by ``|grad u| / scale``.

    Points within ten steps of an interface are skipped and reported.
    """
    X = np.asarray(points, dtype=float).reshape(-1, 2)
    radii = [D.radius for D in interfaces]
    scale = scale or (min(radii) if radii else 1.0)
    h = h or 1e-3 * scale
    keep = np.ones(len(X), dtype=bool)
    for D in interfaces:
        keep &= np.abs(D.signed_distance(X)) >= 10 * h
    Y = X[keep]
    lap = -60.0 * solution.eval(Y)
    for e in (np.array([h, 0.0]), np.array([0.0, h])):
        lap += 16.0 * (solution.eval(Y + e) + solution.eval(Y - e))
        lap -= solution.eval(Y + 2 * e) + solution.eval(Y - 2 * e)
    lap /= 12.0 * h**2
    gnorm = np.linalg.norm(solution.grad(Y), axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        res = np.abs(lap) * scale / np.maximum(gnorm, 1e-300)
    return HarmonicResidual(float(np.max(res)) if len(res) else 0.0, res, np.flatnonzero(~keep))
