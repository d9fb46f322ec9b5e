"""Reflection-series evaluation of layer densities and gradients.

Every series here has the shape ``sum_m q^m sum_k w_k grad(h o F_{2m+k})``
where ``F_j`` composes ``j`` alternating disk inversions.  Points are pushed
along their orbits one inversion at a time while the complex derivative of
the composed map is accumulated, so each term costs O(1) per point.

An inversion ``R`` is anti-holomorphic with ``dR = c conj(dw)``,
``c = -r^2 / conj(w - Z)^2``.  If ``dF = a dz`` (even depth) the gradient of
``h o F`` is ``conj(a) grad h(F)``; if ``dF = a conj(dz)`` (odd depth) it is
``a conj(grad h(F))``.  Gradients are complex numbers ``h_x + i h_y``.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, SeriesError
from .fields import Affine, HarmonicField, disk_potentials_closed_form
from .geometry import (
    Disk,
    DiskInDiskConfig,
    TwoDiskConfig,
    derived_scalars,
    to_complex,
    to_points,
)
from .oracle import auto_grid_size
from .potentials import (
    BoundaryData,
    BoundaryDensity,
    BoundaryGrid,
    single_layer_grad,
)

MAX_TERMS = 2_000_000


@dataclass(frozen=True)
class SeriesTruncation:
    tol: float
    m_used: int
    tail_bound: float
    N: int
    partial_norm: float = 0.0
    term_norms: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    @property
    def certified(self) -> bool:
        return self.tail_bound <= self.tol * max(self.partial_norm, np.finfo(float).tiny)

    def merge(self, other: "SeriesTruncation") -> "SeriesTruncation":
        # tails and partial sizes both add, so certified parts give a certified whole
        return SeriesTruncation(
            tol=self.tol,
            m_used=max(self.m_used, other.m_used),
            tail_bound=self.tail_bound + other.tail_bound,
            N=max(self.N, other.N),
            partial_norm=self.partial_norm + other.partial_norm,
            term_norms=self.term_norms if len(self.term_norms) >= len(other.term_norms) else other.term_norms,
        )


# --------------------------------------------------------------------------
# the orbit engine
# --------------------------------------------------------------------------


class _Orbit:
    """Points pushed through alternating inversions with their differentials."""

    def __init__(self, z, disks: Sequence[Disk]):
        self.z = np.array(z, dtype=complex)
        self.a = np.ones_like(self.z)
        self.odd = False
        self.j = 0
        self.disks = tuple(disks)

    def step(self):
        D = self.disks[self.j % 2]
        w = self.z - D.zc
        cw = np.conj(w)
        self.a = -(D.radius**2) / (cw * cw) * np.conj(self.a)
        self.z = D.zc + D.radius**2 / cw
        self.odd = not self.odd
        self.j += 1

    def pulled_grad(self, leaf_grad):
        G = leaf_grad(self.z)
        return self.a * np.conj(G) if self.odd else np.conj(self.a) * G


def _tail(C, q, m, N, b, s):
    """``sum_{j>=m} C |q|^j beta_j`` with ``beta_j = b^(s (j-N))`` past ``N``."""
    q = abs(q)
    if C == 0.0 or q == 0.0:
        return 0.0
    rate = q * b**s
    if m >= N:
        t = C * q**m * b ** (s * (m - N)) / (1.0 - rate)
    else:
        head = (N - m) if q == 1.0 else (q**m - q**N) / (1.0 - q)
        t = C * (head + q**N / (1.0 - rate))
    if q < 1.0:
        t = min(t, C * q**m / (1.0 - q))
    return t


def orbit_series(
    z,
    disks: Sequence[Disk],
    offsets: dict,
    q: float,
    leaf_grad: Callable,
    *,
    N: int,
    b: float,
    s: int,
    tol: float,
    normals=None,
    first_weight: float = 1.0,
    max_terms: Optional[int] = None,
):
    """Sum ``sum_m q^m sum_k offsets[k] grad(h o F_{2m+k})`` at points ``z``.

    ``disks[0]`` is applied first.  With ``normals`` the result is the
    projection onto them (real); otherwise the complex gradient.  The m = 0
    term is multiplied by ``first_weight``.  Truncation uses the two-regime
    bound ``C |q|^m`` before ``N`` and ``C |q|^m b^(s (m-N))`` after it, with
    ``C`` the smallest constant consistent with every term seen so far.
    """
    z = np.asarray(z, dtype=complex)
    nu = None if normals is None else np.asarray(normals, dtype=complex)
    orbit = _Orbit(z, disks)
    kmax = max(offsets)
    window = deque()

    def grad_at(j):
        while orbit.j < j:
            orbit.step()
        return orbit.pulled_grad(leaf_grad)

    # window holds pulled gradients for depths 2m .. 2m+kmax
    next_depth = 0
    total = np.zeros(z.shape, dtype=float if nu is not None else complex)
    C = 0.0
    norms = []
    cap = max_terms or MAX_TERMS
    qpow = 1.0
    m = 0
    while True:
        while next_depth <= 2 * m + kmax:
            window.append((next_depth, grad_at(next_depth)))
            next_depth += 1
        while window[0][0] < 2 * m:
            window.popleft()
        term = np.zeros(z.shape, dtype=complex)
        for depth, G in window:
            w = offsets.get(depth - 2 * m)
            if w:
                term += w * G
        if nu is not None:
            term = (np.conj(nu) * term).real
        if m == 0:
            term = first_weight * term
        tnorm = float(np.max(np.abs(term))) if term.size else 0.0
        norms.append(tnorm)
        total += qpow * term
        beta = 1.0 if m < N else b ** (s * (m - N))
        if qpow != 0.0 and beta > 0.0:
            C = max(C, tnorm / beta)
        m += 1
        qpow *= q
        partial = float(np.max(np.abs(total))) if total.size else 0.0
        tail = _tail(C, q, m, N, b, s)
        if tail <= tol * partial or (partial == 0.0 and tail == 0.0):
            break
        if m >= cap:
            raise SeriesError(f"series not certified after {m} terms (tail {tail:.3e}, partial {partial:.3e})")
    trunc = SeriesTruncation(tol, m, tail, N, partial, np.asarray(norms))
    return total, trunc


def _refuse_degenerate(q, geo_eps, r_min, floor):
    if abs(abs(q) - 1.0) < 1e-15 and geo_eps < floor * r_min:
        raise SeriesError(
            f"gap {geo_eps:.3e} below the floor {floor * r_min:.3e} with |ratio| = 1: tail bound degenerate"
        )


def _default_cap(N, b, s, tol):
    rate = max(1.0 - b**s, 1e-300)
    return int(N + (math.log(1.0 / tol) + 40.0) / rate) + 100


# --------------------------------------------------------------------------
# two disks
# --------------------------------------------------------------------------


def _two_disk_setup(config: TwoDiskConfig):
    ds = derived_scalars(config)
    geo = config.geometry
    _refuse_degenerate(ds.tau, geo.eps, geo.r_min, config.eps_floor)
    return ds, geo


def two_disk_density_at(config: TwoDiskConfig, H: HarmonicField, i: int, points) -> tuple:
    """``phi_i`` at points of ``dB_i`` (canonical frame), with its truncation record."""
    ds, geo = _two_disk_setup(config)
    inv = ds.inv_lam
    l, o = (0, 1) if i == 1 else (1, 0)
    D_self, D_other = geo.disks[l], geo.disks[o]
    z = to_complex(points)
    nu = (z - D_self.zc) / D_self.radius
    if inv[l] == 0.0:
        return np.zeros(z.shape), SeriesTruncation(config.tol, 0, 0.0, ds.N)
    vals, trunc = orbit_series(
        z, (D_other, D_self), {0: 1.0, 1: -inv[o] / 2.0}, ds.tau, H._grad,
        N=ds.N, b=ds.b, s=2, tol=config.tol, normals=nu,
        max_terms=_default_cap(ds.N, ds.b, 2, config.tol),
    )
    return inv[l] * vals, trunc


def phi_two_disks(config: TwoDiskConfig, H: HarmonicField, grids=None, M: Optional[int] = None):
    """Series densities ``(phi_1, phi_2, truncation)`` on boundary grids.

    ``H`` is given in the canonical frame of ``config.geometry``.  Without
    ``grids`` the grid size defaults to one resolving the gap.
    """
    geo = config.geometry
    if grids is None:
        M = M or auto_grid_size(geo.eps, geo.r_min)
        grids = (BoundaryGrid(geo.B1, M), BoundaryGrid(geo.B2, M))
    out = []
    trunc = None
    for i, grid in enumerate(grids, start=1):
        vals, t = two_disk_density_at(config, H, i, grid.nodes)
        vals = vals - np.mean(vals)  # mean is zero analytically; strip rounding
        out.append(BoundaryDensity(grid, vals))
        trunc = t if trunc is None else trunc.merge(t)
    return out[0], out[1], trunc


def two_disk_gradient(config: TwoDiskConfig, H: HarmonicField, X) -> tuple:
    """``grad u`` at arbitrary points by the pointwise image series.

    Returns ``(grad, truncation)`` with ``grad`` of shape ``(..., 2)``; points
    on a circle are treated as lying outside it.
    """
    ds, geo = _two_disk_setup(config)
    c1, c2 = ds.inv_lam[0] / 2.0, ds.inv_lam[1] / 2.0
    B1, B2 = geo.B1, geo.B2
    z = to_complex(X)
    shape = z.shape
    z = z.ravel()
    out = H._grad(z).astype(complex)
    in1 = np.abs(z - B1.zc) < B1.radius * (1 - 1e-15)
    in2 = np.abs(z - B2.zc) < B2.radius * (1 - 1e-15)
    ext = ~(in1 | in2)
    cap = _default_cap(ds.N, ds.b, 2, config.tol)
    kw = dict(N=ds.N, b=ds.b, s=2, tol=config.tol, max_terms=cap)
    trunc = SeriesTruncation(config.tol, 0, 0.0, ds.N)
    p_disks, q_disks = (B1, B2), (B2, B1)
    c12 = c1 * c2
    plans = [
        (ext, p_disks, {1: -c1, 2: c12}),
        (ext, q_disks, {1: -c2, 2: c12}),
        (in1, q_disks, {0: -c1, 1: c12 - c2, 2: c12}),
        (in2, p_disks, {0: -c2, 1: c12 - c1, 2: c12}),
    ]
    for mask, disks, offs in plans:
        offs = {k: v for k, v in offs.items() if v != 0.0}
        if not np.any(mask) or not offs:
            continue
        vals, t = orbit_series(z[mask], disks, offs, ds.tau, H._grad, **kw)
        out[mask] += vals
        trunc = trunc.merge(t)
    return to_points(out.reshape(shape)), trunc


# --------------------------------------------------------------------------
# disk in disk
# --------------------------------------------------------------------------


class DoubleLayerDriver(NamedTuple):
    """``D_Omega f`` as a pair of closed-form fields plus the data itself."""

    inside: HarmonicField
    outside: HarmonicField
    data: BoundaryData

    def grad_c(self, z):
        # outside, D f = -(interior part) o R_Omega up to a constant, so its
        # gradient is (r^2 / conj(w)^2) conj(G_in(R_Omega z))
        z = np.asarray(z, dtype=complex)
        omega = self.data.disk
        w = z - omega.zc
        r2 = omega.radius**2
        ins = (w * np.conj(w)).real <= r2
        if np.all(ins):
            return self.inside._grad(z)
        cw = np.conj(np.where(ins, 1.0, w))
        zz = np.where(ins, z, omega.zc + r2 / cw)
        G = self.inside._grad(zz)
        return np.where(ins, G, (r2 / (cw * cw)) * np.conj(G))


def double_layer_driver(omega: Disk, f) -> DoubleLayerDriver:
    """Closed forms of ``D_Omega f`` for affine ``f`` (a 2-vector) or Fourier data."""
    if isinstance(f, BoundaryData):
        inside, outside = f.double_layer_fields()
        return DoubleLayerDriver(inside, outside, f)
    A = np.asarray(f, dtype=float)
    if A.shape != (2,):
        raise ConfigurationError("boundary data must be an affine vector or BoundaryData")
    pots = disk_potentials_closed_form(omega, A)
    return DoubleLayerDriver(pots.double_inside, pots.double_outside, BoundaryData.affine(omega, A))


def _did_setup(config: DiskInDiskConfig):
    ds = derived_scalars(config)
    geo = config.geometry
    _refuse_degenerate(ds.sigma, geo.eps, geo.r, config.eps_floor)
    cap = _default_cap(ds.N, ds.b, 1, config.tol)
    return ds, geo, cap


def disk_in_disk_density_at(config: DiskInDiskConfig, driver: DoubleLayerDriver, which: str, points,
                            form: str = "new") -> tuple:
    """``g`` (``which="g"``, points on dOmega) or ``phi`` (points on dB).

    ``form="new"`` sums the series with a single pulled-back field per term;
    ``form="sr"`` sums the equivalent two-field form and serves as a check.
    """
    ds, geo, cap = _did_setup(config)
    sig, inv = ds.sigma, ds.inv_lam[0]
    Om, B = geo.Omega, geo.B
    z = to_complex(points)
    kw = dict(N=ds.N, b=ds.b, s=1, tol=config.tol, max_terms=cap)
    if which == "g":
        nu = (z - Om.zc) / Om.radius
        if form == "new":
            if sig == 0.0:
                base = (np.conj(nu) * driver.inside._grad(z)).real
                return 2.0 * base, SeriesTruncation(config.tol, 1, 0.0, ds.N)
            vals, t = orbit_series(z, (B, Om), {0: 1.0}, sig, driver.grad_c, normals=nu,
                                   first_weight=0.5, **kw)
            return 4.0 * vals, t
        vals, t = orbit_series(z, (B, Om), {0: 1.0, 1: -sig}, sig, driver.grad_c, normals=nu, **kw)
        return 2.0 * vals, t
    if which == "phi":
        nu = (z - B.zc) / B.radius
        if inv == 0.0:
            return np.zeros(z.shape), SeriesTruncation(config.tol, 0, 0.0, ds.N)
        if form == "new":
            vals, t = orbit_series(z, (Om, B), {0: 1.0}, sig, driver.grad_c, normals=nu, **kw)
            return 2.0 * inv * vals, t
        vals, t = orbit_series(z, (Om, B), {0: 1.0, 1: -1.0}, sig, driver.grad_c, normals=nu, **kw)
        return inv * vals, t
    raise ValueError(f"unknown density {which!r}")


def densities_disk_in_disk(config: DiskInDiskConfig, f, grids=None, M: Optional[int] = None, form: str = "new"):
    """Series densities ``(g, phi, truncation)`` for Dirichlet data ``f``.

    ``f`` is a 2-vector ``A`` (data ``A.X``) or :class:`BoundaryData` on dOmega.
    """
    geo = config.geometry
    driver = f if isinstance(f, DoubleLayerDriver) else double_layer_driver(geo.Omega, f)
    if grids is None:
        M = M or auto_grid_size(geo.eps, geo.r)
        grids = (BoundaryGrid(geo.Omega, M), BoundaryGrid(geo.B, M))
    gv, tg = disk_in_disk_density_at(config, driver, "g", grids[0].nodes, form)
    pv, tp = disk_in_disk_density_at(config, driver, "phi", grids[1].nodes, form)
    g = BoundaryDensity(grids[0], gv - np.mean(gv))
    phi = BoundaryDensity(grids[1], pv - np.mean(pv))
    return g, phi, tg.merge(tp)


def disk_in_disk_gradient(config: DiskInDiskConfig, driver: DoubleLayerDriver, X) -> tuple:
    """``grad u`` for the Dirichlet problem at points of the closed disk Omega."""
    ds, geo, cap = _did_setup(config)
    sig = ds.sigma
    Om, B = geo.Omega, geo.B
    z = to_complex(X)
    shape = z.shape
    z = z.ravel()
    if np.any(np.abs(z - Om.zc) > Om.radius * (1 + 1e-12)):
        raise ConfigurationError("gradient requested outside the domain")
    inB = np.abs(z - B.zc) < B.radius * (1 - 1e-15)
    kw = dict(N=ds.N, b=ds.b, s=1, tol=config.tol, max_terms=cap)
    out = np.zeros(z.shape, dtype=complex)
    trunc = SeriesTruncation(config.tol, 0, 0.0, ds.N)
    outer = ~inB
    if np.any(outer):
        vals, t = orbit_series(z[outer], (Om, B), {0: 2.0}, sig, driver.grad_c, **kw)
        out[outer] += vals
        trunc = trunc.merge(t)
        if sig != 0.0:
            vals, t = orbit_series(z[outer], (B, Om), {1: -2.0 * sig}, sig, driver.grad_c, **kw)
            out[outer] += vals
            trunc = trunc.merge(t)
    if np.any(inB):
        vals, t = orbit_series(z[inB], (Om, B), {0: 2.0 * (1.0 - sig)}, sig, driver.grad_c, **kw)
        out[inB] += vals
        trunc = trunc.merge(t)
    return to_points(out.reshape(shape)), trunc


def disk_in_disk_trace_vector(config: DiskInDiskConfig, driver: DoubleLayerDriver, points) -> tuple:
    """Vector series ``Phi`` on dB with ``grad u|_- = (lambda - 1/2) Phi``.

    Equivalently the interior gradient ``2 (1 - sigma) sum sigma^m grad(Df o p_2m)``
    evaluated on the circle itself.
    """
    ds, geo, cap = _did_setup(config)
    kw = dict(N=ds.N, b=ds.b, s=1, tol=config.tol, max_terms=cap)
    vals, t = orbit_series(to_complex(points), (geo.Omega, geo.B), {0: 2.0 * (1.0 - ds.sigma)},
                           ds.sigma, driver.grad_c, **kw)
    return to_points(vals), t


# --------------------------------------------------------------------------
# residuals of the integral systems
# --------------------------------------------------------------------------


class Residuals(NamedTuple):
    first: float
    second: float

    @property
    def max(self) -> float:
        return max(self.first, self.second)


def _normal_part(vecs, grid: BoundaryGrid):
    return np.einsum("...i,...i->...", vecs, grid.normals)


def residual_check(config, densities, driver=None) -> Residuals:
    """Sup-norm residuals of the integral system satisfied by the densities.

    Two disks: ``phi_l - (1/lambda_l) d(S_i phi_i)/dnu_l - (1/lambda_l) dH/dnu_l``
    on each circle (``driver`` is ``H``).  Disk in disk: ``g/2 - d(S_B phi)/dnu
    - d(D f)/dnu`` on dOmega and ``phi + (1/lambda) d(S_Omega g)/dnu_B -
    (1/lambda) d(D f)/dnu_B`` on dB (``driver`` is ``f`` or a driver pair).
    Writing the equations with ``1/lambda`` keeps them finite at ``k = 1``.
    """
    ds = derived_scalars(config)
    if isinstance(config, TwoDiskConfig):
        phi1, phi2 = densities[:2]
        H = driver if driver is not None else Affine((0.0, 0.0))
        res = []
        for dens, other, inv in ((phi1, phi2, ds.inv_lam[0]), (phi2, phi1, ds.inv_lam[1])):
            grid = dens.grid
            cross = _normal_part(single_layer_grad(other, grid.nodes), grid)
            dH = _normal_part(H.grad(grid.nodes), grid)
            r = dens.values - inv * cross - inv * dH
            res.append(float(np.max(np.abs(r))))
        return Residuals(*res)
    g, phi = densities[:2]
    inv = ds.inv_lam[0]
    if driver is None:
        driver = np.zeros(2)
    drv = driver if isinstance(driver, DoubleLayerDriver) else double_layer_driver(config.geometry.Omega, driver)
    go, gb = g.grid, phi.grid
    dD_om = _normal_part(to_points(drv.inside._grad(go.nodes_c)), go)
    dD_b = _normal_part(to_points(drv.inside._grad(gb.nodes_c)), gb)
    r1 = 0.5 * g.values - _normal_part(single_layer_grad(phi, go.nodes), go) - dD_om
    r2 = phi.values + inv * _normal_part(single_layer_grad(g, gb.nodes), gb) - inv * dD_b
    return Residuals(float(np.max(np.abs(r1))), float(np.max(np.abs(r2))))
