"""Full solutions of the three transmission problems.

Solutions hold their driver in the canonical frame of the geometry; every
public method takes points and returns vectors in the caller's frame.
Boundary traces come from the algebraic trace identities applied to
pointwise series, never from near-singular quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Optional

import numpy as np

from .densities import (
    DoubleLayerDriver,
    SeriesTruncation,
    densities_disk_in_disk,
    disk_in_disk_density_at,
    disk_in_disk_gradient,
    double_layer_driver,
    orbit_series,
    phi_two_disks,
    two_disk_gradient,
    _default_cap,
    _did_setup,
    _two_disk_setup,
)
from .errors import ConfigurationError
from .fields import Affine, HarmonicField, rigid
from .geometry import (
    Disk,
    DiskInDiskConfig,
    DiskInDiskGeometry,
    Isometry,
    TwoDiskConfig,
    derived_scalars,
    to_complex,
    to_points,
)
from .oracle import auto_grid_size
from .potentials import (
    BoundaryData,
    BoundaryGrid,
    single_layer_conj,
    single_layer_eval,
    single_layer_grad,
)

SNAP = 1e-13


class CircleTrace(NamedTuple):
    """One-sided gradient trace on a circle at canonical angles ``theta``."""

    theta: np.ndarray
    normal: np.ndarray
    tangential: np.ndarray

    @property
    def magnitude(self) -> np.ndarray:
        return np.hypot(self.normal, self.tangential)

    def vectors_c(self) -> np.ndarray:
        nu = np.exp(1j * np.asarray(self.theta))
        return nu * (self.normal + 1j * self.tangential)


class SupNorm(NamedTuple):
    value: float
    location: np.ndarray


def _circle_points(disk: Disk, theta) -> np.ndarray:
    return disk.zc + disk.radius * np.exp(1j * np.asarray(theta, dtype=float))


def gap_angles(n_uniform: int, width: float, n_cluster: int = 65, center: float = 0.0) -> np.ndarray:
    """Uniform angles plus a cluster of half-width ``width`` around ``center``."""
    base = 2 * np.pi * np.arange(n_uniform) / n_uniform
    cluster = center + width * np.linspace(-1.0, 1.0, n_cluster)
    return np.mod(np.concatenate([base, cluster]), 2 * np.pi)


class _Base:
    frame: Isometry

    def _canon(self, X):
        return self.frame.to_canonical(to_complex(X))

    def _out_vec(self, G):
        return to_points(self.frame.vector_from_canonical(G))

    def _out_point(self, z):
        return to_points(self.frame.from_canonical(z))


# --------------------------------------------------------------------------
# two disks
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TwoDiskSolution(_Base):
    """``u = H + S_B1 phi_1 + S_B2 phi_2`` for two disks in the plane."""

    config: TwoDiskConfig
    H: HarmonicField  # canonical frame
    M: int

    @property
    def frame(self) -> Isometry:
        return self.config.geometry.frame

    @property
    def geometry(self):
        return self.config.geometry

    @cached_property
    def scalars(self):
        return derived_scalars(self.config)

    @cached_property
    def _densities(self):
        geo = self.geometry
        grids = (BoundaryGrid(geo.B1, self.M), BoundaryGrid(geo.B2, self.M))
        return phi_two_disks(self.config, self.H, grids)

    @property
    def densities(self):
        return self._densities[:2]

    @property
    def truncation(self) -> SeriesTruncation:
        return self._densities[2]

    @cached_property
    def conjugate_solution(self) -> "TwoDiskSolution":
        """``v`` with conductivities ``1/k_i`` and the conjugate driver."""
        return TwoDiskSolution(self.config.dual(), self.H.conjugate(), self.M)

    def region(self, X) -> np.ndarray:
        z = self._canon(X)
        geo = self.geometry
        out = np.full(z.shape, "exterior", dtype=object)
        out[np.abs(z - geo.B1.zc) < geo.B1.radius * (1 - SNAP)] = "B1"
        out[np.abs(z - geo.B2.zc) < geo.B2.radius * (1 - SNAP)] = "B2"
        return out

    def eval(self, X):
        z = self._canon(X)
        p1, p2 = self.densities
        P = to_points(z)
        return self.H._value(z) + single_layer_eval(p1, P) + single_layer_eval(p2, P)

    def grad(self, X):
        z = self._canon(X)
        p1, p2 = self.densities
        P = to_points(z)
        G = to_complex(to_points(self.H._grad(z)) + single_layer_grad(p1, P) + single_layer_grad(p2, P))
        return self._out_vec(G)

    def grad_series(self, X):
        """Gradient from the pointwise image series (no quadrature)."""
        z = self._canon(X)
        G, _ = two_disk_gradient(self.config, self.H, to_points(z))
        return self._out_vec(to_complex(G))

    def reduced_density(self, i: int, theta) -> tuple:
        """``psi_i = lambda_i phi_i`` on ``dB_i``, finite for every conductivity."""
        disk = self.geometry.disks[i - 1]
        return _reduced_two_disk(self.config, self.H, i, to_points(_circle_points(disk, theta)))

    def normal_trace(self, i: int, theta, side: int):
        """``du/dnu_i`` on ``dB_i`` from outside (``side=+1``) or inside (``-1``)."""
        psi, _ = self.reduced_density(i, theta)
        c = self.scalars.inv_lam[i - 1] / 2.0
        return (1.0 + side * c) * psi

    def tangential_trace(self, i: int, theta):
        """``du/dT = -dv/dnu|_+`` with ``v`` the conjugate solution."""
        return -self.conjugate_solution.normal_trace(i, theta, +1)

    def trace(self, i: int, theta, side: int) -> CircleTrace:
        theta = np.asarray(theta, dtype=float)
        return CircleTrace(theta, self.normal_trace(i, theta, side), self.tangential_trace(i, theta))

    def critical_gradients(self) -> tuple:
        """``|grad u|_+(X1)`` and ``|grad u|_+(X2)``."""
        a = self.trace(1, np.array([0.0]), +1).magnitude[0]
        b = self.trace(2, np.array([np.pi]), +1).magnitude[0]
        return float(a), float(b)


def _reduced_two_disk(config: TwoDiskConfig, H: HarmonicField, i: int, points):
    ds = derived_scalars(config)
    inv = ds.inv_lam
    l, o = (0, 1) if i == 1 else (1, 0)
    geo = config.geometry
    D_self, D_other = geo.disks[l], geo.disks[o]
    z = to_complex(points)
    nu = (z - D_self.zc) / D_self.radius
    offs = {0: 1.0}
    if inv[o] != 0.0:
        offs[1] = -inv[o] / 2.0
    return orbit_series(z, (D_other, D_self), offs, ds.tau, H._grad, N=ds.N, b=ds.b, s=2,
                        tol=config.tol, normals=nu, max_terms=_default_cap(ds.N, ds.b, 2, config.tol))


def solve_two_disks(config: TwoDiskConfig, H: HarmonicField, M: Optional[int] = None) -> TwoDiskSolution:
    """Solution for driver ``H`` given in the caller's frame."""
    geo = config.geometry
    _two_disk_setup(config)  # validates the configuration eagerly
    M = M or auto_grid_size(geo.eps, geo.r_min)
    return TwoDiskSolution(config, rigid(H, geo.frame), M)


def boundary_gradient_two_disks(solution: TwoDiskSolution, side: int, theta=None) -> tuple:
    """Normal and tangential traces on both circles at grid angles (or ``theta``)."""
    if theta is None:
        theta = 2 * np.pi * np.arange(solution.M) / solution.M
    return tuple(solution.trace(i, theta, side) for i in (1, 2))


# --------------------------------------------------------------------------
# disk in disk: Dirichlet
# --------------------------------------------------------------------------


def _canonical_data(geo: DiskInDiskGeometry, f, kind: str) -> BoundaryData:
    """Boundary data expressed on the canonical dOmega.

    ``f`` is a vector ``A`` (Dirichlet data ``A.X``, Neumann data ``A.nu``),
    a :class:`BoundaryData` or a sequence of Fourier coefficients in the
    caller's angle.
    """
    frame = geo.frame
    omega = geo.Omega
    if isinstance(f, BoundaryData):
        coeffs = f.coeffs
    else:
        arr = np.asarray(f)
        if arr.shape == (2,) and np.isrealobj(arr):
            A = complex(*arr.astype(float))
            Ac = complex(frame.vector_to_canonical(A))
            if kind == "dirichlet":
                const = (np.conj(A) * frame.origin).real
                return BoundaryData(omega, (const, geo.rho * np.conj(Ac)))
            return BoundaryData(omega, (0.0, np.conj(Ac)))
        coeffs = tuple(complex(c) for c in arr.ravel())
    rot = frame.angle
    return BoundaryData(omega, tuple(c * np.exp(1j * n * rot) for n, c in enumerate(coeffs)))


@dataclass(frozen=True, eq=False)
class DirichletSolution(_Base):
    """``u = D f - S_Omega g + S_B phi`` in the disk Omega."""

    config: DiskInDiskConfig
    driver: DoubleLayerDriver  # canonical
    M: int

    @property
    def frame(self):
        return self.config.geometry.frame

    @property
    def geometry(self):
        return self.config.geometry

    @cached_property
    def scalars(self):
        return derived_scalars(self.config)

    @cached_property
    def _densities(self):
        geo = self.geometry
        grids = (BoundaryGrid(geo.Omega, self.M), BoundaryGrid(geo.B, self.M))
        return densities_disk_in_disk(self.config, self.driver, grids)

    @property
    def densities(self):
        return self._densities[:2]

    @property
    def truncation(self):
        return self._densities[2]

    def region(self, X) -> np.ndarray:
        z = self._canon(X)
        geo = self.geometry
        out = np.full(z.shape, "outside", dtype=object)
        out[np.abs(z) <= geo.rho * (1 + SNAP)] = "annulus"
        out[np.abs(z - geo.B.zc) < geo.r * (1 - SNAP)] = "B"
        return out

    def _check_inside(self, z):
        if np.any(np.abs(z) > self.geometry.rho * (1 + SNAP)):
            raise ConfigurationError("points must lie in the closed domain disk")

    def eval(self, X):
        z = self._canon(X)
        self._check_inside(z)
        g, phi = self.densities
        P = to_points(z)
        return self.driver.inside._value(z) - single_layer_eval(g, P, side=-1) + single_layer_eval(phi, P)

    def grad(self, X):
        z = self._canon(X)
        self._check_inside(z)
        g, phi = self.densities
        P = to_points(z)
        G = to_points(self.driver.inside._grad(z)) - single_layer_grad(g, P, side=-1) + single_layer_grad(phi, P)
        return self._out_vec(to_complex(G))

    def grad_series(self, X):
        z = self._canon(X)
        self._check_inside(z)
        G, _ = disk_in_disk_gradient(self.config, self.driver, to_points(z))
        return self._out_vec(to_complex(G))

    # traces -------------------------------------------------------------

    def _inner_vector_series(self, theta):
        """``sum sigma^m grad(Df o p_2m)`` on dB (complex, canonical)."""
        ds, geo, cap = _did_setup(self.config)
        z = _circle_points(geo.B, theta)
        return orbit_series(z, (geo.Omega, geo.B), {0: 1.0}, ds.sigma, self.driver.grad_c,
                            N=ds.N, b=ds.b, s=1, tol=self.config.tol, max_terms=cap)

    def inclusion_traces(self, theta) -> tuple:
        """Outer and inner gradient traces on dB; normal parts are ``(lambda +- 1/2) phi``."""
        theta = np.asarray(theta, dtype=float)
        S, _ = self._inner_vector_series(theta)
        nu = np.exp(1j * theta)
        psi = (np.conj(nu) * S).real
        tan = 2.0 * (1.0 - self.scalars.sigma) * (np.conj(1j * nu) * S).real
        sig = self.scalars.sigma
        return (CircleTrace(theta, 2.0 * (1.0 + sig) * psi, tan),
                CircleTrace(theta, 2.0 * (1.0 - sig) * psi, tan))

    def inclusion_trace(self, theta, side: int) -> CircleTrace:
        return self.inclusion_traces(theta)[0 if side > 0 else 1]

    def boundary_trace(self, theta) -> CircleTrace:
        """Interior gradient trace on dOmega: ``(g, df/dT)``."""
        theta = np.asarray(theta, dtype=float)
        geo = self.geometry
        pts = to_points(_circle_points(geo.Omega, theta))
        gv, _ = disk_in_disk_density_at(self.config, self.driver, "g", pts)
        fT = self.driver.data.tangential_derivative().values(theta)
        return CircleTrace(theta, gv, fT)

    def critical_gradients(self) -> tuple:
        """``|grad u|_+(X1)`` on dB and ``|grad u|_-(X2)`` on dOmega."""
        a = self.inclusion_trace(np.array([0.0]), +1).magnitude[0]
        b = self.boundary_trace(np.array([0.0])).magnitude[0]
        return float(a), float(b)


def solve_dirichlet_disk_in_disk(config: DiskInDiskConfig, f, M: Optional[int] = None) -> DirichletSolution:
    """Dirichlet solution for data ``f`` (vector ``A`` for ``A.X``, or Fourier data)."""
    if config.boundary != "dirichlet":
        raise ConfigurationError("configuration is not a Dirichlet problem")
    geo = config.geometry
    _did_setup(config)
    data = _canonical_data(geo, f, "dirichlet")
    driver = double_layer_driver(geo.Omega, data)
    M = M or auto_grid_size(geo.eps, geo.r)
    return DirichletSolution(config, driver, M)


# --------------------------------------------------------------------------
# disk in disk: Neumann
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NeumannSolution(_Base):
    """Neumann solution recovered from the conjugate Dirichlet problem.

    ``grad u = -rot90(grad v)`` in the annulus and ``-rot90(grad v) / k`` in B,
    where ``v`` solves the Dirichlet problem with conductivity ``1/k`` and data
    ``G`` (``dG/dT = g``, mean zero).
    """

    config: DiskInDiskConfig
    data: BoundaryData  # canonical Neumann data
    conjugate_solution: DirichletSolution
    M: int

    @property
    def frame(self):
        return self.config.geometry.frame

    @property
    def geometry(self):
        return self.config.geometry

    @cached_property
    def scalars(self):
        return derived_scalars(self.config)

    @property
    def densities(self):
        return self.conjugate_solution.densities

    @property
    def truncation(self):
        return self.conjugate_solution.truncation

    region = DirichletSolution.region
    _check_inside = DirichletSolution._check_inside

    def _conj_v(self, z):
        v = self.conjugate_solution
        g, phi = v.densities
        P = to_points(z)
        return v.driver.inside.conjugate()._value(z) - single_layer_conj(g, P, side=-1) + single_layer_conj(phi, P)

    @cached_property
    def _trace_B(self):
        """Fourier data of ``u`` on dB, used for the interior extension."""
        grid = BoundaryGrid(self.geometry.B, self.M)
        vals = -self._conj_v(grid.nodes_c)
        return BoundaryData.from_samples(self.geometry.B, vals)

    @cached_property
    def constant(self) -> float:
        """Additive constant making the trace on dOmega mean-zero."""
        grid = BoundaryGrid(self.geometry.Omega, self.M)
        return float(np.mean(self._conj_v(grid.nodes_c)))

    def eval(self, X):
        z = self._canon(X)
        self._check_inside(z)
        out = np.empty(z.shape)
        inB = np.abs(z - self.geometry.B.zc) < self.geometry.r * (1 - SNAP)
        if np.any(~inB):
            out[~inB] = -self._conj_v(z[~inB])
        if np.any(inB):
            out[inB] = self._trace_B.harmonic_extension()._value(z[inB])
        return out + self.constant

    def grad(self, X):
        z = self._canon(X)
        self._check_inside(z)
        inB = np.abs(z - self.geometry.B.zc) < self.geometry.r * (1 - SNAP)
        G = np.empty(z.shape, dtype=complex)
        if np.any(~inB):
            Gv = to_complex(self.frame.vector_to_canonical(to_complex(self.conjugate_solution.grad(
                self._out_point(z[~inB])))))
            G[~inB] = -1j * Gv
        if np.any(inB):
            G[inB] = self._trace_B.harmonic_extension()._grad(z[inB])
        return self._out_vec(G)

    def grad_series(self, X):
        z = self._canon(X)
        self._check_inside(z)
        v = self.conjugate_solution
        inB = np.abs(z - self.geometry.B.zc) < self.geometry.r * (1 - SNAP)
        G = np.empty(z.shape, dtype=complex)
        if np.any(~inB):
            Gv, _ = disk_in_disk_gradient(v.config, v.driver, to_points(z[~inB]))
            G[~inB] = -1j * to_complex(Gv)
        if np.any(inB):
            ds, geo, cap = _did_setup(v.config)
            k = self.config.k
            w = 0.0 if math.isinf(k) else 4.0 / (k + 1.0)
            vals, _ = orbit_series(z[inB], (geo.Omega, geo.B), {0: 1.0}, ds.sigma, v.driver.grad_c,
                                   N=ds.N, b=ds.b, s=1, tol=v.config.tol, max_terms=cap)
            G[inB] = -1j * w * vals
        return self._out_vec(G)

    def inclusion_traces(self, theta) -> tuple:
        """Outer and inner gradient traces on dB from the conjugate series."""
        theta = np.asarray(theta, dtype=float)
        v = self.conjugate_solution
        S, _ = v._inner_vector_series(theta)
        nu = np.exp(1j * theta)
        psi = (np.conj(nu) * S).real
        tan = (np.conj(1j * nu) * S).real
        k = self.config.k
        w = 0.0 if math.isinf(k) else 4.0 / (k + 1.0)  # 2 (1 - sigma_v) / k
        tangential = -w * psi  # du/dT = -dv/dnu|_+, continuous across dB
        outer = CircleTrace(theta, 2.0 * (1.0 - v.scalars.sigma) * tan, tangential)  # du/dnu = dv/dT
        inner = CircleTrace(theta, w * tan, tangential)
        return outer, inner

    def inclusion_trace(self, theta, side: int) -> CircleTrace:
        return self.inclusion_traces(theta)[0 if side > 0 else 1]

    def boundary_trace(self, theta) -> CircleTrace:
        theta = np.asarray(theta, dtype=float)
        vt = self.conjugate_solution.boundary_trace(theta)
        return CircleTrace(theta, self.data.values(theta), -vt.normal)

    def critical_gradients(self) -> tuple:
        a = self.inclusion_trace(np.array([0.0]), +1).magnitude[0]
        b = self.boundary_trace(np.array([0.0])).magnitude[0]
        return float(a), float(b)


def solve_neumann_disk_in_disk(config: DiskInDiskConfig, g_data, M: Optional[int] = None) -> NeumannSolution:
    """Neumann solution for data ``g`` (vector ``A`` for ``A.nu``, or Fourier data)."""
    if config.boundary != "neumann":
        raise ConfigurationError("configuration is not a Neumann problem")
    geo = config.geometry
    data = _canonical_data(geo, g_data, "neumann")
    G = data.tangential_antiderivative()  # raises on nonzero mean
    dual = config.dual()
    _did_setup(dual)
    M = M or auto_grid_size(geo.eps, geo.r)
    v = DirichletSolution(dual, double_layer_driver(geo.Omega, G), M)
    return NeumannSolution(config, data, v, M)


# --------------------------------------------------------------------------
# sup norm
# --------------------------------------------------------------------------


def _gap_width(geo) -> float:
    if isinstance(geo, DiskInDiskGeometry):
        return 8.0 * math.sqrt(geo.eps) / geo.r_upper
    return 8.0 * math.sqrt(geo.eps) * geo.r_star


def grad_sup_norm(solution, region: str = "all", sampling: int = 512) -> SupNorm:
    """Estimate ``sup |grad u|`` from boundary traces plus the gap axis.

    ``|grad u|`` is largest on the interfaces (and, for two disks, possibly at
    infinity where it tends to ``|grad H|``).  Boundary angles are uniform
    plus a cluster around the gap; the segment between the critical points
    is sampled as well.  The location is returned in the caller's frame.
    """
    geo = solution.geometry
    width = _gap_width(geo)
    best = (-1.0, 0j)

    def consider(mag, pts):
        nonlocal best
        j = int(np.argmax(mag))
        if mag[j] > best[0]:
            best = (float(mag[j]), complex(pts[j]))

    if isinstance(solution, TwoDiskSolution):
        for i, center in ((1, 0.0), (2, np.pi)):
            disk = geo.disks[i - 1]
            th = gap_angles(sampling, width / disk.radius, center=center)
            pts = _circle_points(disk, th)
            for side in (+1, -1):
                consider(solution.trace(i, th, side).magnitude, pts)
        seg = np.linspace(geo.r1, geo.r1 + geo.eps, 33)[1:-1] + 0j
        G, _ = two_disk_gradient(solution.config, solution.H, to_points(seg))
        consider(np.linalg.norm(G, axis=-1), seg)
        far = abs(complex(*to_points(solution.H._grad(np.array([1e6 + 0j])))[0]))
        if far > best[0] and isinstance(solution.H, Affine):
            best = (far, complex(1e6))
    else:
        th = gap_angles(sampling, width / geo.r, center=0.0)
        pts = _circle_points(geo.B, th)
        for tr in solution.inclusion_traces(th):
            consider(tr.magnitude, pts)
        th = gap_angles(sampling, width / geo.rho, center=0.0)
        consider(solution.boundary_trace(th).magnitude, _circle_points(geo.Omega, th))
        seg = np.linspace(geo.rho - geo.eps, geo.rho, 33)[1:-1] + 0j
        consider(np.linalg.norm(solution.grad_series(solution._out_point(seg)), axis=-1), seg)
    return SupNorm(best[0], solution._out_point(np.array(best[1])))


def critical_terms(solution) -> int:
    """Series terms consumed by the trace at ``X1`` (the slowest point)."""
    if isinstance(solution, TwoDiskSolution):
        return solution.reduced_density(1, np.array([0.0]))[1].m_used
    sol = solution.conjugate_solution if isinstance(solution, NeumannSolution) else solution
    return sol._inner_vector_series(np.array([0.0]))[1].m_used
