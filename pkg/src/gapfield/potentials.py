"""Single and double layer potentials on circles.

Densities live on equispaced grids, where the trapezoid rule is spectrally
accurate for smooth periodic integrands.  Targets close to the circle are
handled by trigonometric upsampling of the density; past the upsampling cap,
and on the circle itself, the layer potentials of the density's trigonometric
interpolant are summed exactly mode by mode.

Fourier data on a circle of radius ``r`` centred at ``Z`` use the convention
``f(theta) = Re sum_{n>=0} c_n e^{i n theta}`` with ``c_0`` real.  For such data
and ``X = Z + R e^{i theta}``:

* ``S f(X) = r [c_0 ln max(R, r) - sum_n Re(c_n q_n) / (2n)]``,
* ``D f(X) = c_0 + sum_n Re(c_n q_n) / 2`` inside and ``-sum_n Re(c_n q_n) / 2`` outside,

with ``q_n = ((X-Z)/r)^n`` inside and ``(r / conj(X-Z))^n`` outside.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError
from .fields import HarmonicField, HarmonicPoly, Pullback, Scale
from .geometry import Disk, to_complex, to_points

UPSAMPLE_CAP = 64
NEAR_FACTOR = 5.0
_CHUNK = 2048


@dataclass(frozen=True)
class BoundaryGrid:
    disk: Disk
    M: int = 256

    def __post_init__(self):
        M = int(self.M)
        if M < 16 or M & (M - 1):
            raise ConfigurationError(f"grid size must be a power of two >= 16, got {self.M}")
        object.__setattr__(self, "M", M)

    @property
    def theta(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.M) / self.M

    @property
    def normals_c(self) -> np.ndarray:
        return np.exp(1j * self.theta)

    @property
    def nodes_c(self) -> np.ndarray:
        return self.disk.zc + self.disk.radius * self.normals_c

    @property
    def nodes(self) -> np.ndarray:
        return to_points(self.nodes_c)

    @property
    def normals(self) -> np.ndarray:
        return to_points(self.normals_c)

    @property
    def weight(self) -> float:
        return 2 * np.pi * self.disk.radius / self.M

    @property
    def spacing(self) -> float:
        return self.weight


def fourier_coefficients(values: np.ndarray) -> np.ndarray:
    """``c_n`` (n = 0..M/2) of the trigonometric interpolant of real samples."""
    M = len(values)
    F = np.fft.rfft(values) / M
    c = 2.0 * F
    c[0] = F[0].real
    if M % 2 == 0:
        c[-1] = F[-1].real  # Nyquist mode is a pure cosine
    return c


def fourier_values(c: np.ndarray, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    n = np.arange(len(c))
    return np.real(np.exp(1j * np.multiply.outer(theta, n)) @ c)


def spectral_derivative(values: np.ndarray) -> np.ndarray:
    """``d/dtheta`` of the trigonometric interpolant at the nodes."""
    M = len(values)
    F = np.fft.rfft(values)
    k = np.arange(len(F))
    D = 1j * k * F
    if M % 2 == 0:
        D[-1] = 0.0
    return np.fft.irfft(D, n=M)


def spectral_antiderivative(values: np.ndarray) -> np.ndarray:
    """Mean-zero antiderivative in ``theta``; requires mean-zero input."""
    M = len(values)
    F = np.fft.rfft(values)
    if abs(F[0]) > 1e-10 * max(1.0, np.max(np.abs(F))):
        raise ConfigurationError("antiderivative of data with nonzero mean is not periodic")
    k = np.arange(len(F))
    out = np.zeros_like(F)
    out[1:] = F[1:] / (1j * k[1:])
    if M % 2 == 0:
        out[-1] = 0.0
    return np.fft.irfft(out, n=M)


def upsample(values: np.ndarray, factor: int) -> np.ndarray:
    M = len(values)
    F = np.fft.rfft(values)
    if M % 2 == 0:
        F[-1] *= 0.5  # split the Nyquist mode symmetrically
    G = np.zeros(M * factor // 2 + 1, dtype=complex)
    G[: len(F)] = F
    return np.fft.irfft(G, n=M * factor) * factor


@dataclass(frozen=True)
class BoundaryDensity:
    grid: BoundaryGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).copy()
        if v.shape != (self.grid.M,):
            raise ValueError(f"density needs {self.grid.M} samples, got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def integral(self) -> float:
        return float(np.sum(self.values) * self.grid.weight)

    @property
    def coeffs(self) -> np.ndarray:
        return fourier_coefficients(self.values)

    def mean_zero(self) -> "BoundaryDensity":
        return BoundaryDensity(self.grid, self.values - self.mean)

    def at(self, theta) -> np.ndarray:
        return fourier_values(self.coeffs, theta)


# --------------------------------------------------------------------------
# exact layer potentials of trigonometric data
# --------------------------------------------------------------------------


def _side_mask(z, disk, side):
    R = np.abs(z - disk.zc)
    on = np.abs(R - disk.radius) <= 1e-13 * disk.radius
    inside = R < disk.radius
    if side is not None:
        inside = np.where(on, side < 0, inside)
    return inside, on


def spectral_layer(kind: str, c: np.ndarray, disk: Disk, z, what: str = "value", side=None):
    """Layer potential of Fourier data ``c`` at complex targets ``z``.

    ``kind`` is ``"single"`` or ``"double"``; ``what`` is ``"value"``,
    ``"grad"`` (complex ``f_x + i f_y``) or ``"conj"`` (harmonic conjugate,
    zero at the center / at infinity).  Targets on the circle use the inside
    limit when ``side < 0`` and the outside limit otherwise.
    """
    z = np.asarray(z, dtype=complex)
    shape = z.shape
    z = z.ravel()
    c = np.asarray(c, dtype=complex)
    r = disk.radius
    inside, _ = _side_mask(z, disk, -1 if side is not None and side < 0 else +1)
    w = z - disk.zc
    n = np.arange(1, len(c))
    cn = c[1:]
    c0 = c[0].real
    if what == "conj" and kind == "single" and abs(c0) > 1e-12 * max(1.0, np.max(np.abs(c))):
        raise ConfigurationError("single layer of a density with nonzero mean has no global conjugate")
    out = np.empty(len(z), dtype=complex if what == "grad" else float)
    step = max(1, (1 << 21) // max(1, len(n)))
    for lo in range(0, len(z), step):
        sl = slice(lo, lo + step)
        wi, ins = w[sl], inside[sl]
        with np.errstate(divide="ignore", invalid="ignore"):
            zeta = np.where(ins, wi / r, r / np.conj(np.where(wi == 0, 1.0, wi)))
        P = np.power(zeta[:, None], n[None, :])
        if what == "value":
            if kind == "single":
                R = np.maximum(np.abs(wi), r)
                val = r * (c0 * np.log(R) - (P * (cn / (2 * n))).real.sum(axis=1))
            else:
                s = 0.5 * (P * cn).real.sum(axis=1)
                val = np.where(ins, c0 + s, -s)
            out[sl] = val
        elif what == "conj":
            if kind == "single":
                t = (P * (cn / (2 * n))).imag.sum(axis=1) * r
                val = np.where(ins, -t, t)
            else:
                t = 0.5 * (P * cn).imag.sum(axis=1)
                val = t
            out[sl] = val
        elif what == "grad":
            # zeta^(n-1) inside, zeta^(n+1) outside
            Pm = np.concatenate([np.ones((len(wi), 1)), P[:, :-1]], axis=1) if len(n) else P
            Pp = P * zeta[:, None]
            if kind == "single":
                g_in = -0.5 * np.conj((Pm * cn).sum(axis=1))
                g_out = 0.5 * (Pp * cn).sum(axis=1)
                with np.errstate(divide="ignore", invalid="ignore"):
                    g_out = g_out + r * c0 / np.conj(np.where(wi == 0, 1.0, wi))
            else:
                g_in = np.conj((Pm * (0.5 * n * cn)).sum(axis=1)) / r
                g_out = (Pp * (0.5 * n * cn)).sum(axis=1) / r
            out[sl] = np.where(ins, g_in, g_out)
        else:
            raise ValueError(f"unknown quantity {what!r}")
    return out.reshape(shape)


# --------------------------------------------------------------------------
# trapezoid quadrature with near-boundary upsampling
# --------------------------------------------------------------------------


def _trapezoid(kind, values, disk, z, what):
    M = len(values)
    t = 2 * np.pi * np.arange(M) / M
    nu = np.exp(1j * t)
    Y = disk.zc + disk.radius * nu
    wts = values * (2 * np.pi * disk.radius / M) / (2 * np.pi)
    out = np.empty(len(z), dtype=complex if what == "grad" else float)
    for lo in range(0, len(z), max(1, _CHUNK * 256 // M)):
        sl = slice(lo, lo + max(1, _CHUNK * 256 // M))
        d = z[sl, None] - Y[None, :]
        if kind == "single":
            if what == "value":
                out[sl] = np.log(np.abs(d)) @ wts
            else:
                out[sl] = (1.0 / np.conj(d)) @ wts
        else:
            # <Y - X, nu_Y> / |X - Y|^2 = Re(nu / (Y - X))
            if what == "value":
                out[sl] = np.real(nu[None, :] / (-d)) @ wts
            else:
                out[sl] = np.conj(nu[None, :] / d**2) @ wts
    return out


def _route(kind, density: BoundaryDensity, X, what, method="auto", side=None):
    grid = density.grid
    disk = grid.disk
    z = to_complex(X)
    shape = z.shape
    z = z.ravel()
    dist = np.abs(np.abs(z - disk.zc) - disk.radius)
    h = grid.spacing
    out = np.empty(len(z), dtype=complex if what == "grad" else float)
    if method == "spectral":
        out[:] = spectral_layer(kind, density.coeffs, disk, z, what, side)
        return out.reshape(shape)
    if method == "quadrature":
        if np.any(dist <= 1e-13 * disk.radius):
            raise DomainError("quadrature route cannot evaluate on the circle")
        out[:] = _trapezoid(kind, density.values, disk, z, what)
        return out.reshape(shape)
    far = dist >= NEAR_FACTOR * h
    if np.any(far):
        out[far] = _trapezoid(kind, density.values, disk, z[far], what)
    near = ~far
    if np.any(near):
        need = h * NEAR_FACTOR / np.maximum(dist[near], h * NEAR_FACTOR / (4 * UPSAMPLE_CAP))
        p = 2 ** np.ceil(np.log2(np.maximum(need, 1.0))).astype(int)
        idx = np.flatnonzero(near)
        spectral = p > UPSAMPLE_CAP
        if np.any(spectral):
            sel = idx[spectral]
            out[sel] = spectral_layer(kind, density.coeffs, disk, z[sel], what, side)
        for factor in np.unique(p[~spectral]):
            sel = idx[(p == factor) & ~spectral]
            fine = upsample(density.values, int(factor))
            out[sel] = _trapezoid(kind, fine, disk, z[sel], what)
    return out.reshape(shape)


def single_layer_eval(density: BoundaryDensity, X, method: str = "auto", side=None):
    """``(1/2pi) int ln|X-Y| phi(Y) dsigma(Y)``."""
    return _route("single", density, X, "value", method, side)


def single_layer_grad(density: BoundaryDensity, X, method: str = "auto", side=None):
    """Gradient of the single layer, shape ``(..., 2)``.

    On the circle the one-sided limit selected by ``side`` (``+1`` outside,
    ``-1`` inside) is returned.
    """
    return to_points(_route("single", density, X, "grad", method, side))


def double_layer_eval(density: BoundaryDensity, X, method: str = "auto", side=None):
    """``(1/2pi) int <Y-X, nu_Y> / |X-Y|^2 phi(Y) dsigma(Y)``."""
    return _route("double", density, X, "value", method, side)


def double_layer_grad(density: BoundaryDensity, X, method: str = "auto", side=None):
    return to_points(_route("double", density, X, "grad", method, side))


def single_layer_conj(density: BoundaryDensity, X, side=None):
    """Harmonic conjugate of the single layer of a mean-zero density."""
    return spectral_layer("single", density.coeffs, density.grid.disk, to_complex(X), "conj", side)


def double_layer_conj(density: BoundaryDensity, X, side=None):
    return spectral_layer("double", density.coeffs, density.grid.disk, to_complex(X), "conj", side)


def kstar_apply(density: BoundaryDensity) -> BoundaryDensity:
    """``K*`` on a circle: the constant ``(1/(4 pi r)) int phi``."""
    r = density.grid.disk.radius
    val = density.integral / (4 * np.pi * r)
    return BoundaryDensity(density.grid, np.full(density.grid.M, val))


def single_layer_boundary_grad(density: BoundaryDensity, side: int):
    """One-sided gradient of ``S phi`` at the grid nodes.

    Normal part from the jump relation ``(+-1/2 + K*) phi``; tangential part
    from spectral differentiation of the on-circle trace.
    """
    grid = density.grid
    normal = side * 0.5 * density.values + kstar_apply(density).values
    trace = single_layer_eval(density, grid.nodes, method="spectral")
    tangential = spectral_derivative(trace) / grid.disk.radius
    nu = grid.normals_c
    return to_points(nu * (normal + 1j * tangential))


def single_layer_self_matrix(grid: BoundaryGrid) -> np.ndarray:
    """On-circle single layer operator on nodal values (exact for the interpolant)."""
    M = grid.M
    r = grid.disk.radius
    k = np.fft.rfftfreq(M, 1.0 / M)
    mult = np.empty(len(k))
    mult[0] = r * math.log(r)
    mult[1:] = -r / (2 * k[1:])
    eye = np.eye(M)
    F = np.fft.rfft(eye, axis=0)
    return np.fft.irfft(F * mult[:, None], n=M, axis=0)


# --------------------------------------------------------------------------
# boundary data with harmonic extensions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundaryData:
    """Real data ``Re sum_n coeffs[n] e^{i n theta}`` on the circle ``disk``."""

    disk: Disk
    coeffs: tuple

    def __post_init__(self):
        c = tuple(complex(v) for v in self.coeffs)
        if not c:
            c = (0j,)
        c = (complex(c[0].real, 0.0),) + c[1:]
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def affine(cls, disk: Disk, A) -> "BoundaryData":
        """Trace of ``A.X`` on the circle."""
        A = np.asarray(A, dtype=float)
        Z = np.asarray(disk.center)
        return cls(disk, (float(A @ Z), disk.radius * complex(A[0], -A[1])))

    @classmethod
    def normal_component(cls, disk: Disk, A) -> "BoundaryData":
        """``A.nu`` on the circle."""
        A = np.asarray(A, dtype=float)
        return cls(disk, (0.0, complex(A[0], -A[1])))

    @classmethod
    def from_samples(cls, disk: Disk, values) -> "BoundaryData":
        return cls(disk, tuple(fourier_coefficients(np.asarray(values, dtype=float))))

    @property
    def c(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=complex)

    @property
    def mean(self) -> float:
        return self.coeffs[0].real

    def values(self, theta) -> np.ndarray:
        return fourier_values(self.c, theta)

    def tangential_antiderivative(self) -> "BoundaryData":
        """``G`` with ``dG/dT = self`` and zero mean (``dG/dtheta = r f``)."""
        if abs(self.mean) > 1e-12 * max(1.0, float(np.max(np.abs(self.c)))):
            raise ConfigurationError("Neumann data must have zero mean")
        r = self.disk.radius
        out = [0j] + [-1j * r * cn / n for n, cn in enumerate(self.coeffs[1:], start=1)]
        return BoundaryData(self.disk, tuple(out))

    def tangential_derivative(self) -> "BoundaryData":
        r = self.disk.radius
        out = [0j] + [1j * n * cn / r for n, cn in enumerate(self.coeffs[1:], start=1)]
        return BoundaryData(self.disk, tuple(out))

    def harmonic_extension(self) -> HarmonicField:
        """Poisson extension into the disk as a polynomial in ``z - Z``."""
        r = self.disk.radius
        coeffs = [self.coeffs[0]] + [cn / r**n for n, cn in enumerate(self.coeffs[1:], start=1)]
        return HarmonicPoly(self.disk.zc, tuple(coeffs))

    def double_layer_fields(self):
        """``(inside, outside)`` closed forms of the double layer of this data."""
        r = self.disk.radius
        half = [0j] + [0.5 * cn / r**n for n, cn in enumerate(self.coeffs[1:], start=1)]
        half_poly = HarmonicPoly(self.disk.zc, tuple(half))
        inside = HarmonicPoly(self.disk.zc, (self.mean,) + tuple(half[1:]))
        outside = Scale(-1.0, Pullback(half_poly, self.disk))
        return inside, outside

    def single_layer_fields(self):
        """``(inside, outside)`` closed forms of the single layer, mean-zero data only."""
        if abs(self.mean) > 1e-12 * max(1.0, float(np.max(np.abs(self.c)))):
            raise ConfigurationError("closed-form single layer needs mean-zero data")
        r = self.disk.radius
        poly = [0j] + [-r * cn / (2 * n * r**n) for n, cn in enumerate(self.coeffs[1:], start=1)]
        inside = HarmonicPoly(self.disk.zc, tuple(poly))
        return inside, Pullback(inside, self.disk)

    def on_grid(self, grid: BoundaryGrid) -> BoundaryDensity:
        return BoundaryDensity(grid, self.values(grid.theta))
