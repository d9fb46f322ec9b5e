"""Disks, inversions in circles, and the scalar parameters of the gap problems.

Points are accepted as arrays of shape ``(..., 2)``.  Internally most of the
package works with complex coordinates ``z = x + iy``; the helpers
:func:`to_complex` and :func:`to_points` convert between the two.

Every configuration is stored in a canonical frame:

* two disks: ``B1 = B((0, 0), r1)`` and ``B2 = B((r1 + r2 + eps, 0), r2)``;
* disk in disk: ``Omega = B((0, 0), rho)`` and ``B = B((rho - r - eps, 0), r)``.

An :class:`Isometry` maps user coordinates to that frame and back.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import ConfigurationError, DomainError, InvariantError

INF = math.inf
# conductivities this close to 1 are treated as "no inclusion"
TRIVIAL_K_TOL = 1e-8


def to_complex(X) -> np.ndarray:
    """``(..., 2)`` points to ``x + iy``; complex input passes through."""
    if np.iscomplexobj(X):
        return np.asarray(X, dtype=complex)
    arr = np.asarray(X, dtype=float)
    if arr.shape[-1] != 2:
        raise ValueError(f"points must have a trailing axis of length 2, got {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def to_points(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return np.stack([z.real, z.imag], axis=-1)


@dataclass(frozen=True)
class Disk:
    center: tuple
    radius: float

    def __post_init__(self):
        c = tuple(float(v) for v in np.asarray(self.center, dtype=float).reshape(2))
        object.__setattr__(self, "center", c)
        r = float(self.radius)
        if not r > 0 or not math.isfinite(r):
            raise ConfigurationError(f"disk radius must be positive and finite, got {self.radius}")
        object.__setattr__(self, "radius", r)

    @property
    def zc(self) -> complex:
        return complex(self.center[0], self.center[1])

    def reflect_c(self, z):
        """Inversion in the boundary circle, complex form ``Z + r^2 / conj(z - Z)``."""
        w = np.asarray(z, dtype=complex) - self.zc
        if np.any(w == 0):
            bad = np.asarray(z)[w == 0].ravel()[0] if np.ndim(z) else z
            raise DomainError("reflection undefined at the disk center", point=(bad.real, bad.imag))
        return self.zc + self.radius**2 / np.conj(w)

    def factor_c(self, z):
        w = np.asarray(z, dtype=complex) - self.zc
        if np.any(w == 0):
            raise DomainError("conformal factor undefined at the disk center", point=self.center)
        return self.radius**2 / np.abs(w) ** 2

    def signed_distance(self, X) -> np.ndarray:
        """Distance to the circle, negative inside."""
        return np.abs(to_complex(X) - self.zc) - self.radius

    def boundary_points(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return to_points(self.zc + self.radius * np.exp(1j * theta))


def reflect(disk: Disk, X) -> np.ndarray:
    return to_points(disk.reflect_c(to_complex(X)))


def conformal_factor(disk: Disk, X) -> np.ndarray:
    return disk.factor_c(to_complex(X))


def reflection_jacobian(disk: Disk, X) -> np.ndarray:
    """Differential of the inversion: ``g(X) (I - 2 n n^T)`` with ``n`` radial."""
    z = to_complex(X)
    g = disk.factor_c(z)
    w = z - disk.zc
    n = w / np.abs(w)
    nx, ny = n.real, n.imag
    J = np.empty(np.shape(z) + (2, 2))
    J[..., 0, 0] = g * (1 - 2 * nx * nx)
    J[..., 0, 1] = g * (-2 * nx * ny)
    J[..., 1, 0] = g * (-2 * nx * ny)
    J[..., 1, 1] = g * (1 - 2 * ny * ny)
    return J


# --------------------------------------------------------------------------
# conductivities
# --------------------------------------------------------------------------


def parse_conductivity(k) -> float:
    """Accept numbers and the literals ``"inf"``/``"infinity"``; reject negatives."""
    if isinstance(k, str):
        key = k.strip().lower()
        if key in ("inf", "+inf", "infinity", "+infinity"):
            return INF
        try:
            k = float(key)
        except ValueError:
            raise ConfigurationError(f"unrecognised conductivity {k!r}") from None
    k = float(k)
    if math.isnan(k) or k < 0:
        raise ConfigurationError(f"conductivity must be in [0, +inf], got {k}")
    return k


def inverse_lambda(k: float) -> float:
    """``1/lambda = 2(k-1)/(k+1)``, exact at the limits and 0 for trivial inclusions."""
    if k == INF:
        return 2.0
    if abs(k - 1.0) <= TRIVIAL_K_TOL:
        return 0.0
    return 2.0 * (k - 1.0) / (k + 1.0)


def lam(k: float) -> float:
    inv = inverse_lambda(k)
    return INF if inv == 0.0 else 1.0 / inv


def sigma_of(k: float) -> float:
    return 0.5 * inverse_lambda(k)


def dual_conductivity(k: float) -> float:
    if k == INF:
        return 0.0
    if k == 0.0:
        return INF
    return 1.0 / k


def is_trivial(k: float) -> bool:
    return inverse_lambda(k) == 0.0


# --------------------------------------------------------------------------
# frames
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Isometry:
    """``canonical = e^{-i angle} (z - origin)``."""

    origin: complex = 0j
    angle: float = 0.0

    @property
    def rot(self) -> complex:
        return complex(math.cos(self.angle), math.sin(self.angle))

    def is_identity(self) -> bool:
        return self.origin == 0 and self.angle == 0.0

    def to_canonical(self, z):
        return (np.asarray(z, dtype=complex) - self.origin) * np.conj(self.rot)

    def from_canonical(self, z):
        return np.asarray(z, dtype=complex) * self.rot + self.origin

    def vector_to_canonical(self, v):
        return np.asarray(v, dtype=complex) * np.conj(self.rot)

    def vector_from_canonical(self, v):
        return np.asarray(v, dtype=complex) * self.rot


def _check_eps(stated, recomputed, scale, what):
    if stated is not None and abs(stated - recomputed) > 1e-12 * scale:
        raise ConfigurationError(
            f"stated gap {stated!r} disagrees with the {what} geometry ({recomputed!r})"
        )


@dataclass(frozen=True)
class TwoDiskGeometry:
    r1: float
    r2: float
    eps: float
    frame: Isometry = field(default_factory=Isometry)

    def __post_init__(self):
        for name in ("r1", "r2", "eps"):
            v = float(getattr(self, name))
            object.__setattr__(self, name, v)
            if not (v > 0 and math.isfinite(v)):
                raise ConfigurationError(f"{name} must be positive and finite, got {v}")

    @classmethod
    def from_disks(cls, D1: Disk, D2: Disk, eps: Optional[float] = None) -> "TwoDiskGeometry":
        delta = D2.zc - D1.zc
        dist = abs(delta)
        gap = dist - D1.radius - D2.radius
        if gap <= 0:
            raise ConfigurationError(f"disks overlap or touch (gap {gap:.3e})")
        _check_eps(eps, gap, dist, "two-disk")
        return cls(D1.radius, D2.radius, gap, Isometry(D1.zc, math.atan2(delta.imag, delta.real)))

    @property
    def d(self) -> float:
        return self.r1 + self.r2 + self.eps

    @property
    def B1(self) -> Disk:
        return Disk((0.0, 0.0), self.r1)

    @property
    def B2(self) -> Disk:
        return Disk((self.d, 0.0), self.r2)

    @property
    def disks(self):
        return self.B1, self.B2

    @property
    def r_min(self) -> float:
        return min(self.r1, self.r2)

    @property
    def r_max(self) -> float:
        return max(self.r1, self.r2)

    @property
    def r_star(self) -> float:
        return math.sqrt(2 * self.r1 * self.r2 / (self.r1 + self.r2))

    @property
    def X1(self) -> np.ndarray:
        return np.array([self.r1, 0.0])

    @property
    def X2(self) -> np.ndarray:
        return np.array([self.r1 + self.eps, 0.0])


@dataclass(frozen=True)
class DiskInDiskGeometry:
    rho: float
    r: float
    eps: float
    frame: Isometry = field(default_factory=Isometry)
    guard: float = 0.1

    def __post_init__(self):
        for name in ("rho", "r", "eps"):
            v = float(getattr(self, name))
            object.__setattr__(self, name, v)
            if not (v > 0 and math.isfinite(v)):
                raise ConfigurationError(f"{name} must be positive and finite, got {v}")
        if self.r >= self.rho:
            raise ConfigurationError("inclusion radius must be smaller than the domain radius")
        if self.eps >= self.rho - self.r:
            raise ConfigurationError("inclusion must lie strictly inside the domain")
        # inclusive guard with a little slack for the recomputed gap
        if self.eps > self.guard * (self.rho - self.r) * (1 + 1e-12):
            raise ConfigurationError(
                f"gap {self.eps} too large: need eps <= {self.guard} * (rho - r) = "
                f"{self.guard * (self.rho - self.r)}"
            )

    @classmethod
    def from_disks(cls, omega: Disk, B: Disk, eps: Optional[float] = None, guard: float = 0.1):
        delta = B.zc - omega.zc
        dist = abs(delta)
        gap = omega.radius - B.radius - dist
        if gap <= 0:
            raise ConfigurationError(f"inclusion is not inside the domain (gap {gap:.3e})")
        if dist == 0:
            raise ConfigurationError("concentric inclusion has no narrow gap")
        _check_eps(eps, gap, omega.radius, "disk-in-disk")
        return cls(omega.radius, B.radius, gap,
                   Isometry(omega.zc, math.atan2(delta.imag, delta.real)), guard)

    @property
    def c(self) -> float:
        """Abscissa of the inclusion center."""
        return self.rho - self.r - self.eps

    @property
    def Omega(self) -> Disk:
        return Disk((0.0, 0.0), self.rho)

    @property
    def B(self) -> Disk:
        return Disk((self.c, 0.0), self.r)

    @property
    def disks(self):
        return self.Omega, self.B

    @property
    def r_upper(self) -> float:
        """``sqrt((rho - r) / (rho r))``, units of inverse square-root length."""
        return math.sqrt((self.rho - self.r) / (self.rho * self.r))

    @property
    def X1(self) -> np.ndarray:
        return np.array([self.rho - self.eps, 0.0])

    @property
    def X2(self) -> np.ndarray:
        return np.array([self.rho, 0.0])


Geometry = Union[TwoDiskGeometry, DiskInDiskGeometry]


# --------------------------------------------------------------------------
# problem configurations and derived scalars
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TwoDiskConfig:
    geometry: TwoDiskGeometry
    k1: float
    k2: float
    tol: float = 1e-10
    eps_floor: float = 1e-9

    def __post_init__(self):
        object.__setattr__(self, "k1", parse_conductivity(self.k1))
        object.__setattr__(self, "k2", parse_conductivity(self.k2))

    def dual(self) -> "TwoDiskConfig":
        return TwoDiskConfig(self.geometry, dual_conductivity(self.k1),
                             dual_conductivity(self.k2), self.tol, self.eps_floor)


@dataclass(frozen=True)
class DiskInDiskConfig:
    geometry: DiskInDiskGeometry
    k: float
    boundary: str = "dirichlet"
    tol: float = 1e-10
    eps_floor: float = 1e-9

    def __post_init__(self):
        object.__setattr__(self, "k", parse_conductivity(self.k))
        if self.boundary not in ("dirichlet", "neumann"):
            raise ConfigurationError(f"unknown boundary condition {self.boundary!r}")

    def dual(self) -> "DiskInDiskConfig":
        other = "neumann" if self.boundary == "dirichlet" else "dirichlet"
        return DiskInDiskConfig(self.geometry, dual_conductivity(self.k), other,
                                self.tol, self.eps_floor)


ProblemConfig = Union[TwoDiskConfig, DiskInDiskConfig]


@dataclass(frozen=True)
class DerivedScalars:
    kind: str
    lam: tuple
    inv_lam: tuple
    tau: Optional[float]
    sigma: Optional[float]
    r_min: float
    r_max: float
    r_star: Optional[float]
    r_upper: Optional[float]
    a: float
    b: float
    N: int


def derived_scalars(config: ProblemConfig) -> DerivedScalars:
    geo = config.geometry
    se = math.sqrt(geo.eps)
    if isinstance(config, TwoDiskConfig):
        ks = (config.k1, config.k2)
        inv = tuple(inverse_lambda(k) for k in ks)
        rs = geo.r_star
        return DerivedScalars(
            kind="two_disks",
            lam=tuple(lam(k) for k in ks),
            inv_lam=inv,
            tau=inv[0] * inv[1] / 4.0,
            sigma=None,
            r_min=geo.r_min,
            r_max=geo.r_max,
            r_star=rs,
            r_upper=None,
            a=1.0 / (1.0 + 2.0 * (rs / geo.r_min) * se),
            b=1.0 / (1.0 + (rs / geo.r_max) * se),
            N=int(math.floor(8.0 * rs / se)) + 1,
        )
    ru = geo.r_upper
    inv = inverse_lambda(config.k)
    return DerivedScalars(
        kind="disk_in_disk",
        lam=(lam(config.k),),
        inv_lam=(inv,),
        tau=None,
        sigma=inv / 2.0,
        r_min=geo.r,
        r_max=geo.rho,
        r_star=None,
        r_upper=ru,
        a=1.0 / (1.0 + 4.0 * ru * se),
        b=1.0 / (1.0 + ru * se),
        N=int(math.floor(1.0 / (4.0 * ru * se))) + 1,
    )


# --------------------------------------------------------------------------
# fixed points of the combined reflections
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CriticalGeometry:
    x1: float
    x2: float
    P1: np.ndarray
    P2: np.ndarray
    X1: np.ndarray
    X2: np.ndarray
    segments: dict

    def segment_points(self, name: str, n: int = 1024) -> np.ndarray:
        A, B = self.segments[name]
        t = np.linspace(0.0, 1.0, n)[:, None]
        return (1 - t) * A[None, :] + t * B[None, :]


def _stable_roots(a, b, c):
    disc = b * b - 4 * a * c
    if not disc > 0:
        raise InvariantError(f"non-positive discriminant {disc} for a valid gap")
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    return sorted((q / a, c / q))


def fixed_points(geometry: Geometry) -> CriticalGeometry:
    """On-axis fixed points of the two combined reflections.

    ``P1`` is fixed by ``R_B1 o R_B2`` (resp. ``R_B o R_Omega``) and
    ``P2`` by the reverse composition.
    """
    if geometry.eps <= 0:
        raise ConfigurationError("gap must be positive")
    if isinstance(geometry, TwoDiskGeometry):
        r1, r2, d = geometry.r1, geometry.r2, geometry.d
        x1, x2 = _stable_roots(d, r2**2 - r1**2 - d**2, r1**2 * d)
        Da, Db = geometry.B1, geometry.B2
        X1, X2 = geometry.X1, geometry.X2
        P1, P2 = np.array([x1, 0.0]), np.array([x2, 0.0])
        segments = {"I": (P1, P2)}
    else:
        rho, r, c = geometry.rho, geometry.r, geometry.c
        x1, x2 = _stable_roots(c, r**2 - rho**2 - c**2, rho**2 * c)
        Da, Db = geometry.B, geometry.Omega
        X1, X2 = geometry.X1, geometry.X2
        P1, P2 = np.array([x1, 0.0]), np.array([x2, 0.0])
        segments = {"J1": (P1, X1), "J2": (P2, X2)}
    scale = max(abs(x2), 1.0) * 1e-12 * max(d.radius for d in geometry.disks)
    z1 = Da.reflect_c(Db.reflect_c(complex(x1)))
    z2 = Db.reflect_c(Da.reflect_c(complex(x2)))
    if abs(z1 - x1) > scale * 10 or abs(z2 - x2) > scale * 10:
        raise InvariantError("fixed points fail the combined-reflection check")
    return CriticalGeometry(x1, x2, P1, P2, X1, X2, segments)


def iterate_gap_orbit(geometry: Geometry, X, n: int) -> np.ndarray:
    """Points ``(R_a R_b)^m X`` for ``m = 0..n``.

    ``R_a R_b`` is ``R_B1 o R_B2`` for two disks and ``R_B o R_Omega`` for
    the disk-in-disk geometry (the maps whose fixed point is ``P1``).
    """
    if isinstance(geometry, TwoDiskGeometry):
        Da, Db = geometry.B1, geometry.B2
    else:
        Da, Db = geometry.B, geometry.Omega
    z = complex(*np.asarray(X, dtype=float))
    out = [z]
    for _ in range(n):
        z = complex(Da.reflect_c(Db.reflect_c(z)))
        out.append(z)
    return to_points(np.array(out))
