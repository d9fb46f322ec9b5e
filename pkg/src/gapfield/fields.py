"""Immutable harmonic-field expression trees.

A field is evaluated on arrays of points of shape ``(..., 2)``.  Gradients are
exact: pullbacks through disk inversions are differentiated with the chain rule
using :func:`gapfield.geometry.reflection_jacobian`.

Harmonic conjugates follow ``grad(conj f) = rot90(grad f)``, i.e.
``d(conj f)/dx = -df/dy`` and ``d(conj f)/dy = df/dx``; for ``f = Re F`` with
``F`` holomorphic this is ``conj f = Im F``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError
from .geometry import Disk, Isometry, reflection_jacobian, to_complex, to_points


class HarmonicField:
    """Base node.  Subclasses implement ``_value`` and ``_grad`` on complex input.

    ``_grad`` returns the complex gradient ``f_x + i f_y``.
    """

    def _value(self, z):  # pragma: no cover - abstract
        raise NotImplementedError

    def _grad(self, z):  # pragma: no cover - abstract
        raise NotImplementedError

    def conjugate(self) -> "HarmonicField":  # pragma: no cover - abstract
        raise NotImplementedError

    def singular_set(self) -> list:
        return []

    def _check(self, z):
        for s in self.singular_set():
            hit = np.abs(z - s) <= 1e-14 * max(1.0, abs(s))
            if np.any(hit):
                raise DomainError("field evaluated at a singular point", point=(s.real, s.imag))

    def value(self, X):
        z = to_complex(X)
        self._check(z)
        return self._value(z)

    def grad(self, X):
        z = to_complex(X)
        self._check(z)
        return to_points(self._grad(z))

    # small algebra so trees read naturally
    def __add__(self, other):
        return Sum([self, other])

    def __sub__(self, other):
        return Sum([self, Scale(-1.0, other)])

    def __rmul__(self, s):
        return Scale(float(s), self)

    def __neg__(self):
        return Scale(-1.0, self)


@dataclass(frozen=True, eq=False)
class Affine(HarmonicField):
    A: tuple
    c: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "A", tuple(float(v) for v in np.asarray(self.A).reshape(2)))
        object.__setattr__(self, "c", float(self.c))

    @property
    def Ac(self) -> complex:
        return complex(*self.A)

    def _value(self, z):
        return self.A[0] * z.real + self.A[1] * z.imag + self.c

    def _grad(self, z):
        return np.full(np.shape(z), self.Ac)

    def conjugate(self):
        return Affine((-self.A[1], self.A[0]), 0.0)


@dataclass(frozen=True, eq=False)
class HarmonicPoly(HarmonicField):
    """``sum_n Re(coeffs[n] (z - center)^n)``."""

    center: complex
    coeffs: tuple

    def __post_init__(self):
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "coeffs", tuple(complex(c) for c in self.coeffs))

    def _value(self, z):
        w = z - self.center
        acc = np.zeros(np.shape(z), dtype=complex)
        for c in reversed(self.coeffs):
            acc = acc * w + c
        return acc.real

    def _grad(self, z):
        w = z - self.center
        acc = np.zeros(np.shape(z), dtype=complex)
        for n in range(len(self.coeffs) - 1, 0, -1):
            acc = acc * w + n * self.coeffs[n]
        return np.conj(acc)

    def conjugate(self):
        # the constant term contributes nothing to the conjugate
        return HarmonicPoly(self.center, (0j,) + tuple(-1j * c for c in self.coeffs[1:]))


@dataclass(frozen=True, eq=False)
class Pullback(HarmonicField):
    """``f(R_D(X))``.  Nested pullbacks are evaluated iteratively."""

    base: HarmonicField
    disk: Disk

    def _chain(self):
        disks = []
        node = self
        while isinstance(node, Pullback):
            disks.append(node.disk)
            node = node.base
        return disks, node

    def singular_set(self):
        disks, leaf = self._chain()
        sing = list(leaf.singular_set())
        # walk from the innermost pullback outwards
        for D in reversed(disks):
            mapped = []
            for s in sing:
                if s != D.zc:
                    mapped.append(complex(D.reflect_c(s)))
            mapped.append(D.zc)
            sing = mapped
        return sing

    def _check(self, z):
        # the chain can be thousands deep; only the outermost center is cheap to test
        if np.any(z == self.disk.zc):
            raise DomainError("field evaluated at a singular point", point=self.disk.center)

    def _value(self, z):
        disks, leaf = self._chain()
        for D in disks:
            z = D.reflect_c(z)
        return leaf._value(z)

    def _grad(self, z):
        disks, leaf = self._chain()
        pts = []
        for D in disks:
            pts.append(z)
            z = D.reflect_c(z)
        G = leaf._grad(z)
        v = to_points(G)
        # grad(f o R_k o ... o R_1) = J_1^T ... J_k^T grad f, all J symmetric
        for D, p in zip(reversed(disks), reversed(pts)):
            J = reflection_jacobian(D, to_points(p))
            v = np.einsum("...ij,...j->...i", J, v)
        return to_complex(v)

    def conjugate(self):
        # inversions reverse orientation: conj(f o R) = -(conj f) o R
        disks, leaf = self._chain()
        node = leaf.conjugate()
        sign = 1.0
        for D in reversed(disks):
            node = Pullback(node, D)
            sign = -sign
        return node if sign > 0 else Scale(-1.0, node)


@dataclass(frozen=True, eq=False)
class Scale(HarmonicField):
    s: float
    base: HarmonicField

    def singular_set(self):
        return self.base.singular_set()

    def _check(self, z):
        self.base._check(z)

    def _value(self, z):
        return self.s * self.base._value(z)

    def _grad(self, z):
        return self.s * self.base._grad(z)

    def conjugate(self):
        return Scale(self.s, self.base.conjugate())


@dataclass(frozen=True, eq=False)
class Sum(HarmonicField):
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    def singular_set(self):
        out = []
        for t in self.terms:
            out.extend(t.singular_set())
        return out

    def _check(self, z):
        for t in self.terms:
            t._check(z)

    def _value(self, z):
        return sum((t._value(z) for t in self.terms), np.zeros(np.shape(z)))

    def _grad(self, z):
        return sum((t._grad(z) for t in self.terms), np.zeros(np.shape(z), dtype=complex))

    def conjugate(self):
        return Sum(tuple(t.conjugate() for t in self.terms))


@dataclass(frozen=True, eq=False)
class Conjugate(HarmonicField):
    """Lazy harmonic conjugate of ``base``."""

    base: HarmonicField

    def __post_init__(self):
        object.__setattr__(self, "_pushed", self.base.conjugate())

    def singular_set(self):
        return self._pushed.singular_set()

    def _check(self, z):
        self._pushed._check(z)

    def _value(self, z):
        return self._pushed._value(z)

    def _grad(self, z):
        return self._pushed._grad(z)

    def conjugate(self):
        # conj(conj f) = -f + const
        return Scale(-1.0, self.base)


@dataclass(frozen=True, eq=False)
class Rigid(HarmonicField):
    """``base`` expressed in a canonical frame: ``X -> base(frame.from_canonical(X))``."""

    base: HarmonicField
    frame: Isometry

    def singular_set(self):
        return [complex(self.frame.to_canonical(s)) for s in self.base.singular_set()]

    def _value(self, z):
        return self.base._value(self.frame.from_canonical(z))

    def _grad(self, z):
        return self.frame.vector_to_canonical(self.base._grad(self.frame.from_canonical(z)))

    def conjugate(self):
        # rigid motions are orientation preserving
        return Rigid(self.base.conjugate(), self.frame)


def eval(field: HarmonicField, X):  # noqa: A001 - mirrors the operation name
    return field.value(X)


def grad(field: HarmonicField, X):
    return field.grad(X)


def harmonic_conjugate(field: HarmonicField) -> HarmonicField:
    return field.conjugate()


def rigid(field: HarmonicField, frame: Isometry) -> HarmonicField:
    return field if frame.is_identity() else Rigid(field, frame)


def grad_sup(field: HarmonicField, disks: Sequence[Disk], n: int = 2048) -> float:
    """Upper estimate of ``sup |grad field|`` over the closed disks.

    Exact for affine fields; otherwise the boundary maximum (``|grad f|`` is
    subharmonic) sampled densely with a small safety margin.
    """
    if isinstance(field, Affine):
        return abs(field.Ac)
    best = 0.0
    for D in disks:
        pts = D.zc + D.radius * np.exp(2j * np.pi * np.arange(n) / n)
        best = max(best, float(np.max(np.abs(field._grad(pts)))))
    return best * 1.01


class DiskPotentials(NamedTuple):
    double_inside: HarmonicField
    double_outside: HarmonicField
    single_inside: HarmonicField
    single_outside: HarmonicField


def disk_potentials_closed_form(omega: Disk, data) -> DiskPotentials:
    """Double layer of ``f = A.X`` and single layer of ``g = A.nu`` on a disk.

    With ``Z`` the center and ``A.X`` read relative to it:
    ``D(f) = A.(X-Z)/2`` inside and ``-A.(R(X)-Z)/2`` outside;
    ``S(g) = -A.(X-Z)/2`` inside and ``-A.(R(X)-Z)/2`` outside.
    The interior of ``D(f)`` also carries ``A.Z / 2`` (the double layer of
    the constant part ``A.Z``, halved by the mean-value term).
    """
    A = np.asarray(data, dtype=float)
    if A.shape != (2,):
        raise ConfigurationError("closed forms are available for affine data A.X only")
    AZ = float(A @ np.asarray(omega.center))
    half = Affine(0.5 * A, -0.5 * AZ)
    return DiskPotentials(
        double_inside=Affine(0.5 * A, 0.5 * AZ),
        double_outside=Scale(-1.0, Pullback(half, omega)),
        single_inside=Scale(-1.0, half),
        single_outside=Scale(-1.0, Pullback(half, omega)),
    )
