import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gapfield.errors import ConfigurationError, DomainError, InvariantError
from gapfield.geometry import (
    Disk,
    DiskInDiskConfig,
    DiskInDiskGeometry,
    TwoDiskConfig,
    TwoDiskGeometry,
    conformal_factor,
    derived_scalars,
    fixed_points,
    iterate_gap_orbit,
    parse_conductivity,
    reflect,
    reflection_jacobian,
)

coord = st.floats(-5, 5, allow_nan=False)
radius = st.floats(0.1, 3.0)


def test_reflection_examples():
    D = Disk((0.0, 0.0), 1.0)
    assert np.allclose(reflect(D, [2.0, 0.0]), [0.5, 0.0])
    assert conformal_factor(D, [2.0, 0.0]) == pytest.approx(0.25)
    assert np.allclose(reflection_jacobian(D, [2.0, 0.0]), 0.25 * np.diag([-1.0, 1.0]))
    assert np.allclose(reflection_jacobian(D, [1.0, 0.0]), np.diag([-1.0, 1.0]))


def test_center_is_singular():
    D = Disk((1.0, 2.0), 0.5)
    with pytest.raises(DomainError) as info:
        reflect(D, [1.0, 2.0])
    assert info.value.point is not None
    with pytest.raises(DomainError):
        conformal_factor(D, [1.0, 2.0])


@given(coord, coord, radius, st.floats(0, 2 * math.pi), st.floats(0.05, 4.0))
def test_reflection_is_an_involution(cx, cy, r, t, s):
    D = Disk((cx, cy), r)
    X = np.array([cx + s * r * math.cos(t), cy + s * r * math.sin(t)])
    assert np.allclose(reflect(D, reflect(D, X)), X, atol=1e-9 * (1 + abs(cx) + abs(cy) + r))


@given(coord, coord, radius, st.floats(0, 2 * math.pi))
def test_boundary_is_fixed_with_unit_factor(cx, cy, r, t):
    D = Disk((cx, cy), r)
    X = D.boundary_points(np.array([t]))[0]
    assert np.allclose(reflect(D, X), X, atol=1e-12 * (1 + abs(cx) + abs(cy) + r))
    assert conformal_factor(D, X) == pytest.approx(1.0, rel=1e-12)


@given(radius, st.floats(0.05, 4.0), st.floats(0, 2 * math.pi))
@settings(max_examples=50)
def test_jacobian_matches_finite_differences(r, s, t):
    D = Disk((0.3, -0.2), r)
    X = np.array([0.3 + s * r * math.cos(t), -0.2 + s * r * math.sin(t)])
    h = 1e-6 * r * s
    J = np.stack([(reflect(D, X + h * e) - reflect(D, X - h * e)) / (2 * h) for e in np.eye(2)], axis=1)
    assert np.allclose(J, reflection_jacobian(D, X), rtol=1e-5, atol=1e-6 / s**2)
    # the Jacobian is the conformal factor times a reflection matrix
    g = conformal_factor(D, X)
    assert np.allclose(J @ J.T, g**2 * np.eye(2), rtol=1e-4, atol=1e-6 / s**4)


def test_canonical_frames():
    g = TwoDiskGeometry(1.0, 2.0, 0.1)
    assert g.d == pytest.approx(3.1)
    assert np.allclose(g.X1, [1.0, 0.0]) and np.allclose(g.X2, [1.1, 0.0])
    h = DiskInDiskGeometry(2.0, 1.0, 0.1)
    assert h.B.center[0] == pytest.approx(0.9)
    assert np.allclose(h.X1, [1.9, 0.0]) and np.allclose(h.X2, [2.0, 0.0])


def test_from_disks_recovers_gap_and_frame():
    D1 = Disk((1.0, 1.0), 1.0)
    D2 = Disk((1.0, 1.0 + 2.6), 1.5)
    g = TwoDiskGeometry.from_disks(D1, D2)
    assert g.eps == pytest.approx(0.1)
    X1 = g.frame.from_canonical(complex(*g.X1))
    assert X1 == pytest.approx(1.0 + 2.0j)


def test_from_disks_rejects_touching_and_mismatch():
    with pytest.raises(ConfigurationError):
        TwoDiskGeometry.from_disks(Disk((0, 0), 1.0), Disk((2.0, 0), 1.0))
    with pytest.raises(ConfigurationError):
        TwoDiskGeometry.from_disks(Disk((0, 0), 1.0), Disk((2.1, 0), 1.0), eps=0.2)
    with pytest.raises(ConfigurationError):
        DiskInDiskGeometry.from_disks(Disk((0, 0), 2.0), Disk((1.0, 0), 1.0))


@pytest.mark.parametrize("bad", [0.0, -1e-3, math.nan, math.inf])
def test_non_positive_gap_rejected(bad):
    with pytest.raises(ConfigurationError):
        TwoDiskGeometry(1.0, 1.0, bad)
    with pytest.raises(ConfigurationError):
        DiskInDiskGeometry(2.0, 1.0, bad)


def test_parse_conductivity():
    assert parse_conductivity("inf") == math.inf
    assert parse_conductivity(0) == 0.0
    with pytest.raises(ConfigurationError):
        parse_conductivity(-1.0)


def test_derived_scalars_examples():
    s = derived_scalars(TwoDiskConfig(TwoDiskGeometry(1.0, 1.0, 1e-2), math.inf, math.inf))
    assert s.lam == (0.5, 0.5) and s.tau == 1.0
    s = derived_scalars(TwoDiskConfig(TwoDiskGeometry(1.0, 1.0, 1e-2), 3.0, 3.0))
    assert s.lam == pytest.approx((1.0, 1.0)) and s.tau == pytest.approx(0.25)
    s = derived_scalars(TwoDiskConfig(TwoDiskGeometry(1.0, 3.0, 1e-2), 0.0, 0.0))
    assert s.lam == (-0.5, -0.5) and s.tau == 1.0 and s.r_star == pytest.approx(math.sqrt(1.5))
    s = derived_scalars(DiskInDiskConfig(DiskInDiskGeometry(2.0, 1.0, 1e-2), math.inf))
    assert s.sigma == 1.0 and s.r_upper == pytest.approx(math.sqrt(0.5))
    s = derived_scalars(DiskInDiskConfig(DiskInDiskGeometry(2.0, 1.0, 1e-2), 0.0, "neumann"))
    assert s.sigma == -1.0


def test_truncation_parameters():
    eps = 1e-4
    s = derived_scalars(TwoDiskConfig(TwoDiskGeometry(1.0, 1.0, eps), 5.0, 5.0))
    assert s.a == pytest.approx(1 / (1 + 2 * math.sqrt(eps)))
    assert s.b == pytest.approx(1 / (1 + math.sqrt(eps)))
    assert s.N > 8 / math.sqrt(eps) and s.N - 1 <= 8 / math.sqrt(eps)
    s = derived_scalars(DiskInDiskConfig(DiskInDiskGeometry(2.0, 1.0, eps), 5.0))
    ru = math.sqrt(0.5)
    assert s.a == pytest.approx(1 / (1 + 4 * ru * math.sqrt(eps)))
    assert s.b == pytest.approx(1 / (1 + ru * math.sqrt(eps)))
    assert s.N > 1 / (4 * ru * math.sqrt(eps))


# frozen from 20000 high-precision reflection iterations started at X1 / X2
FIXED_TWO = (0.904875078027496071, 1.105124921972503929)
FIXED_NESTED = (1.980098264853047512, 2.020101765149952788)


def test_fixed_points_frozen_values():
    c = fixed_points(TwoDiskGeometry(1.0, 1.0, 0.01))
    assert (c.x1, c.x2) == pytest.approx(FIXED_TWO, abs=1e-14)
    c = fixed_points(DiskInDiskGeometry(2.0, 1.0, 1e-4))
    assert (c.x1, c.x2) == pytest.approx(FIXED_NESTED, rel=1e-13)


@pytest.mark.parametrize("eps", [1e-2, 1e-4, 1e-6])
def test_fixed_point_asymptotics(eps):
    c = fixed_points(TwoDiskGeometry(1.0, 1.0, eps))
    assert abs(c.x1 - (1.0 - math.sqrt(eps))) < 2 * eps
    c = fixed_points(DiskInDiskGeometry(2.0, 1.0, eps))
    assert abs(c.x1 - (2.0 - 2.0 * math.sqrt(eps))) < 4 * eps


def test_orbit_contracts_to_fixed_point():
    eps = 1e-4
    geo = TwoDiskGeometry(1.0, 1.0, eps)
    c = fixed_points(geo)
    rs = math.sqrt(1.0)
    n = int(8 * rs / math.sqrt(eps)) + 1
    orbit = iterate_gap_orbit(geo, geo.X1, n)
    assert np.allclose(orbit[:, 1], 0.0)
    assert abs(orbit[-1, 0] - c.x1) <= rs * math.sqrt(eps) / 4
    dist = np.abs(orbit[:51, 0] - c.x1)
    assert np.all(dist[1:] / dist[:-1] <= 1 / (1 + math.sqrt(eps) / rs) + 1e-10)
    assert np.allclose(iterate_gap_orbit(geo, c.P1, 5), c.P1)


def test_fixed_point_invariant_error_path():
    assert issubclass(InvariantError, AssertionError)
