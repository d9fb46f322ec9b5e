import math

import numpy as np
import pytest

from gapfield.errors import ConfigurationError
from gapfield.fields import Affine, HarmonicPoly
from gapfield.geometry import (
    Disk,
    DiskInDiskConfig,
    DiskInDiskGeometry,
    TwoDiskConfig,
    TwoDiskGeometry,
    to_complex,
)
from gapfield.potentials import BoundaryGrid
from gapfield.solver import (
    boundary_gradient_two_disks,
    critical_terms,
    gap_angles,
    grad_sup_norm,
    solve_dirichlet_disk_in_disk,
    solve_neumann_disk_in_disk,
    solve_two_disks,
)
from support import sample_annulus, sample_disk, two_disk_interface

RNG = np.random.default_rng(5)


def pts(z):
    return np.stack([np.real(z), np.imag(z)], axis=-1)


def test_unit_conductivities_reproduce_driver():
    H = Affine((0.6, -0.8), 0.3)
    sol = solve_two_disks(TwoDiskConfig(TwoDiskGeometry(1.0, 2.0, 0.01), 1.0, 1.0), H)
    X = RNG.uniform(-2, 4, (50, 2))
    assert np.allclose(sol.eval(X), H.value(X), atol=1e-14)
    assert np.allclose(sol.grad(X), [0.6, -0.8], atol=1e-14)
    assert grad_sup_norm(sol).value == pytest.approx(1.0)


def test_trivial_disk_in_disk_problems():
    A = np.array([0.7, 0.2])
    geo = DiskInDiskGeometry(2.0, 1.0, 0.05)
    sol = solve_dirichlet_disk_in_disk(DiskInDiskConfig(geo, 1.0), A)
    X = pts(sample_annulus(geo, 40, RNG))
    assert np.allclose(sol.eval(X), X @ A, atol=1e-13)
    nsol = solve_neumann_disk_in_disk(DiskInDiskConfig(geo, 1.0, "neumann"), A)
    assert np.allclose(nsol.eval(X), X @ A, atol=1e-13)  # A.X already has zero mean on dOmega
    assert np.allclose(nsol.grad(X), A, atol=1e-13)


def test_neumann_data_must_have_zero_mean():
    geo = DiskInDiskGeometry(2.0, 1.0, 0.05)
    with pytest.raises(ConfigurationError):
        solve_neumann_disk_in_disk(DiskInDiskConfig(geo, 3.0, "neumann"), [1.0 + 0j, 0.5])


@pytest.mark.parametrize("k1,k2", [(8.0, 8.0), (0.05, 0.3), (math.inf, 0.0)])
def test_two_disk_traces_match_layer_potentials(k1, k2):
    cfg = TwoDiskConfig(TwoDiskGeometry(1.0, 1.4, 0.01), k1, k2)
    H = HarmonicPoly(0.2, (0.0, 1.0 + 0.3j, 0.1j))
    sol = solve_two_disks(cfg, H)
    theta = gap_angles(64, 0.3)
    for i in (1, 2):
        D = sol.geometry.disks[i - 1]
        X = D.boundary_points(theta)
        G = to_complex(sol.grad(X))  # outside limit on the circle
        tr = sol.trace(i, theta, +1)
        ref = tr.vectors_c()
        assert np.allclose(G, ref, atol=1e-9 * np.abs(ref).max())
    if not (math.isinf(k1) or k2 == 0.0):
        for i in (1, 2):
            cont, flux, scale = two_disk_interface(sol, i, sol.M)
            assert cont < 1e-12 * scale and flux < 1e-8 * scale


def test_inner_trace_from_inside_points():
    cfg = TwoDiskConfig(TwoDiskGeometry(1.0, 1.0, 0.05), 6.0, 0.4)
    sol = solve_two_disks(cfg, Affine((1.0, 0.5)))
    theta = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    for i in (1, 2):
        D = sol.geometry.disks[i - 1]
        inner = sol.trace(i, theta, -1).vectors_c()
        z = D.zc + D.radius * (1 - 1e-9) * np.exp(1j * theta)
        assert np.allclose(to_complex(sol.grad_series(pts(z))), inner, atol=1e-7 * np.abs(inner).max())


def test_series_and_quadrature_gradients_agree():
    cfg = TwoDiskConfig(TwoDiskGeometry(1.0, 1.0, 0.02), 30.0, 30.0)
    sol = solve_two_disks(cfg, Affine((1.0, 0.0)))
    X = np.concatenate([pts(sample_disk(sol.geometry.B1, 20, RNG)), RNG.uniform(-3, 5, (20, 2))])
    assert np.allclose(sol.grad(X), sol.grad_series(X), atol=1e-9)


def test_perturbation_decays_at_infinity():
    H = Affine((1.0, 0.0))
    sol = solve_two_disks(TwoDiskConfig(TwoDiskGeometry(1.0, 1.0, 0.05), 10.0, 10.0), H)
    d = [np.max(np.abs(sol.grad(R * np.array([[0.6, 0.8]])) - [1.0, 0.0])) for R in (20.0, 200.0)]
    assert d[1] < d[0] / 50  # dipole field: gradient falls like 1/R^2


def test_rigid_motion_invariance():
    A = np.array([1.0, 0.0])
    base = solve_two_disks(TwoDiskConfig(TwoDiskGeometry(1.0, 1.5, 0.01), 9.0, 9.0), Affine(tuple(A)))
    ang, shift = 0.7, np.array([2.0, -1.0])
    R = np.array([[math.cos(ang), -math.sin(ang)], [math.sin(ang), math.cos(ang)]])
    D1 = Disk(tuple(shift), 1.0)
    D2 = Disk(tuple(shift + R @ [2.51, 0.0]), 1.5)
    geo = TwoDiskGeometry.from_disks(D1, D2)
    moved = solve_two_disks(TwoDiskConfig(geo, 9.0, 9.0), Affine(tuple(R @ A)))
    assert moved.critical_gradients() == pytest.approx(base.critical_gradients(), rel=1e-10)
    Xc = RNG.uniform(-2, 4, (10, 2))
    Xw = Xc @ R.T + shift
    assert np.allclose(moved.grad(Xw), base.grad(Xc) @ R.T, atol=1e-10)


def test_perfect_conductor_dirichlet_is_equipotential_inside():
    geo = DiskInDiskGeometry(2.0, 1.0, 0.01)
    sol = solve_dirichlet_disk_in_disk(DiskInDiskConfig(geo, math.inf), np.array([1.0, 0.0]))
    inside = pts(sample_disk(geo.B, 30, RNG))
    assert np.allclose(sol.grad_series(inside), 0.0, atol=1e-12)
    vals = sol.eval(inside)
    assert np.ptp(vals) < 1e-8


def test_dirichlet_boundary_trace_and_data():
    geo = DiskInDiskGeometry(2.0, 0.9, 0.02)
    A = np.array([0.3, 1.0])
    sol = solve_dirichlet_disk_in_disk(DiskInDiskConfig(geo, 12.0), A)
    theta = np.linspace(0, 2 * np.pi, 40, endpoint=False)
    X = geo.Omega.boundary_points(theta)
    assert np.allclose(sol.eval(X), X @ A, atol=1e-10)
    bt = sol.boundary_trace(theta)
    T = np.stack([-np.sin(theta), np.cos(theta)], axis=-1)
    assert np.allclose(bt.tangential, T @ A)
    Xin = geo.Omega.boundary_points(theta) * (1 - 1e-10)
    G = to_complex(sol.grad_series(Xin))
    assert np.allclose((np.conj(np.exp(1j * theta)) * G).real, bt.normal, atol=1e-6 * np.abs(bt.normal).max())


def test_dirichlet_inclusion_traces_match_quadrature():
    geo = DiskInDiskGeometry(2.0, 1.0, 0.01)
    sol = solve_dirichlet_disk_in_disk(DiskInDiskConfig(geo, 0.1), np.array([0.0, 1.0]))
    theta = gap_angles(64, 0.3)
    X = geo.B.boundary_points(theta)
    outer = sol.inclusion_trace(theta, +1).vectors_c()
    assert np.allclose(to_complex(sol.grad(X)), outer, atol=1e-9 * np.abs(outer).max())


def test_neumann_mean_zero_and_boundary_data():
    geo = DiskInDiskGeometry(2.0, 1.0, 0.01)
    sol = solve_neumann_disk_in_disk(DiskInDiskConfig(geo, 0.3, "neumann"), np.array([0.4, 1.0]))
    grid = BoundaryGrid(geo.Omega, sol.M)
    assert abs(np.mean(sol.eval(grid.nodes))) < 1e-12
    bt = sol.boundary_trace(grid.theta)
    assert np.allclose(bt.normal, np.cos(grid.theta) * 0.4 + np.sin(grid.theta) * 1.0)


def test_neumann_series_gradient_matches_layer_route():
    geo = DiskInDiskGeometry(2.0, 1.0, 0.02)
    sol = solve_neumann_disk_in_disk(DiskInDiskConfig(geo, 4.0, "neumann"), np.array([1.0, -0.5]))
    X = np.concatenate([pts(sample_annulus(geo, 20, RNG)), pts(sample_disk(geo.B, 20, RNG))])
    assert np.allclose(sol.grad(X), sol.grad_series(X), atol=1e-9)


def test_interior_gradient_follows_inclusion_bound():
    # |grad u| in B stays within a constant of 1 / (|k-1| (1 - |sigma| + r^ sqrt(eps)))
    eps = 1e-3
    geo = DiskInDiskGeometry(2.0, 1.0, eps)
    inside = pts(sample_disk(geo.B, 50, RNG, frac=0.99))
    scaled = []
    for k in (10.0, 100.0, 1000.0):
        sol = solve_dirichlet_disk_in_disk(DiskInDiskConfig(geo, k), np.array([1.0, 0.0]))
        sigma = (k - 1) / (k + 1)
        den = (k - 1) * (1 - sigma + geo.r_upper * math.sqrt(eps))
        scaled.append(np.max(np.linalg.norm(sol.grad_series(inside), axis=-1)) * den)
    assert max(scaled) / min(scaled) < 4.0


def test_sup_norm_dominates_critical_values():
    cfg = TwoDiskConfig(TwoDiskGeometry(1.0, 1.0, 1e-3), math.inf, math.inf)
    sol = solve_two_disks(cfg, Affine((1.0, 0.0)))
    sup = grad_sup_norm(sol)
    a, b = sol.critical_gradients()
    assert sup.value >= max(a, b) * (1 - 1e-12)
    assert np.hypot(*(sup.location - [1.0005, 0.0])) < 2 * math.sqrt(1e-3)
    assert critical_terms(sol) > 0
    outer = boundary_gradient_two_disks(sol, +1, np.array([0.0]))
    assert outer[0].magnitude[0] == pytest.approx(a)


def test_points_outside_domain_rejected():
    geo = DiskInDiskGeometry(2.0, 1.0, 0.05)
    sol = solve_dirichlet_disk_in_disk(DiskInDiskConfig(geo, 3.0), np.array([1.0, 0.0]))
    with pytest.raises(ConfigurationError):
        sol.eval(np.array([[3.0, 0.0]]))
