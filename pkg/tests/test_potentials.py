import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gapfield.errors import ConfigurationError, DomainError
from gapfield.fields import Affine, HarmonicPoly, Pullback
from gapfield.geometry import Disk, to_complex
from gapfield.potentials import (
    BoundaryData,
    BoundaryDensity,
    BoundaryGrid,
    double_layer_eval,
    double_layer_grad,
    fourier_coefficients,
    fourier_values,
    kstar_apply,
    single_layer_boundary_grad,
    single_layer_eval,
    single_layer_grad,
    single_layer_self_matrix,
    spectral_antiderivative,
    spectral_derivative,
    upsample,
)
from gapfield.validation import jump_relation_error, smooth_density

DISK = Disk((0.3, -0.2), 1.4)


def polar(disk, s, theta):
    return np.stack([disk.center[0] + s * disk.radius * np.cos(theta),
                     disk.center[1] + s * disk.radius * np.sin(theta)], axis=-1)


def test_constant_density_log_potential():
    grid = BoundaryGrid(DISK, 128)
    phi = BoundaryDensity(grid, np.full(128, 2.5))
    for s in (1.7, 3.0, 10.0):
        X = polar(DISK, s, np.array([0.3, 2.0]))
        R = s * DISK.radius
        for method in ("quadrature", "spectral"):
            assert np.allclose(single_layer_eval(phi, X, method=method), 2.5 * DISK.radius * math.log(R))
    X = polar(DISK, 0.4, np.array([1.0]))
    assert single_layer_eval(phi, X)[0] == pytest.approx(2.5 * DISK.radius * math.log(DISK.radius))


def test_mean_zero_density_far_field_decays():
    grid = BoundaryGrid(DISK, 128)
    phi = smooth_density(grid, 4).mean_zero()
    vals = [abs(single_layer_eval(phi, polar(DISK, R, np.array([0.7])))[0]) for R in (1e2, 1e3, 1e4)]
    assert vals[1] < vals[0] / 5 and vals[2] < vals[1] / 5


def test_double_layer_closed_forms():
    grid = BoundaryGrid(Disk((0.0, 0.0), 1.5), 128)
    A = np.array([0.8, -0.3])
    f = BoundaryDensity(grid, grid.nodes @ A)
    X = polar(grid.disk, 0.5, np.linspace(0, 6, 7))
    assert np.allclose(double_layer_eval(f, X), 0.5 * X @ A, atol=1e-13)
    c = BoundaryDensity(grid, np.full(128, 3.0))
    assert np.allclose(double_layer_eval(c, X), 3.0, atol=1e-13)
    assert np.allclose(double_layer_eval(c, polar(grid.disk, 2.0, np.linspace(0, 6, 7))), 0.0, atol=1e-13)


def test_kstar_on_circle():
    grid = BoundaryGrid(DISK, 64)
    assert np.allclose(kstar_apply(BoundaryDensity(grid, np.full(64, 3.0))).values, 1.5)
    assert np.allclose(kstar_apply(BoundaryDensity(grid, np.sin(grid.theta))).values, 0.0, atol=1e-15)
    assert np.allclose(kstar_apply(smooth_density(grid).mean_zero()).values, 0.0, atol=1e-14)


def test_jump_relations_against_one_sided_differences():
    assert jump_relation_error(512, seed=1) < 1e-6


def test_one_sided_gradients_match_jump_relation():
    grid = BoundaryGrid(DISK, 256)
    phi = smooth_density(grid, 2)
    nu = grid.normals_c
    for side in (+1, -1):
        G = to_complex(single_layer_grad(phi, grid.nodes, side=side))
        normal = (np.conj(nu) * G).real
        assert np.allclose(normal, side * 0.5 * phi.values + kstar_apply(phi).values, atol=1e-12)
        assert np.allclose(single_layer_boundary_grad(phi, side), single_layer_grad(phi, grid.nodes, side=side),
                           atol=1e-11)


def test_double_layer_value_jump():
    grid = BoundaryGrid(DISK, 256)
    f = smooth_density(grid, 3)
    inner = double_layer_eval(f, grid.nodes, method="spectral", side=-1)
    outer = double_layer_eval(f, grid.nodes, method="spectral", side=+1)
    assert np.allclose(inner - outer, f.values, atol=1e-12)


@pytest.mark.parametrize("s", [0.3, 0.8, 0.97, 1.03, 1.2, 2.5])
def test_quadrature_agrees_with_spectral(s):
    grid = BoundaryGrid(DISK, 256)
    phi = smooth_density(grid, 5)
    X = polar(DISK, s, np.linspace(0, 2 * np.pi, 17))
    for ev in (single_layer_eval, double_layer_eval):
        assert np.allclose(ev(phi, X), ev(phi, X, method="spectral"), atol=1e-11)
        if abs(s - 1) > 0.1:
            assert np.allclose(ev(phi, X, method="quadrature"), ev(phi, X, method="spectral"), atol=1e-11)
    for gr in (single_layer_grad, double_layer_grad):
        assert np.allclose(gr(phi, X), gr(phi, X, method="spectral"), atol=1e-10)


@pytest.mark.parametrize("delta", [1e-3, 1e-5, 1e-9])
def test_near_boundary_auto_route(delta):
    grid = BoundaryGrid(DISK, 128)
    phi = smooth_density(grid, 6)
    X = polar(DISK, 1 + delta, np.linspace(0, 2 * np.pi, 9))
    ref = single_layer_grad(phi, X, method="spectral")
    assert np.allclose(single_layer_grad(phi, X), ref, atol=1e-10)


def test_quadrature_refuses_on_circle():
    grid = BoundaryGrid(DISK, 64)
    with pytest.raises(DomainError):
        single_layer_eval(BoundaryDensity(grid, np.ones(64)), grid.nodes[:2], method="quadrature")


def test_trapezoid_converges_spectrally():
    X = polar(DISK, 2.0, np.array([0.4]))
    errs = []
    for M in (16, 32, 64, 128):
        grid = BoundaryGrid(DISK, M)
        phi = BoundaryDensity(grid, np.exp(np.cos(grid.theta)))
        errs.append(abs(single_layer_eval(phi, X, method="quadrature")[0]
                        - single_layer_eval(phi, X, method="spectral")[0]))
    assert errs[1] < 1e-3 * errs[0] and errs[2] < 1e-13


def test_reflection_identity_outside_and_inside():
    """For ``v`` harmonic in D, ``S(dv/dnu) + v o R / 2`` is constant outside;
    for decaying exterior ``v``, ``S(dv/dnu) - v o R / 2`` is constant inside."""
    grid = BoundaryGrid(DISK, 256)
    nu = grid.normals_c
    v_in = HarmonicPoly(DISK.zc + 0.1, (0.0, 1.0 - 0.4j, 0.3j, 0.1))
    dn = (np.conj(nu) * to_complex(v_in.grad(grid.nodes))).real
    X = polar(DISK, 1.8, np.linspace(0, 6, 40))
    diff = single_layer_eval(BoundaryDensity(grid, dn), X) + 0.5 * Pullback(v_in, DISK).value(X)
    assert np.ptp(diff) < 1e-8

    v_out = Pullback(Affine((0.6, 1.0)), DISK) - Affine((0.0, 0.0), float(np.array([0.6, 1.0]) @ DISK.center))
    dn = (np.conj(nu) * to_complex(v_out.grad(polar(DISK, 1 + 1e-13, grid.theta)))).real
    X = polar(DISK, 0.6, np.linspace(0, 6, 40))
    diff = single_layer_eval(BoundaryDensity(grid, dn), X) - 0.5 * Pullback(v_out, DISK).value(X)
    assert np.ptp(diff) < 1e-8


def test_self_matrix_matches_spectral_trace():
    grid = BoundaryGrid(DISK, 64)
    phi = smooth_density(grid, 1)
    S = single_layer_self_matrix(grid)
    assert np.allclose(S @ phi.values, single_layer_eval(phi, grid.nodes, method="spectral"), atol=1e-12)


@given(st.integers(4, 7), st.integers(0, 1000))
@settings(max_examples=20, deadline=None)
def test_fourier_helpers_roundtrip(logM, seed):
    M = 2**logM
    rng = np.random.default_rng(seed)
    theta = 2 * np.pi * np.arange(M) / M
    nmax = M // 2 - 1
    a = rng.normal(size=nmax + 1) + 1j * rng.normal(size=nmax + 1)
    a[0] = a[0].real
    vals = fourier_values(a, theta)
    assert np.allclose(fourier_coefficients(vals)[: nmax + 1], a)
    d = spectral_derivative(vals)
    assert np.allclose(spectral_derivative(spectral_antiderivative(d)), d)
    fine = upsample(vals, 4)
    assert np.allclose(fine[::4], vals)
    assert np.allclose(fine, fourier_values(a, 2 * np.pi * np.arange(4 * M) / (4 * M)))


def test_boundary_data_helpers():
    D = Disk((1.0, 2.0), 0.5)
    A = np.array([0.3, -0.7])
    data = BoundaryData.affine(D, A)
    t = np.linspace(0, 2 * np.pi, 11)
    X = D.boundary_points(t)
    assert np.allclose(data.values(t), X @ A)
    ext = data.harmonic_extension()
    assert np.allclose(ext.grad(np.array([[1.1, 2.1]])), A)
    g = BoundaryData.normal_component(D, A)
    assert np.allclose(g.values(t), np.cos(t) * A[0] + np.sin(t) * A[1])
    G = g.tangential_antiderivative()
    assert G.mean == 0.0
    assert np.allclose(G.tangential_derivative().values(t), g.values(t))
    with pytest.raises(ConfigurationError):
        data.tangential_antiderivative()
    with pytest.raises(ConfigurationError):
        data.single_layer_fields()


def test_single_layer_fields_match_quadrature():
    D = Disk((0.0, 0.5), 1.2)
    g = BoundaryData(D, (0.0, 0.4 - 0.2j, 0.1j))
    inside, outside = g.single_layer_fields()
    grid = BoundaryGrid(D, 128)
    dens = g.on_grid(grid)
    Xi, Xo = polar(D, 0.5, np.linspace(0, 6, 9)), polar(D, 1.7, np.linspace(0, 6, 9))
    assert np.allclose(inside.value(Xi), single_layer_eval(dens, Xi), atol=1e-12)
    assert np.allclose(outside.grad(Xo), single_layer_grad(dens, Xo), atol=1e-12)
