"""Independent interface checks built directly on the layer potentials."""
import numpy as np

from gapfield.geometry import to_complex, to_points
from gapfield.potentials import BoundaryGrid, single_layer_eval, single_layer_grad


def _normal(G, nu):
    return (np.conj(nu) * to_complex(G)).real


def two_disk_interface(sol, i: int, M: int = 256):
    """(continuity error, flux error, gradient scale) at the nodes of ``dB_i``."""
    geo = sol.geometry
    k = (sol.config.k1, sol.config.k2)[i - 1]
    grid = BoundaryGrid(geo.disks[i - 1], M)
    own, other = sol.densities[i - 1], sol.densities[2 - i]
    P = grid.nodes
    base_u = sol.H._value(grid.nodes_c) + single_layer_eval(other, P)
    base_g = to_points(sol.H._grad(grid.nodes_c)) + single_layer_grad(other, P)
    u_out = base_u + single_layer_eval(own, P, side=+1)
    u_in = base_u + single_layer_eval(own, P, side=-1)
    g_out = base_g + single_layer_grad(own, P, side=+1)
    g_in = base_g + single_layer_grad(own, P, side=-1)
    nu = grid.normals_c
    scale = float(np.max(np.abs(to_complex(g_out))))
    cont = float(np.max(np.abs(u_out - u_in)))
    flux = float(np.max(np.abs(k * _normal(g_in, nu) - _normal(g_out, nu))))
    return cont, flux, scale


def dirichlet_interface(sol, M: int = 256):
    """Continuity and flux on ``dB`` plus the boundary-data error on ``dOmega``."""
    geo = sol.geometry
    g, phi = sol.densities
    k = sol.config.k
    grid = BoundaryGrid(geo.B, M)
    P, z = grid.nodes, grid.nodes_c
    base_u = sol.driver.inside._value(z) - single_layer_eval(g, P, side=-1)
    base_g = to_points(sol.driver.inside._grad(z)) - single_layer_grad(g, P, side=-1)
    u_out = base_u + single_layer_eval(phi, P, side=+1)
    u_in = base_u + single_layer_eval(phi, P, side=-1)
    g_out = base_g + single_layer_grad(phi, P, side=+1)
    g_in = base_g + single_layer_grad(phi, P, side=-1)
    nu = grid.normals_c
    scale = float(np.max(np.abs(to_complex(g_out))))
    cont = float(np.max(np.abs(u_out - u_in)))
    flux = float(np.max(np.abs(k * _normal(g_in, nu) - _normal(g_out, nu))))
    go = BoundaryGrid(geo.Omega, M)
    u_bdry = sol.driver.inside._value(go.nodes_c) - single_layer_eval(g, go.nodes, side=-1) + single_layer_eval(phi, go.nodes)
    data = float(np.max(np.abs(u_bdry - sol.driver.data.values(go.theta))))
    return cont, flux, scale, data


def neumann_interface(sol, M: int = 256):
    """Continuity and flux on ``dB`` plus the Neumann-data error on ``dOmega``.

    The outer side comes from the conjugate layer potentials; the inner side
    from the Dirichlet-to-Neumann map of the trace on ``dB``.
    """
    geo = sol.geometry
    k = sol.config.k
    grid = BoundaryGrid(geo.B, M)
    z = grid.nodes_c
    u_out = -sol._conj_v(z) + sol.constant
    ext = sol._trace_B.harmonic_extension()
    u_in = ext._value(z) + sol.constant
    nu = grid.normals_c
    g_out = sol.grad(sol._out_point(z))
    g_out_c = sol.frame.vector_to_canonical(to_complex(g_out))
    g_in_c = ext._grad(z)
    scale = float(np.max(np.abs(g_out_c)))
    cont = float(np.max(np.abs(u_out - u_in)))
    flux = float(np.max(np.abs(k * (np.conj(nu) * g_in_c).real - (np.conj(nu) * g_out_c).real)))
    go = BoundaryGrid(geo.Omega, M)
    gb = sol.frame.vector_to_canonical(to_complex(sol.grad(sol._out_point(go.nodes_c))))
    data = float(np.max(np.abs((np.conj(go.normals_c) * gb).real - sol.data.values(go.theta))))
    return cont, flux, scale, data


def sample_annulus(geo, n, rng):
    """``n`` canonical points in the annulus away from both circles."""
    out = []
    while len(out) < n:
        z = complex(*rng.uniform(-geo.rho, geo.rho, 2))
        if abs(z) < 0.97 * geo.rho and abs(z - geo.B.zc) > 1.03 * geo.r:
            out.append(z)
    return np.array(out)


def sample_disk(disk, n, rng, frac=0.95):
    r = disk.radius * frac * np.sqrt(rng.uniform(0, 1, n))
    t = rng.uniform(0, 2 * np.pi, n)
    return disk.zc + r * np.exp(1j * t)
