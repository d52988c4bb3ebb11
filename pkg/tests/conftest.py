"""Shared geometry builders and fixtures."""

import numpy as np
import pytest

from geopinn.grid import BoundaryCurves, CurvilinearMesh, ReferenceGrid


def rectangle_bc(n_xi, n_eta, width=1.0, height=1.0):
    xs = np.linspace(0.0, width, n_xi)
    ys = np.linspace(0.0, height, n_eta)
    return BoundaryCurves(
        edges={
            "bottom": np.stack([xs, np.zeros(n_xi)], axis=1),
            "top": np.stack([xs, np.full(n_xi, height)], axis=1),
            "left": np.stack([np.zeros(n_eta), ys], axis=1),
            "right": np.stack([np.full(n_eta, width), ys], axis=1),
        }
    )


def annulus_bc(n_xi, n_eta, r=0.5, big_r=1.0):
    theta = np.linspace(0.0, 2.0 * np.pi, n_xi)
    bottom = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)
    top = np.stack([big_r * np.cos(theta), big_r * np.sin(theta)], axis=1)
    bottom[-1] = bottom[0]
    top[-1] = top[0]
    cut = np.stack([np.linspace(r, big_r, n_eta), np.zeros(n_eta)], axis=1)
    cut[0] = bottom[0]
    cut[-1] = top[0]
    return BoundaryCurves(
        edges={"bottom": bottom, "top": top, "left": cut.copy(), "right": cut.copy()},
        periodic=("left", "right"),
    )


def identity_mesh(n_xi, n_eta):
    x, y = np.meshgrid(np.arange(n_xi, dtype=float), np.arange(n_eta, dtype=float))
    return CurvilinearMesh(x=x, y=y, ref=ReferenceGrid(n_xi, n_eta))


def affine_mesh(n_xi, n_eta, sx=2.0, sy=3.0):
    x, y = np.meshgrid(np.arange(n_xi, dtype=float), np.arange(n_eta, dtype=float))
    return CurvilinearMesh(x=sx * x, y=sy * y, ref=ReferenceGrid(n_xi, n_eta))


def polar_annulus_mesh(n_xi, n_eta, r=0.5, big_r=1.0):
    """Analytic cut-annulus mesh with linear radial spacing (periodic in xi)."""
    theta = 2.0 * np.pi * np.linspace(0.0, 1.0, n_xi)
    rho = np.linspace(r, big_r, n_eta)
    t, p = np.meshgrid(theta, rho)
    return CurvilinearMesh(
        x=p * np.cos(t), y=p * np.sin(t), ref=ReferenceGrid(n_xi, n_eta), periodic_xi=True
    )


def conformal_eccentric_mesh(n_xi, n_eta, q=0.5, c=0.2):
    """Exact elliptic (conformal) mapping of an eccentric annulus."""
    xi = np.linspace(0.0, 1.0, n_xi)
    eta = np.linspace(0.0, 1.0, n_eta)
    t, e = np.meshgrid(2.0 * np.pi * xi, eta)
    z = q ** (1.0 - e) * np.exp(1j * t)
    w = (z - c) / (1.0 - c * z)
    return CurvilinearMesh(
        x=w.real, y=w.imag, ref=ReferenceGrid(n_xi, n_eta), periodic_xi=True
    )


@pytest.fixture(scope="session", autouse=True)
def warm_numba_kernels():
    """Compile the relaxation kernels once so timed tests measure algorithm cost."""
    from geopinn import meshgen, oracle
    from geopinn.bcpad import BCSpec, EdgeCondition

    bc = rectangle_bc(6, 6)
    mesh = meshgen.generate_mapping(bc, ReferenceGrid(6, 6), tol=1e-6, max_iter=500)
    spec = BCSpec({e: EdgeCondition("dirichlet", 0.0) for e in ("bottom", "top", "left", "right")})
    oracle.solve_heat(mesh, None, spec, tol=1e-3, max_iter=200)
