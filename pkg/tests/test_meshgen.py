"""Elliptic mapping generation: exactness, residuals, witnesses, I/O."""

import numpy as np
import pytest

from geopinn import meshgen
from geopinn.grid import (
    BoundaryCurves,
    GridError,
    ReferenceGrid,
    read_boundary_file,
    read_mesh_file,
    write_boundary_file,
    write_mesh_file,
)
from geopinn.meshgen import (
    MeshFoldError,
    MeshGenerationError,
    compute_metrics,
    generate_mapping,
    verify_inverse_laplacian,
)

from conftest import (
    affine_mesh,
    annulus_bc,
    conformal_eccentric_mesh,
    identity_mesh,
    rectangle_bc,
)


def independent_equation_residual(x, y, periodic):
    """Straightforward re-discretization of the mapping equations (test oracle).

    Deliberately written as plain loops, independent of the library sweep.
    """
    n_eta, n_xi = x.shape
    p = n_xi - 1
    worst = 0.0
    for j in range(1, n_eta - 1):
        cols = range(0, p) if periodic else range(1, n_xi - 1)
        for i in cols:
            ip = (i + 1) % p if periodic else i + 1
            im = (i - 1) % p if periodic else i - 1
            for f in (x, y):
                f_xi = (f[j, ip] - f[j, im]) / 2
                f_eta = (f[j + 1, i] - f[j - 1, i]) / 2
                g_xi = (x[j, ip] - x[j, im]) / 2, (y[j, ip] - y[j, im]) / 2
                g_eta = (x[j + 1, i] - x[j - 1, i]) / 2, (y[j + 1, i] - y[j - 1, i]) / 2
                alpha = g_eta[0] ** 2 + g_eta[1] ** 2
                gamma = g_xi[0] ** 2 + g_xi[1] ** 2
                beta = g_xi[0] * g_eta[0] + g_xi[1] * g_eta[1]
                f_xixi = f[j, ip] - 2 * f[j, i] + f[j, im]
                f_etaeta = f[j + 1, i] - 2 * f[j, i] + f[j - 1, i]
                f_cross = (f[j + 1, ip] - f[j + 1, im] - f[j - 1, ip] + f[j - 1, im]) / 4
                worst = max(worst, abs(alpha * f_xixi - 2 * beta * f_cross + gamma * f_etaeta))
    return worst


class TestGenerateMapping:
    def test_rectangle_equals_affine_lattice(self):
        n = 17
        bc = rectangle_bc(n, n, width=2.0, height=1.0)
        mesh = generate_mapping(bc, ReferenceGrid(n, n), tol=1e-12)
        xs = np.linspace(0.0, 2.0, n)
        ys = np.linspace(0.0, 1.0, n)
        assert np.abs(mesh.x - xs[None, :]).max() < 1e-10
        assert np.abs(mesh.y - ys[:, None]).max() < 1e-10

    def test_parallelogram_affine_exactness(self):
        n = 13
        u = np.linspace(0.0, 1.0, n)
        v = np.linspace(0.0, 1.0, n)
        a = np.array([1.5, 0.2])
        b = np.array([0.4, 1.1])
        edges = {
            "bottom": np.outer(u, a),
            "top": np.outer(u, a) + b,
            "left": np.outer(v, b),
            "right": np.outer(v, b) + a,
        }
        mesh = generate_mapping(BoundaryCurves(edges=edges), ReferenceGrid(n, n), tol=1e-12)
        exact_x = np.add.outer(v * b[0], u * a[0])
        exact_y = np.add.outer(v * b[1], u * a[1])
        assert np.abs(mesh.x - exact_x).max() < 1e-10
        assert np.abs(mesh.y - exact_y).max() < 1e-10
        jac = compute_metrics(mesh).jac
        assert np.ptp(jac) < 1e-9 * np.abs(jac).max()

    def test_annulus_residual_against_independent_rediscretization(self):
        bc = annulus_bc(33, 17)
        mesh = generate_mapping(bc, ReferenceGrid(33, 17), tol=1e-8, sor=1.7)
        res = independent_equation_residual(mesh.x, mesh.y, periodic=True)
        assert res <= 1e-8
        jac = compute_metrics(mesh).jac
        assert jac.max() < 0 or jac.min() > 0  # single sign

    def test_boundary_preserved_bitwise(self):
        bc = rectangle_bc(9, 11)
        bc.edges["bottom"][:, 1] += 0.05 * np.sin(np.linspace(0, np.pi, 9))
        mesh = generate_mapping(bc, ReferenceGrid(9, 11), tol=1e-10)
        assert np.array_equal(mesh.x[0, :], bc.edges["bottom"][:, 0])
        assert np.array_equal(mesh.y[0, :], bc.edges["bottom"][:, 1])
        assert np.array_equal(mesh.x[:, -1], bc.edges["right"][:, 0])

    def test_self_intersecting_boundary_folds(self):
        n = 9
        u = np.linspace(0.0, 1.0, n)
        # bowtie: top edge runs right-to-left across the bottom edge
        edges = {
            "bottom": np.stack([u, np.zeros(n)], axis=1),
            "top": np.stack([1.0 - u, np.full(n, 0.4)], axis=1),
            "left": np.stack([np.linspace(0, 1, n), np.linspace(0, 0.4, n)], axis=1),
            "right": np.stack([np.linspace(1, 0, n), np.linspace(0, 0.4, n)], axis=1),
        }
        with pytest.raises(MeshFoldError):
            generate_mapping(BoundaryCurves(edges=edges), ReferenceGrid(n, n), tol=1e-8)

    def test_nonconvergence_reports_residual(self):
        bc = annulus_bc(33, 17)
        with pytest.raises(MeshGenerationError) as err:
            generate_mapping(bc, ReferenceGrid(33, 17), tol=1e-12, max_iter=3)
        assert err.value.residual is not None and err.value.residual > 1e-12

    def test_determinism(self):
        bc = annulus_bc(17, 9)
        m1 = generate_mapping(bc, ReferenceGrid(17, 9), tol=1e-9)
        m2 = generate_mapping(annulus_bc(17, 9), ReferenceGrid(17, 9), tol=1e-9)
        assert np.array_equal(m1.x, m2.x) and np.array_equal(m1.y, m2.y)

    def test_node_count_mismatch_rejected(self):
        bc = rectangle_bc(9, 9)
        with pytest.raises(GridError):
            generate_mapping(bc, ReferenceGrid(11, 9), tol=1e-8)


class TestComputeMetrics:
    def test_identity(self):
        m = compute_metrics(identity_mesh(8, 8))
        assert np.allclose(m.dx_dxi, 1.0) and np.allclose(m.dy_deta, 1.0)
        assert np.allclose(m.dx_deta, 0.0, atol=1e-12)
        assert np.allclose(m.jac, 1.0)

    def test_affine_scaling(self):
        m = compute_metrics(affine_mesh(8, 8, sx=2.0, sy=3.0))
        assert np.allclose(m.dx_dxi, 2.0) and np.allclose(m.dy_deta, 3.0)
        assert np.allclose(m.jac, 6.0)

    def test_sinusoidal_shear_accuracy(self):
        # x = xi + 0.1 sin(pi eta), y = eta on a unit-square parameterization
        errs = []
        for n in (17, 33):
            u = np.linspace(0.0, 1.0, n)
            ref = ReferenceGrid(n, n, d_xi=1.0 / (n - 1), d_eta=1.0 / (n - 1))
            uu, vv = np.meshgrid(u, u)
            from geopinn.grid import CurvilinearMesh

            mesh = CurvilinearMesh(x=uu + 0.1 * np.sin(np.pi * vv), y=vv, ref=ref)
            m = compute_metrics(mesh)
            exact = 0.1 * np.pi * np.cos(np.pi * vv)
            errs.append(np.abs(m.dx_deta - exact).max())
        assert errs[0] / errs[1] >= 2**2.8  # boundary zone limits to ~3rd order

    def test_jacobian_floor_violation(self):
        mesh = identity_mesh(8, 8)
        mesh.x[3, 3:5] = mesh.x[3, 4:2:-1]  # swap two interior nodes
        with pytest.raises(MeshFoldError):
            compute_metrics(mesh)


class TestInverseLaplacianWitness:
    def test_identity_mesh_is_exact(self):
        mesh = identity_mesh(9, 9)
        n_xi, n_eta = verify_inverse_laplacian(mesh, compute_metrics(mesh))
        assert n_xi < 1e-12 and n_eta < 1e-12

    def test_exact_elliptic_map_refines_at_least_second_order(self):
        norms = []
        for n in (33, 65):
            mesh = conformal_eccentric_mesh(n, (n - 1) // 2 + 1)
            norms.append(verify_inverse_laplacian(mesh, compute_metrics(mesh)))
        assert norms[0][0] / norms[1][0] >= 4.0
        assert norms[0][1] / norms[1][1] >= 4.0

    def test_generated_annulus_norms_decrease_under_refinement(self):
        norms = []
        for n_xi, n_eta in ((33, 17), (65, 33)):
            bc = annulus_bc(n_xi, n_eta)
            mesh = generate_mapping(bc, ReferenceGrid(n_xi, n_eta), tol=1e-11, sor=1.8)
            norms.append(verify_inverse_laplacian(mesh, compute_metrics(mesh)))
        assert norms[1][1] < norms[0][1]

    def test_unconverged_mesh_has_larger_norms(self):
        bc = annulus_bc(33, 17)
        loose = generate_mapping(annulus_bc(33, 17), ReferenceGrid(33, 17), tol=1e-1)
        tight = generate_mapping(bc, ReferenceGrid(33, 17), tol=1e-10, sor=1.7)
        n_loose = verify_inverse_laplacian(loose, compute_metrics(loose))
        n_tight = verify_inverse_laplacian(tight, compute_metrics(tight))
        assert n_loose[1] > n_tight[1]


class TestFileRoundTrip:
    def test_boundary_file_roundtrip(self, tmp_path):
        bc = annulus_bc(17, 9)
        path = tmp_path / "boundary.txt"
        write_boundary_file(path, bc)
        back = read_boundary_file(path)
        for edge in ("bottom", "top", "left", "right"):
            assert np.array_equal(bc.edges[edge], back.edges[edge])
        assert back.periodic == ("left", "right")

    def test_mesh_file_roundtrip(self, tmp_path):
        bc = annulus_bc(17, 9)
        mesh = generate_mapping(bc, ReferenceGrid(17, 9), tol=1e-9)
        path = tmp_path / "out.mesh"
        write_mesh_file(path, mesh)
        back = read_mesh_file(path)
        assert np.array_equal(mesh.x, back.x) and np.array_equal(mesh.y, back.y)
        assert back.periodic_xi
