"""Hard boundary-condition enforcement: exactness, idempotence, adjoints."""

import numpy as np
import pytest

from geopinn import bcpad, meshgen, stencil
from geopinn.bcpad import (
    BCSpec,
    BoundaryConditionError,
    EdgeCondition,
    apply_dirichlet,
    apply_neumann,
    apply_periodic,
    enforce,
    enforce_backward,
    neumann_residual,
    normal_derivative,
)

from conftest import identity_mesh, polar_annulus_mesh, rectangle_bc


@pytest.fixture()
def metrics():
    return meshgen.compute_metrics(identity_mesh(9, 8))


def all_dirichlet(value=0.0):
    return BCSpec({e: EdgeCondition("dirichlet", value)
                   for e in ("bottom", "top", "left", "right")})


class TestDirichlet:
    def test_zero_edge(self, metrics):
        rng = np.random.default_rng(0)
        f = rng.standard_normal((8, 9))
        out = apply_dirichlet(f, "top", 0.0)
        assert np.all(out[-1] == 0.0)
        assert np.array_equal(out[:-1], f[:-1])

    def test_mixed_constant_edges(self, metrics):
        # hot walls with a cold top edge
        f = np.zeros((8, 9))
        spec = BCSpec({
            "bottom": EdgeCondition("dirichlet", 1.0),
            "left": EdgeCondition("dirichlet", 1.0),
            "right": EdgeCondition("dirichlet", 1.0),
            "top": EdgeCondition("dirichlet", 0.0),
        })
        out = enforce(f, spec, metrics)
        assert np.all(out[0] == 1.0) and np.all(out[-1] == 0.0)
        assert np.all(out[1:-1, 0] == 1.0) and np.all(out[1:-1, -1] == 1.0)

    def test_idempotent_bitwise(self, metrics):
        rng = np.random.default_rng(1)
        f = rng.standard_normal((8, 9))
        vals = rng.standard_normal(9)
        once = apply_dirichlet(f, "bottom", vals)
        assert np.array_equal(apply_dirichlet(once, "bottom", vals), once)

    def test_length_mismatch(self, metrics):
        with pytest.raises(BoundaryConditionError):
            apply_dirichlet(np.zeros((8, 9)), "bottom", np.zeros(5))


class TestNeumann:
    def test_constant_field_zero_flux(self, metrics):
        f = np.full((8, 9), 4.2)
        out = apply_neumann(f, "bottom", 0.0, metrics)
        assert np.allclose(out[0], 4.2, atol=1e-12)

    def test_linear_profile_continued(self, metrics):
        # field linear in the wall-normal coordinate with slope s
        s = 0.7
        eta = np.arange(8, dtype=float)[:, None] * np.ones((1, 9))
        f = s * eta
        out = apply_neumann(f, "bottom", -s, metrics)  # outward at bottom is -eta
        assert np.allclose(out[0], 0.0, atol=1e-12)
        out = apply_neumann(f, "top", s, metrics)
        assert np.allclose(out[-1], s * 7.0, atol=1e-12)

    @pytest.mark.parametrize("edge", ["bottom", "top", "left", "right"])
    def test_closed_loop_zero_flux(self, metrics, edge):
        rng = np.random.default_rng(3)
        f = rng.standard_normal((8, 9))
        out = apply_neumann(f, edge, 0.0, metrics)
        assert np.abs(normal_derivative(out, edge, metrics)).max() < 1e-12

    def test_closed_loop_on_curvilinear_mesh(self):
        mesh = polar_annulus_mesh(17, 9)
        m = meshgen.compute_metrics(mesh)
        rng = np.random.default_rng(4)
        f = rng.standard_normal(mesh.shape)
        flux = rng.standard_normal(17)
        out = apply_neumann(f, "top", flux, m)
        assert np.abs(normal_derivative(out, "top", m) - flux).max() < 1e-12


class TestPeriodic:
    def test_seam_mirroring(self):
        rng = np.random.default_rng(5)
        f = rng.standard_normal((8, 9))
        out = apply_periodic(f)
        assert np.array_equal(out[:, -1], out[:, 0])
        assert np.array_equal(out[:, :-1], f[:, :-1])

    def test_equal_seam_unchanged(self):
        rng = np.random.default_rng(6)
        f = rng.standard_normal((8, 9))
        f[:, -1] = f[:, 0]
        assert np.array_equal(apply_periodic(f), f)

    def test_seam_derivative_matches_analytic(self):
        mesh = polar_annulus_mesh(65, 9)
        m = meshgen.compute_metrics(mesh)
        theta = np.arctan2(mesh.y, mesh.x)
        f = np.sin(theta)  # periodic, smooth across the seam
        d = stencil.d_dxi(f, mesh.ref, periodic_xi=True)
        h_theta = 2 * np.pi / 64
        exact = np.cos(theta) * h_theta
        assert np.abs(d[:, 0] - exact[:, 0]).max() < 1e-4

    def test_constant_derivative_zero_across_seam(self):
        ref = polar_annulus_mesh(17, 9).ref
        f = np.full((9, 17), 3.0)
        assert np.abs(stencil.d_dxi(f, ref, periodic_xi=True)).max() < 1e-13

    def test_unpaired_edge_rejected(self):
        with pytest.raises(BoundaryConditionError):
            BCSpec({
                "left": EdgeCondition("periodic", partner="right"),
                "right": EdgeCondition("dirichlet", 0.0),
                "bottom": EdgeCondition("dirichlet", 0.0),
                "top": EdgeCondition("dirichlet", 0.0),
            })


class TestEnforcement:
    def make_mixed_spec(self):
        return BCSpec({
            "bottom": EdgeCondition("dirichlet", 1.0),
            "top": EdgeCondition("neumann", 0.0),
            "left": EdgeCondition("neumann", 0.0),
            "right": EdgeCondition("dirichlet", 0.0),
        })

    def test_interior_untouched(self, metrics):
        rng = np.random.default_rng(7)
        f = rng.standard_normal((8, 9))
        out = enforce(f, self.make_mixed_spec(), metrics)
        assert np.array_equal(out[1:-1, 1:-1], f[1:-1, 1:-1])

    def test_idempotent(self, metrics):
        rng = np.random.default_rng(8)
        f = rng.standard_normal((8, 9))
        spec = self.make_mixed_spec()
        once = enforce(f, spec, metrics)
        twice = enforce(once, spec, metrics)
        assert np.array_equal(once, twice)

    def test_corner_rule(self, metrics):
        f = np.zeros((8, 9))
        spec = BCSpec({
            "bottom": EdgeCondition("dirichlet", 2.0),
            "top": EdgeCondition("dirichlet", 3.0),
            "left": EdgeCondition("dirichlet", 5.0),
            "right": EdgeCondition("neumann", 0.0),
        })
        out = enforce(f, spec, metrics)
        # eta-edge dirichlet claims corners over the xi-edges
        assert out[0, 0] == 2.0 and out[-1, 0] == 3.0
        assert out[0, -1] == 2.0 and out[-1, -1] == 3.0
        assert spec.corner_owner("bottom-left") == "bottom"
        assert spec.corner_owner("top-right") == "top"

    def test_neumann_corner_falls_to_dirichlet_side(self, metrics):
        spec = BCSpec({
            "bottom": EdgeCondition("neumann", 0.0),
            "top": EdgeCondition("dirichlet", 0.0),
            "left": EdgeCondition("dirichlet", 7.0),
            "right": EdgeCondition("dirichlet", 7.0),
        })
        rng = np.random.default_rng(9)
        out = enforce(rng.standard_normal((8, 9)), spec, metrics)
        assert out[0, 0] == 7.0 and out[0, -1] == 7.0  # corners keep the xi-edge value
        assert neumann_residual(out, spec, metrics) < 1e-12

    def test_mixed_spec_neumann_residual(self, metrics):
        rng = np.random.default_rng(10)
        out = enforce(rng.standard_normal((8, 9)), self.make_mixed_spec(), metrics)
        assert neumann_residual(out, self.make_mixed_spec(), metrics) < 1e-12

    def test_periodic_with_dirichlet_rings(self):
        mesh = polar_annulus_mesh(17, 9)
        m = meshgen.compute_metrics(mesh)
        spec = BCSpec({
            "bottom": EdgeCondition("dirichlet", 5.0),
            "top": EdgeCondition("dirichlet", 0.0),
            "left": EdgeCondition("periodic", partner="right"),
            "right": EdgeCondition("periodic", partner="left"),
        })
        rng = np.random.default_rng(11)
        out = enforce(rng.standard_normal(mesh.shape), spec, m)
        assert np.all(out[0] == 5.0) and np.all(out[-1] == 0.0)
        assert np.array_equal(out[:, -1], out[:, 0])


class TestAdjoints:
    @pytest.mark.parametrize("periodic", [False, True])
    def test_enforce_backward_is_adjoint_of_linearization(self, periodic):
        if periodic:
            mesh = polar_annulus_mesh(17, 9)
            spec = BCSpec({
                "bottom": EdgeCondition("dirichlet", 1.0),
                "top": EdgeCondition("neumann", 0.3),
                "left": EdgeCondition("periodic", partner="right"),
                "right": EdgeCondition("periodic", partner="left"),
            })
        else:
            mesh = identity_mesh(9, 8)
            spec = BCSpec({
                "bottom": EdgeCondition("dirichlet", 1.0),
                "top": EdgeCondition("neumann", 0.0),
                "left": EdgeCondition("neumann", 0.5),
                "right": EdgeCondition("dirichlet", 0.0),
            })
        m = meshgen.compute_metrics(mesh)
        rng = np.random.default_rng(12)
        f0 = rng.standard_normal(mesh.shape)
        df = rng.standard_normal(mesh.shape)
        g = rng.standard_normal(mesh.shape)
        # enforcement is affine: enforce(f0 + df) - enforce(f0) is its linear part
        jvp = enforce(f0 + df, spec, m) - enforce(f0, spec, m)
        vjp = enforce_backward(g, spec, m)
        assert abs(np.vdot(jvp, g) - np.vdot(df, vjp)) < 1e-10

    def test_dirichlet_nodes_get_zero_gradient(self):
        mesh = identity_mesh(9, 8)
        m = meshgen.compute_metrics(mesh)
        spec = BCSpec({e: EdgeCondition("dirichlet", 1.0)
                       for e in ("bottom", "top", "left", "right")})
        g = np.ones(mesh.shape)
        back = enforce_backward(g, spec, m)
        assert np.all(back[0] == 0) and np.all(back[-1] == 0)
        assert np.all(back[:, 0] == 0) and np.all(back[:, -1] == 0)
        assert np.all(back[1:-1, 1:-1] == 1.0)
