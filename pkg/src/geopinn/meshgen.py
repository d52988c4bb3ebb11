"""Elliptic generation of boundary-fitted curvilinear meshes.

The forward map from the uniform reference rectangle to the physical
domain is obtained by relaxing the quasi-linear system

    a * x_xixi - 2 b * x_xieta + c * x_etaeta = 0     (same for y)

    a = x_eta^2 + y_eta^2
    c = x_xi^2 + y_xi^2
    b = x_xi * x_eta + y_xi * y_eta

with the prescribed boundary polylines held fixed.  Interior nodes start
from transfinite (bilinear blending) interpolation of the boundary and are
relaxed by pointwise Gauss-Seidel with an optional over-relaxation factor;
the coefficients a, b, c are frozen at the start of each sweep.  All terms
are discretized with second-order central differences on the unit-spaced
reference lattice.

For a periodic-xi mesh (cut doubly-connected domain) the cut columns are
wrap-around neighbours inside the sweep and relax with the interior, so
the converged mapping is seamlessly periodic; only the bottom/top edges
are pinned.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from . import stencil
from .grid import (
    MASK_INTERIOR,
    BoundaryCurves,
    CurvilinearMesh,
    GridError,
    ReferenceGrid,
    TransformMetrics,
    node_mask,
)


class MeshGenerationError(GridError):
    """Elliptic relaxation failed to reach the requested residual."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class MeshFoldError(GridError):
    """The discrete Jacobian determinant changes sign (folded cells)."""


def transfinite_init(bc: BoundaryCurves, ref: ReferenceGrid) -> CurvilinearMesh:
    """Bilinear blending of the four boundary polylines."""
    if bc.n_xi != ref.n_xi or bc.n_eta != ref.n_eta:
        raise GridError(
            f"boundary node counts ({bc.n_xi}, {bc.n_eta}) do not match the "
            f"reference grid ({ref.n_xi}, {ref.n_eta})"
        )
    u = np.linspace(0.0, 1.0, ref.n_xi)[None, :]
    v = np.linspace(0.0, 1.0, ref.n_eta)[:, None]
    out = []
    for k in range(2):
        b = bc.edges["bottom"][:, k][None, :]
        t = bc.edges["top"][:, k][None, :]
        l = bc.edges["left"][:, k][:, None]
        r = bc.edges["right"][:, k][:, None]
        c_bl, c_br = bc.edges["bottom"][0, k], bc.edges["bottom"][-1, k]
        c_tl, c_tr = bc.edges["top"][0, k], bc.edges["top"][-1, k]
        blend = (
            (1 - u) * l
            + u * r
            + (1 - v) * b
            + v * t
            - ((1 - u) * (1 - v) * c_bl + u * (1 - v) * c_br + (1 - u) * v * c_tl + u * v * c_tr)
        )
        out.append(blend)
    mesh = CurvilinearMesh(x=out[0], y=out[1], ref=ref, periodic_xi=bc.periodic is not None)
    # Boundary rows/columns must carry the prescribed points bitwise.
    mesh.x[0, :], mesh.y[0, :] = bc.edges["bottom"].T
    mesh.x[-1, :], mesh.y[-1, :] = bc.edges["top"].T
    mesh.x[:, 0], mesh.y[:, 0] = bc.edges["left"].T
    mesh.x[:, -1], mesh.y[:, -1] = bc.edges["right"].T
    return mesh


@njit(cache=True)
def _coefficients(x, y, periodic):  # pragma: no cover - exercised via wrapper
    n_eta, n_xi = x.shape
    p = n_xi - 1
    a = np.zeros_like(x)
    b = np.zeros_like(x)
    c = np.zeros_like(x)
    for j in range(1, n_eta - 1):
        i0 = 0 if periodic else 1
        i1 = p if periodic else n_xi - 1
        for i in range(i0, i1):
            ip = (i + 1) % p if periodic else i + 1
            im = (i - 1) % p if periodic else i - 1
            x_xi = 0.5 * (x[j, ip] - x[j, im])
            y_xi = 0.5 * (y[j, ip] - y[j, im])
            x_eta = 0.5 * (x[j + 1, i] - x[j - 1, i])
            y_eta = 0.5 * (y[j + 1, i] - y[j - 1, i])
            a[j, i] = x_eta * x_eta + y_eta * y_eta
            c[j, i] = x_xi * x_xi + y_xi * y_xi
            b[j, i] = x_xi * x_eta + y_xi * y_eta
    return a, b, c


@njit(cache=True)
def _sweep(x, y, a, b, c, omega, periodic):  # pragma: no cover - exercised via wrapper
    n_eta, n_xi = x.shape
    p = n_xi - 1
    for j in range(1, n_eta - 1):
        i0 = 0 if periodic else 1
        i1 = p if periodic else n_xi - 1
        for i in range(i0, i1):
            ip = (i + 1) % p if periodic else i + 1
            im = (i - 1) % p if periodic else i - 1
            denom = 2.0 * (a[j, i] + c[j, i])
            if denom <= 0.0:
                continue
            cross_x = 0.25 * (
                x[j + 1, ip] - x[j + 1, im] - x[j - 1, ip] + x[j - 1, im]
            )
            cross_y = 0.25 * (
                y[j + 1, ip] - y[j + 1, im] - y[j - 1, ip] + y[j - 1, im]
            )
            gx = (
                a[j, i] * (x[j, ip] + x[j, im])
                + c[j, i] * (x[j + 1, i] + x[j - 1, i])
                - 2.0 * b[j, i] * cross_x
            ) / denom
            gy = (
                a[j, i] * (y[j, ip] + y[j, im])
                + c[j, i] * (y[j + 1, i] + y[j - 1, i])
                - 2.0 * b[j, i] * cross_y
            ) / denom
            x[j, i] += omega * (gx - x[j, i])
            y[j, i] += omega * (gy - y[j, i])
    if periodic:
        for j in range(n_eta):
            x[j, n_xi - 1] = x[j, 0]
            y[j, n_xi - 1] = y[j, 0]


@njit(cache=True)
def _max_residual(x, y, periodic):  # pragma: no cover - exercised via wrapper
    """(raw equation residual, displacement-scaled residual), both max-norm.

    The raw figure is the residual of the discretized mapping equations;
    the scaled one divides by the Gauss-Seidel diagonal 2(a + c) and so
    measures how far nodes still want to move, which keeps the stopping
    test meaningful when the metric coefficients shrink under refinement.
    """
    n_eta, n_xi = x.shape
    p = n_xi - 1
    r = 0.0
    rs = 0.0
    for j in range(1, n_eta - 1):
        i0 = 0 if periodic else 1
        i1 = p if periodic else n_xi - 1
        for i in range(i0, i1):
            ip = (i + 1) % p if periodic else i + 1
            im = (i - 1) % p if periodic else i - 1
            x_xi = 0.5 * (x[j, ip] - x[j, im])
            y_xi = 0.5 * (y[j, ip] - y[j, im])
            x_eta = 0.5 * (x[j + 1, i] - x[j - 1, i])
            y_eta = 0.5 * (y[j + 1, i] - y[j - 1, i])
            a = x_eta * x_eta + y_eta * y_eta
            c = x_xi * x_xi + y_xi * y_xi
            b = x_xi * x_eta + y_xi * y_eta
            xee = x[j + 1, i] - 2.0 * x[j, i] + x[j - 1, i]
            yee = y[j + 1, i] - 2.0 * y[j, i] + y[j - 1, i]
            xxx = x[j, ip] - 2.0 * x[j, i] + x[j, im]
            yxx = y[j, ip] - 2.0 * y[j, i] + y[j, im]
            cross_x = 0.25 * (x[j + 1, ip] - x[j + 1, im] - x[j - 1, ip] + x[j - 1, im])
            cross_y = 0.25 * (y[j + 1, ip] - y[j + 1, im] - y[j - 1, ip] + y[j - 1, im])
            rx = abs(a * xxx - 2.0 * b * cross_x + c * xee)
            ry = abs(a * yxx - 2.0 * b * cross_y + c * yee)
            if rx > r:
                r = rx
            if ry > r:
                r = ry
            denom = 2.0 * (a + c)
            if denom > 0.0:
                if rx / denom > rs:
                    rs = rx / denom
                if ry / denom > rs:
                    rs = ry / denom
    return r, rs


def discrete_jacobian_2nd(x: np.ndarray, y: np.ndarray, periodic_xi: bool = False) -> np.ndarray:
    """Second-order Jacobian determinant at every node (fold detection)."""

    def d1(f, axis, periodic):
        if periodic:
            # unique columns wrap; last column duplicates the first
            core = f[:, :-1]
            g = (np.roll(core, -1, axis=1) - np.roll(core, 1, axis=1)) / 2.0
            return np.concatenate([g, g[:, :1]], axis=1)
        g = np.empty_like(f)
        sl = [slice(None)] * f.ndim

        def ax(i):
            s = sl.copy()
            s[axis] = i
            return tuple(s)

        g[ax(slice(1, -1))] = (f[ax(slice(2, None))] - f[ax(slice(0, -2))]) / 2.0
        g[ax(0)] = (-3.0 * f[ax(0)] + 4.0 * f[ax(1)] - f[ax(2)]) / 2.0
        g[ax(-1)] = (3.0 * f[ax(-1)] - 4.0 * f[ax(-2)] + f[ax(-3)]) / 2.0
        return g

    x_xi = d1(x, 1, periodic_xi)
    y_xi = d1(y, 1, periodic_xi)
    x_eta = d1(x.T, 1, False).T
    y_eta = d1(y.T, 1, False).T
    return x_xi * y_eta - x_eta * y_xi


def _check_unfolded(mesh: CurvilinearMesh, where: str) -> None:
    jac = discrete_jacobian_2nd(mesh.x, mesh.y, mesh.periodic_xi)
    if not np.all(np.isfinite(jac)):
        raise MeshFoldError(f"non-finite Jacobian entries detected {where}")
    if jac.min() < 0.0 < jac.max() or np.any(jac == 0.0):
        raise MeshFoldError(f"folded mesh: Jacobian determinant changes sign {where}")


def generate_mapping(
    bc: BoundaryCurves,
    ref: ReferenceGrid,
    tol: float = 1e-8,
    max_iter: int = 20000,
    sor: float = 1.0,
) -> CurvilinearMesh:
    """Relax the elliptic mapping equations until the max nodal residual <= tol.

    Raises MeshGenerationError (carrying the final residual) when max_iter
    sweeps do not suffice and MeshFoldError when the accepted mesh folds.
    """
    if tol <= 0:
        raise GridError("tol must be positive")
    if not 0 < sor < 2:
        raise GridError("SOR factor must lie in (0, 2)")
    mesh = transfinite_init(bc, ref)
    x, y = mesh.x, mesh.y
    periodic = mesh.periodic_xi
    residual = max(_max_residual(x, y, periodic))
    it = 0
    while residual > tol:
        if it >= max_iter:
            raise MeshGenerationError(
                f"elliptic mapping did not converge in {max_iter} sweeps "
                f"(residual {residual:.3e} > tol {tol:.3e})",
                residual=residual,
            )
        a, b, c = _coefficients(x, y, periodic)
        _sweep(x, y, a, b, c, sor, periodic)
        residual = max(_max_residual(x, y, periodic))
        if not np.isfinite(residual):
            raise MeshFoldError("elliptic relaxation diverged (non-finite residual)")
        it += 1
    _check_unfolded(mesh, "in the converged mapping")
    return mesh


def compute_metrics(mesh: CurvilinearMesh, jac_floor_rel: float = 1e-12) -> TransformMetrics:
    """Mapping derivatives via the package derivative operators, plus J.

    The Jacobian determinant must stay away from zero: any node with
    |J| below ``jac_floor_rel * median(|J|)`` is a hard error.
    """
    ref, periodic = mesh.ref, mesh.periodic_xi
    dx_dxi = stencil.d_dxi(mesh.x, ref, periodic)
    dx_deta = stencil.d_deta(mesh.x, ref, periodic)
    dy_dxi = stencil.d_dxi(mesh.y, ref, periodic)
    dy_deta = stencil.d_deta(mesh.y, ref, periodic)
    jac = dx_dxi * dy_deta - dx_deta * dy_dxi
    floor = jac_floor_rel * np.median(np.abs(jac))
    bad = np.abs(jac) < floor
    if bad.any():
        j, i = np.argwhere(bad)[0]
        raise MeshFoldError(
            f"Jacobian determinant below floor {floor:.3e} at node (eta={j}, xi={i})"
        )
    if jac.min() < 0.0 < jac.max():
        raise MeshFoldError("Jacobian determinant changes sign across the mesh")
    return TransformMetrics(
        dx_dxi=dx_dxi,
        dx_deta=dx_deta,
        dy_dxi=dy_dxi,
        dy_deta=dy_deta,
        jac=jac,
        ref=ref,
        periodic_xi=periodic,
    )


def verify_inverse_laplacian(mesh: CurvilinearMesh, metrics: TransformMetrics) -> tuple[float, float]:
    """RMS of the physical Laplacian of both reference coordinates.

    The reference coordinates (normalized to [0, 1] so the figure is
    comparable across resolutions) are harmonic functions of the physical
    coordinates for the exact elliptic map; small norms witness that the
    generated discrete map inherits this.  The norms are taken over
    strictly interior nodes.

    On periodic meshes the xi coordinate is angle-like and jumps across
    the cut, so this diagnostic treats the cut as a boundary (one-sided
    stencils) instead of wrapping around it.
    """
    ref = mesh.ref
    xi = np.broadcast_to(np.linspace(0.0, 1.0, ref.n_xi), ref.shape).copy()
    eta = np.broadcast_to(np.linspace(0.0, 1.0, ref.n_eta)[:, None], ref.shape).copy()
    m = metrics
    if mesh.periodic_xi:
        m = TransformMetrics(
            dx_dxi=metrics.dx_dxi,
            dx_deta=metrics.dx_deta,
            dy_dxi=metrics.dy_dxi,
            dy_deta=metrics.dy_deta,
            jac=metrics.jac,
            ref=ref,
            periodic_xi=False,
        )
    interior = node_mask(ref.n_eta, ref.n_xi, periodic_xi=False) == MASK_INTERIOR
    lap_xi = stencil.laplacian(xi, m)[interior]
    lap_eta = stencil.laplacian(eta, m)[interior]
    return (
        float(np.sqrt(np.mean(lap_xi**2))),
        float(np.sqrt(np.mean(lap_eta**2))),
    )
