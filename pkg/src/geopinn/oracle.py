"""Independent classical finite-difference solver for heat/Poisson problems.

This is the verification benchmark for the learned solutions, so it is
built on deliberately different machinery from the training-side operator
stack: the Laplacian is discretized in conservative (flux) form on the
reference lattice,

    lap(T) = (1/J) * [ d/dxi( (a T_xi - b T_eta) / J )
                     + d/deta( (c T_eta - b T_xi) / J ) ]

with the face metrics a = x_eta^2 + y_eta^2, c = x_xi^2 + y_xi^2,
b = x_xi x_eta + y_xi y_eta assembled from plain second-order differences
of the node coordinates at cell faces (chain-rule metric identities, not
the package stencil operators).  The resulting 9-point system is relaxed
by pointwise Gauss-Seidel with over-relaxation until the max nodal
residual of the discrete operator drops below the requested tolerance.

Dirichlet and periodic (left/right cut) conditions are supported; they
cover every configuration the oracle is used to verify.  There is no
Navier-Stokes oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .bcpad import BCSpec
from .grid import CurvilinearMesh, GridError, TransformMetrics

SCHEME_TAG = "conservative-fd2"


class OracleError(GridError):
    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


@dataclass
class OracleSolution:
    field: np.ndarray
    iterations: int
    residual: float
    scheme: str = SCHEME_TAG


def _face_metrics(x: np.ndarray, y: np.ndarray, periodic: bool):
    """(a/J, b/J) at xi-faces and (c/J, b/J) at eta-faces.

    For a periodic mesh the arrays cover the n_xi - 1 owner columns with
    wrap-around faces; otherwise faces sit between adjacent columns/rows.
    """
    if periodic:
        xo, yo = x[:, :-1], y[:, :-1]
        xe, ye = np.roll(xo, -1, axis=1), np.roll(yo, -1, axis=1)
        x_xi_f = xe - xo
        y_xi_f = ye - yo
        d_eta = np.empty_like(xo), np.empty_like(yo)
        for src, dst in ((xo, d_eta[0]), (yo, d_eta[1])):
            dst[1:-1] = (src[2:] - src[:-2]) / 2.0
            dst[0] = (-3.0 * src[0] + 4.0 * src[1] - src[2]) / 2.0
            dst[-1] = (3.0 * src[-1] - 4.0 * src[-2] + src[-3]) / 2.0
        x_eta_f = (d_eta[0] + np.roll(d_eta[0], -1, axis=1)) / 2.0
        y_eta_f = (d_eta[1] + np.roll(d_eta[1], -1, axis=1)) / 2.0
    else:
        x_xi_f = x[:, 1:] - x[:, :-1]
        y_xi_f = y[:, 1:] - y[:, :-1]
        d_eta_x = np.empty_like(x)
        d_eta_y = np.empty_like(y)
        for src, dst in ((x, d_eta_x), (y, d_eta_y)):
            dst[1:-1] = (src[2:] - src[:-2]) / 2.0
            dst[0] = (-3.0 * src[0] + 4.0 * src[1] - src[2]) / 2.0
            dst[-1] = (3.0 * src[-1] - 4.0 * src[-2] + src[-3]) / 2.0
        x_eta_f = (d_eta_x[:, 1:] + d_eta_x[:, :-1]) / 2.0
        y_eta_f = (d_eta_y[:, 1:] + d_eta_y[:, :-1]) / 2.0
    j_xi = x_xi_f * y_eta_f - x_eta_f * y_xi_f
    a_over_j = (x_eta_f**2 + y_eta_f**2) / j_xi
    b_over_j_xi = (x_xi_f * x_eta_f + y_xi_f * y_eta_f) / j_xi

    # eta faces: exact differences across the face, averaged xi-derivatives
    x_eta_g = x[1:] - x[:-1]
    y_eta_g = y[1:] - y[:-1]
    if periodic:
        xo = x[:, :-1]
        yo = y[:, :-1]
        d_xi_x = (np.roll(xo, -1, axis=1) - np.roll(xo, 1, axis=1)) / 2.0
        d_xi_y = (np.roll(yo, -1, axis=1) - np.roll(yo, 1, axis=1)) / 2.0
        x_eta_g = x_eta_g[:, :-1]
        y_eta_g = y_eta_g[:, :-1]
    else:
        d_xi_x = np.empty_like(x)
        d_xi_y = np.empty_like(y)
        for src, dst in ((x, d_xi_x), (y, d_xi_y)):
            dst[:, 1:-1] = (src[:, 2:] - src[:, :-2]) / 2.0
            dst[:, 0] = (-3.0 * src[:, 0] + 4.0 * src[:, 1] - src[:, 2]) / 2.0
            dst[:, -1] = (3.0 * src[:, -1] - 4.0 * src[:, -2] + src[:, -3]) / 2.0
    x_xi_g = (d_xi_x[1:] + d_xi_x[:-1]) / 2.0
    y_xi_g = (d_xi_y[1:] + d_xi_y[:-1]) / 2.0
    j_eta = x_xi_g * y_eta_g - x_eta_g * y_xi_g
    c_over_j = (x_xi_g**2 + y_xi_g**2) / j_eta
    b_over_j_eta = (x_xi_g * x_eta_g + y_xi_g * y_eta_g) / j_eta
    return a_over_j, b_over_j_xi, c_over_j, b_over_j_eta


def _node_jacobian(x: np.ndarray, y: np.ndarray, periodic: bool) -> np.ndarray:
    def d1(f, axis):
        g = np.empty_like(f)
        f = np.moveaxis(f, axis, 0)
        gm = np.moveaxis(g, axis, 0)
        gm[1:-1] = (f[2:] - f[:-2]) / 2.0
        gm[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / 2.0
        gm[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / 2.0
        return g

    if periodic:
        xo, yo = x[:, :-1], y[:, :-1]
        x_xi = (np.roll(xo, -1, axis=1) - np.roll(xo, 1, axis=1)) / 2.0
        y_xi = (np.roll(yo, -1, axis=1) - np.roll(yo, 1, axis=1)) / 2.0
        x_eta = d1(xo, 0)
        y_eta = d1(yo, 0)
        j = x_xi * y_eta - x_eta * y_xi
        return np.concatenate([j, j[:, :1]], axis=1)
    x_xi = d1(x, 1)
    y_xi = d1(y, 1)
    x_eta = d1(x, 0)
    y_eta = d1(y, 0)
    return x_xi * y_eta - x_eta * y_xi


def assemble_coefficients(mesh: CurvilinearMesh) -> tuple[np.ndarray, np.ndarray]:
    """9-point stencil coefficients and nodal J for the conservative scheme.

    Returns ``coef`` of shape (n_eta, n_xi, 3, 3) where coef[j, i, dj+1, di+1]
    multiplies T[j+dj, i+di] (periodic wrap in i where applicable), and the
    nodal Jacobian used to scale the flux divergence.
    """
    x, y = mesh.x, mesh.y
    periodic = mesh.periodic_xi
    n_eta, n_xi = x.shape
    p = n_xi - 1 if periodic else n_xi
    a_j, b_xi, c_j, b_eta = _face_metrics(x, y, periodic)
    coef = np.zeros((n_eta, n_xi, 3, 3))

    def face_e(j, i):  # xi-face between i and i+1 (wraps when periodic)
        return (a_j[j, i % a_j.shape[1]], b_xi[j, i % b_xi.shape[1]])

    def face_n(j, i):  # eta-face between j and j+1
        return (c_j[j, i % c_j.shape[1]], b_eta[j, i % b_eta.shape[1]])

    for j in range(1, n_eta - 1):
        cols = range(p) if periodic else range(1, n_xi - 1)
        for i in cols:
            c = coef[j, i]
            a_e, b_e = face_e(j, i)
            a_w, b_w = face_e(j, i - 1)
            c_n, b_n = face_n(j, i)
            c_s, b_s = face_n(j - 1, i)
            # east flux
            c[1, 2] += a_e
            c[1, 1] -= a_e
            c[2, 1] -= b_e / 4
            c[0, 1] += b_e / 4
            c[2, 2] -= b_e / 4
            c[0, 2] += b_e / 4
            # west flux (subtracted)
            c[1, 1] -= a_w
            c[1, 0] += a_w
            c[2, 0] += b_w / 4
            c[0, 0] -= b_w / 4
            c[2, 1] += b_w / 4
            c[0, 1] -= b_w / 4
            # north flux
            c[2, 1] += c_n
            c[1, 1] -= c_n
            c[1, 2] -= b_n / 4
            c[1, 0] += b_n / 4
            c[2, 2] -= b_n / 4
            c[2, 0] += b_n / 4
            # south flux (subtracted)
            c[1, 1] -= c_s
            c[0, 1] += c_s
            c[0, 2] += b_s / 4
            c[0, 0] -= b_s / 4
            c[1, 2] += b_s / 4
            c[1, 0] -= b_s / 4
    jac = _node_jacobian(x, y, periodic)
    return coef, jac


@njit(cache=True)
def _gs_sweep(t, coef, jac, f, omega, periodic):  # pragma: no cover - via wrapper
    n_eta, n_xi = t.shape
    p = n_xi - 1 if periodic else n_xi
    for j in range(1, n_eta - 1):
        i0 = 0 if periodic else 1
        i1 = p if periodic else n_xi - 1
        for i in range(i0, i1):
            acc = 0.0
            for dj in range(-1, 2):
                for di in range(-1, 2):
                    if dj == 0 and di == 0:
                        continue
                    ii = (i + di) % p if periodic else i + di
                    acc += coef[j, i, dj + 1, di + 1] * t[j + dj, ii]
            centre = coef[j, i, 1, 1]
            tgs = (-f[j, i] * jac[j, i] - acc) / centre
            t[j, i] += omega * (tgs - t[j, i])
    if periodic:
        for j in range(n_eta):
            t[j, n_xi - 1] = t[j, 0]


@njit(cache=True)
def _max_residual(t, coef, jac, f, periodic):  # pragma: no cover - via wrapper
    n_eta, n_xi = t.shape
    p = n_xi - 1 if periodic else n_xi
    worst = 0.0
    for j in range(1, n_eta - 1):
        i0 = 0 if periodic else 1
        i1 = p if periodic else n_xi - 1
        for i in range(i0, i1):
            acc = 0.0
            for dj in range(-1, 2):
                for di in range(-1, 2):
                    ii = (i + di) % p if periodic else i + di
                    acc += coef[j, i, dj + 1, di + 1] * t[j + dj, ii]
            r = abs(acc / jac[j, i] + f[j, i])
            if r > worst:
                worst = r
    return worst


def apply_laplacian(t: np.ndarray, mesh: CurvilinearMesh) -> np.ndarray:
    """The oracle's discrete Laplacian at interior nodes (zero elsewhere)."""
    coef, jac = assemble_coefficients(mesh)
    n_eta, n_xi = t.shape
    out = np.zeros_like(t)
    periodic = mesh.periodic_xi
    p = n_xi - 1 if periodic else n_xi
    for j in range(1, n_eta - 1):
        cols = range(p) if periodic else range(1, n_xi - 1)
        for i in cols:
            acc = 0.0
            for dj in range(-1, 2):
                for di in range(-1, 2):
                    ii = (i + di) % p if periodic else i + di
                    acc += coef[j, i, dj + 1, di + 1] * t[j + dj, ii]
            out[j, i] = acc / jac[j, i]
    if periodic:
        out[:, -1] = out[:, 0]
    return out


def _prepare(mesh: CurvilinearMesh, metrics: TransformMetrics | None, bc: BCSpec,
             f: np.ndarray):
    if metrics is not None:
        j = metrics.jac
        if j.min() < 0.0 < j.max():
            raise OracleError("folded mesh passed to oracle solver")
    for edge in ("bottom", "top"):
        if bc.conditions[edge].kind != "dirichlet":
            raise OracleError(
                "oracle supports Dirichlet (plus a periodic cut) conditions only"
            )
    periodic = bc.periodic
    if periodic != mesh.periodic_xi:
        raise OracleError("boundary-condition periodicity does not match mesh topology")
    if not periodic:
        for edge in ("left", "right"):
            if bc.conditions[edge].kind != "dirichlet":
                raise OracleError(
                    "oracle supports Dirichlet (plus a periodic cut) conditions only"
                )
    t = np.zeros(mesh.shape)
    scale_vals = [float(np.max(np.abs(f)))]
    from .bcpad import _edge_values  # shared value validation

    n_eta, n_xi = mesh.shape
    sizes = {"bottom": n_xi, "top": n_xi, "left": n_eta, "right": n_eta}
    dirichlet = {}
    for edge in ("bottom", "top", "left", "right"):
        cond = bc.conditions[edge]
        if cond.kind == "dirichlet":
            vals = _edge_values(cond.values, sizes[edge], edge)
            dirichlet[edge] = vals
            scale_vals.append(float(np.max(np.abs(vals))))
    start = float(np.mean(np.concatenate([dirichlet[e] for e in dirichlet])))
    t[...] = start
    # xi-edges first so the eta-edge value claims the corners (same corner
    # ownership rule as the boundary-enforcement module)
    for edge in ("left", "right", "bottom", "top"):
        if edge not in dirichlet:
            continue
        vals = dirichlet[edge]
        if edge == "bottom":
            t[0, :] = vals
        elif edge == "top":
            t[-1, :] = vals
        elif edge == "left":
            t[:, 0] = vals
        else:
            t[:, -1] = vals
    scale = max(max(scale_vals), 1e-300)
    return t, periodic, scale


def solve_poisson(mesh: CurvilinearMesh, metrics: TransformMetrics | None, bc: BCSpec,
                  f: np.ndarray, tol: float = 1e-8, max_iter: int = 200000,
                  sor: float | None = None) -> OracleSolution:
    """Solve lap(T) + f = 0 until max residual <= tol * (source/BC scale)."""
    f = np.asarray(f, dtype=np.float64)
    if f.shape != mesh.shape:
        raise OracleError(f"source shape {f.shape} does not match mesh {mesh.shape}")
    t, periodic, scale = _prepare(mesh, metrics, bc, f)
    coef, jac = assemble_coefficients(mesh)
    if sor is None:
        sor = 2.0 / (1.0 + np.pi / max(mesh.shape))
    target = tol * scale
    res = _max_residual(t, coef, jac, f, periodic)
    it = 0
    while res > target:
        if it >= max_iter:
            raise OracleError(
                f"oracle did not converge in {max_iter} sweeps "
                f"(residual {res:.3e} > {target:.3e})",
                residual=res,
            )
        _gs_sweep(t, coef, jac, f, sor, periodic)
        it += 1
        if it % 16 == 0 or it < 8:
            res = _max_residual(t, coef, jac, f, periodic)
            if not np.isfinite(res):
                raise OracleError("oracle relaxation diverged")
    res = _max_residual(t, coef, jac, f, periodic)
    return OracleSolution(field=t, iterations=it, residual=float(res))


def solve_heat(mesh: CurvilinearMesh, metrics: TransformMetrics | None, bc: BCSpec,
               tol: float = 1e-8, max_iter: int = 200000,
               sor: float | None = None) -> OracleSolution:
    """Solve lap(T) = 0 with the conservative curvilinear scheme."""
    return solve_poisson(mesh, metrics, bc, np.zeros(mesh.shape), tol, max_iter, sor)
