"""PDE residual fields, the training loss, and the error metric.

Residuals are assembled from the metric-transformed derivative operators
and evaluated at the loss-eligible nodes (every non-boundary node,
one-sided zone included; on periodic grids the duplicated seam column is
excluded).  The loss is the per-node mean of squared residuals, summed
over equation channels with configurable weights and averaged over the
batch, so its magnitude does not depend on grid size.

The reported error metric is the square root of the ratio of L2 norms,

    error(pred, ref) = sqrt(||pred - ref|| / ||ref||),

implemented exactly in that form; the plain norm ratio is also returned
by :func:`relative_error_components` for cross-checking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import stencil
from .grid import GridError, TransformMetrics, loss_mask

EQUATION_CHANNELS = {
    "heat": ("laplace",),
    "ns": ("continuity", "xmom", "ymom"),
    "poisson": ("poisson",),
}


@dataclass
class FluidParams:
    nu: float
    inlet_velocity: tuple[float, float] = (0.0, 1.0)
    length_scale: float = 1.0

    def __post_init__(self):
        if self.nu <= 0:
            raise GridError("viscosity must be positive")

    @property
    def reynolds(self) -> float:
        speed = float(np.hypot(*self.inlet_velocity))
        return speed * self.length_scale / self.nu


def heat_residual(t: np.ndarray, m: TransformMetrics) -> np.ndarray:
    """Steady heat equation residual: Laplacian of the temperature field."""
    return stencil.laplacian(t, m)[None]


def heat_residual_backward(grad: np.ndarray, m: TransformMetrics) -> np.ndarray:
    return stencil.adjoint_laplacian(grad[0], m)


def poisson_residual(t: np.ndarray, f: np.ndarray, m: TransformMetrics) -> np.ndarray:
    """Poisson residual: Laplacian of t plus the source field."""
    return (stencil.laplacian(t, m) + f)[None]


def poisson_residual_backward(grad: np.ndarray, m: TransformMetrics) -> np.ndarray:
    return stencil.adjoint_laplacian(grad[0], m)


def ns_residual(u: np.ndarray, v: np.ndarray, p: np.ndarray,
                params: FluidParams, m: TransformMetrics) -> np.ndarray:
    """Steady incompressible Navier-Stokes residuals (central convection).

    Channels: continuity, x-momentum, y-momentum.
    """
    du_dx = stencil.d_dx(u, m)
    du_dy = stencil.d_dy(u, m)
    dv_dx = stencil.d_dx(v, m)
    dv_dy = stencil.d_dy(v, m)
    cont = du_dx + dv_dy
    xmom = u * du_dx + v * du_dy - params.nu * stencil.laplacian(u, m) + stencil.d_dx(p, m)
    ymom = u * dv_dx + v * dv_dy - params.nu * stencil.laplacian(v, m) + stencil.d_dy(p, m)
    return np.stack([cont, xmom, ymom])


def ns_residual_backward(grad: np.ndarray, u: np.ndarray, v: np.ndarray,
                         params: FluidParams, m: TransformMetrics):
    """Gradients of the three NS residual channels w.r.t. (u, v, p)."""
    g_cont, g_x, g_y = grad
    du_dx = stencil.d_dx(u, m)
    du_dy = stencil.d_dy(u, m)
    dv_dx = stencil.d_dx(v, m)
    dv_dy = stencil.d_dy(v, m)

    gu = stencil.adjoint_d_dx(g_cont, m)
    gv = stencil.adjoint_d_dy(g_cont, m)

    # x-momentum: u du/dx + v du/dy - nu lap(u) + dp/dx
    gu += g_x * du_dx + stencil.adjoint_d_dx(g_x * u, m)
    gu += stencil.adjoint_d_dy(g_x * v, m)
    gv += g_x * du_dy
    gu -= params.nu * stencil.adjoint_laplacian(g_x, m)
    gp = stencil.adjoint_d_dx(g_x, m)

    # y-momentum: u dv/dx + v dv/dy - nu lap(v) + dp/dy
    gu += g_y * dv_dx
    gv += g_y * dv_dy + stencil.adjoint_d_dy(g_y * v, m)
    gv += stencil.adjoint_d_dx(g_y * u, m)
    gv -= params.nu * stencil.adjoint_laplacian(g_y, m)
    gp += stencil.adjoint_d_dy(g_y, m)
    return gu, gv, gp


def residual_mean_squares(res: np.ndarray, eligible: np.ndarray) -> np.ndarray:
    """Per-channel mean of squared residuals over eligible nodes."""
    if not np.all(np.isfinite(res)):
        raise GridError("non-finite residual entries")
    return np.array([float(np.mean(r[eligible] ** 2)) for r in res])


def physics_loss(batch_residuals: list[np.ndarray], eligible: np.ndarray,
                 weights=None) -> float:
    """Weighted mean-square residual, averaged over batch members."""
    if len(batch_residuals) == 0:
        raise GridError("empty batch")
    n_ch = batch_residuals[0].shape[0]
    w = np.ones(n_ch) if weights is None else np.asarray(weights, dtype=np.float64)
    total = 0.0
    for res in batch_residuals:
        total += float(np.dot(w, residual_mean_squares(res, eligible)))
    return total / len(batch_residuals)


def physics_loss_grad(res: np.ndarray, eligible: np.ndarray, batch_size: int,
                      weights=None) -> np.ndarray:
    """d(loss)/d(residual) for one batch member's residual channels."""
    n_ch = res.shape[0]
    w = np.ones(n_ch) if weights is None else np.asarray(weights, dtype=np.float64)
    n_elig = int(eligible.sum())
    grad = np.zeros_like(res)
    for c in range(n_ch):
        grad[c][eligible] = 2.0 * w[c] * res[c][eligible] / (n_elig * batch_size)
    return grad


def eligible_mask(m: TransformMetrics) -> np.ndarray:
    return loss_mask(m.ref.n_eta, m.ref.n_xi, m.periodic_xi)


def relative_error_components(pred: np.ndarray, ref: np.ndarray) -> tuple[float, float]:
    """(sqrt of the L2-norm ratio, plain L2-norm ratio)."""
    if pred.shape != ref.shape:
        raise GridError(f"shape mismatch: {pred.shape} vs {ref.shape}")
    ref_norm = float(np.linalg.norm(ref))
    if ref_norm == 0.0:
        raise GridError("reference field has zero norm")
    ratio = float(np.linalg.norm(pred - ref)) / ref_norm
    return float(np.sqrt(ratio)), ratio


def relative_error(pred: np.ndarray, ref: np.ndarray) -> float:
    """Square root of ||pred - ref|| / ||ref||."""
    return relative_error_components(pred, ref)[0]
