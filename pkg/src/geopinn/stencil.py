"""Reference-domain derivative operators and their physical-space composition.

First derivatives along a lattice axis use a 5-point 4th-order central
stencil away from boundaries and a 4-point 3rd-order one-sided stencil in
the two node layers next to each non-periodic boundary.  Physical
derivatives are obtained from the reference ones through the precomputed
mapping metrics:

    d/dx = (1/J) * (d/dxi * dy_deta - d/deta * dy_dxi)
    d/dy = (1/J) * (d/deta * dx_dxi - d/dxi * dx_deta)

Second derivatives are formed by applying the first-derivative operators
twice (no chain-rule expansion).

Every operator here is linear with coefficients fixed by the grid and
metrics, so its adjoint is the transposed stencil application; the
``adjoint_*`` functions below are exactly that and are what the training
backward pass uses.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import GridError, TransformMetrics

# One-sided 3rd-order coefficients at offsets 0, 1, 2, 3 into the domain
# (divide by 6h); exact for cubics.
_ONESIDED = np.array([-11.0, 18.0, -9.0, 2.0])
# Central 4th-order coefficients at offsets -2..2 (divide by 12h).
_CENTRAL = np.array([1.0, -8.0, 0.0, 8.0, -1.0])


@dataclass(frozen=True)
class Stencil1D:
    """Coefficient table of a single 1-D derivative formula."""

    offsets: tuple[int, ...]
    weights: tuple[float, ...]
    order: int
    axis: str  # "xi" or "eta"

    def dump(self) -> str:
        terms = ", ".join(f"{w:+.6g} @ {o:+d}" for o, w in zip(self.offsets, self.weights))
        return f"d/d{self.axis} order {self.order}: {terms}"


def stencil_table(h: float, axis: str) -> list[Stencil1D]:
    """The formulas used along one axis, for inspection and dumping."""
    return [
        Stencil1D((-2, -1, 0, 1, 2), tuple(_CENTRAL / (12 * h)), 4, axis),
        Stencil1D((0, 1, 2, 3), tuple(_ONESIDED / (6 * h)), 3, axis),
        Stencil1D((0, -1, -2, -3), tuple(-_ONESIDED / (6 * h)), 3, axis),
    ]


@lru_cache(maxsize=64)
def derivative_matrix(n: int, h: float, periodic: bool) -> np.ndarray:
    """Dense (n, n) first-derivative operator along one axis.

    The dense form keeps the adjoint mechanical (the transpose) and is
    cheap at the grid sizes this package targets (n <= a few hundred).

    For a periodic axis the stored lattice carries the seam twice: node
    n-1 duplicates node 0.  All rows use the wrap-around central stencil
    over the n-1 unique nodes and row n-1 mirrors row 0, so the duplicated
    column is never read.
    """
    if n < 5:
        raise GridError(f"axis needs at least 5 nodes for the stencil support, got {n}")
    d = np.zeros((n, n), dtype=np.float64)
    if periodic:
        p = n - 1
        for i in range(p):
            for off, w in zip(range(-2, 3), _CENTRAL):
                d[i, (i + off) % p] += w / (12 * h)
        d[n - 1] = d[0]
        return d
    for i in range(2, n - 2):
        for off, w in zip(range(-2, 3), _CENTRAL):
            d[i, i + off] += w / (12 * h)
    for i in (0, 1):
        for off, w in zip(range(4), _ONESIDED):
            d[i, i + off] += w / (6 * h)
    for i in (n - 2, n - 1):
        for off, w in zip(range(4), _ONESIDED):
            d[i, i - off] += -w / (6 * h)
    return d


def _d_along_xi(f: np.ndarray, n_xi: int, h: float, periodic: bool, transpose: bool) -> np.ndarray:
    d = derivative_matrix(n_xi, h, periodic)
    out = f @ (d if transpose else d.T)
    if periodic and not transpose:
        # rows 0 and n-1 of the operator are identical; pin the seam column
        # bitwise so shared-seam fields stay exactly mirrored
        out[..., -1] = out[..., 0]
    return out


def _d_along_eta(f: np.ndarray, n_eta: int, h: float, periodic: bool, transpose: bool) -> np.ndarray:
    d = derivative_matrix(n_eta, h, periodic)
    m = d.T if transpose else d
    return np.einsum("ij,...jk->...ik", m, f)


def d_dxi(f: np.ndarray, ref, periodic_xi: bool = False) -> np.ndarray:
    """Reference-domain xi-derivative; f has shape (..., n_eta, n_xi)."""
    return _d_along_xi(f, ref.n_xi, ref.d_xi, periodic_xi, transpose=False)


def d_deta(f: np.ndarray, ref, periodic_xi: bool = False) -> np.ndarray:
    """Reference-domain eta-derivative; f has shape (..., n_eta, n_xi)."""
    return _d_along_eta(f, ref.n_eta, ref.d_eta, False, transpose=False)


def adjoint_d_dxi(g: np.ndarray, ref, periodic_xi: bool = False) -> np.ndarray:
    return _d_along_xi(g, ref.n_xi, ref.d_xi, periodic_xi, transpose=True)


def adjoint_d_deta(g: np.ndarray, ref, periodic_xi: bool = False) -> np.ndarray:
    return _d_along_eta(g, ref.n_eta, ref.d_eta, False, transpose=True)


def d_dx(f: np.ndarray, m: TransformMetrics) -> np.ndarray:
    """Physical x-derivative of a reference-lattice field."""
    fx = d_dxi(f, m.ref, m.periodic_xi)
    fe = d_deta(f, m.ref, m.periodic_xi)
    return (fx * m.dy_deta - fe * m.dy_dxi) / m.jac


def d_dy(f: np.ndarray, m: TransformMetrics) -> np.ndarray:
    """Physical y-derivative of a reference-lattice field."""
    fx = d_dxi(f, m.ref, m.periodic_xi)
    fe = d_deta(f, m.ref, m.periodic_xi)
    return (fe * m.dx_dxi - fx * m.dx_deta) / m.jac


def adjoint_d_dx(g: np.ndarray, m: TransformMetrics) -> np.ndarray:
    return adjoint_d_dxi(g * m.dy_deta / m.jac, m.ref, m.periodic_xi) - adjoint_d_deta(
        g * m.dy_dxi / m.jac, m.ref, m.periodic_xi
    )


def adjoint_d_dy(g: np.ndarray, m: TransformMetrics) -> np.ndarray:
    return adjoint_d_deta(g * m.dx_dxi / m.jac, m.ref, m.periodic_xi) - adjoint_d_dxi(
        g * m.dx_deta / m.jac, m.ref, m.periodic_xi
    )


def laplacian(f: np.ndarray, m: TransformMetrics) -> np.ndarray:
    """Physical Laplacian via repeated first-derivative application."""
    return d_dx(d_dx(f, m), m) + d_dy(d_dy(f, m), m)


def adjoint_laplacian(g: np.ndarray, m: TransformMetrics) -> np.ndarray:
    return adjoint_d_dx(adjoint_d_dx(g, m), m) + adjoint_d_dy(adjoint_d_dy(g, m), m)
