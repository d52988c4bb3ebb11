"""Gaussian random source fields via truncated Karhunen-Loeve expansion.

The source is a zero-mean Gaussian field with squared-exponential
covariance over the physical node coordinates,

    K(x, x') = sigma0^2 * exp(-||x - x'||^2 / (2 l^2)),

decomposed on the nodal covariance matrix (unweighted nodal inner
product).  A sampled field is f = sum_i sqrt(lambda_i) phi_i omega_i with
i.i.d. standard-normal omega.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .grid import CurvilinearMesh, GridError


@dataclass(frozen=True)
class GPConfig:
    sigma0: float = 100.0
    length_scale: float = 0.5
    truncation: int = 10

    def __post_init__(self):
        if self.sigma0 <= 0 or self.length_scale <= 0:
            raise GridError("sigma0 and length_scale must be positive")
        if self.truncation < 1:
            raise GridError("truncation must be at least 1")


@dataclass
class KLBasis:
    eigenvalues: np.ndarray  # (k,), descending, > 0
    modes: np.ndarray  # (k, n_eta, n_xi), orthonormal under nodal dot product
    energy_fraction: float

    @property
    def k(self) -> int:
        return self.eigenvalues.shape[0]


def build_kernel_matrix(mesh: CurvilinearMesh, cfg: GPConfig) -> np.ndarray:
    """Dense covariance matrix over all mesh nodes (row-major flattening)."""
    pts = np.stack([mesh.x.ravel(), mesh.y.ravel()], axis=1)
    d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=2)
    k = cfg.sigma0**2 * np.exp(-d2 / (2.0 * cfg.length_scale**2))
    return 0.5 * (k + k.T)


def numerical_rank(kernel: np.ndarray) -> int:
    """Eigenvalue count above the machine-noise floor of a symmetric matrix."""
    evals = scipy.linalg.eigvalsh(kernel)
    floor = max(evals[-1], 0.0) * kernel.shape[0] * np.finfo(np.float64).eps
    return int(np.sum(evals > floor))


def kl_decompose(kernel: np.ndarray, k: int, shape: tuple[int, int] | None = None) -> KLBasis:
    """Top-k eigenpairs of a symmetric kernel matrix, sorted descending."""
    n = kernel.shape[0]
    if kernel.shape != (n, n) or not np.allclose(kernel, kernel.T):
        raise GridError("kernel matrix must be square symmetric")
    if shape is None:
        side = int(round(np.sqrt(n)))
        if side * side != n:
            raise GridError("provide the grid shape for non-square node counts")
        shape = (side, side)
    evals, evecs = scipy.linalg.eigh(kernel)
    evals = evals[::-1]
    evecs = evecs[:, ::-1]
    floor = max(evals[0], 0.0) * n * np.finfo(np.float64).eps
    rank = int(np.sum(evals > floor))
    if k > rank:
        raise GridError(f"requested {k} modes but kernel rank is {rank}")
    total = float(np.sum(np.clip(evals, 0.0, None)))
    energy = float(np.sum(evals[:k])) / total
    modes = np.ascontiguousarray(evecs[:, :k].T.reshape(k, *shape))
    return KLBasis(eigenvalues=evals[:k].copy(), modes=modes, energy_fraction=energy)


def sample_source(basis: KLBasis, omega: np.ndarray | None = None,
                  seed: int | None = None) -> np.ndarray:
    """One source field from mode coefficients (drawn from ``seed`` if absent)."""
    if omega is None:
        if seed is None:
            raise GridError("provide either omega or a seed")
        omega = np.random.default_rng(seed).standard_normal(basis.k)
    omega = np.asarray(omega, dtype=np.float64)
    if omega.shape != (basis.k,):
        raise GridError(f"omega must have length {basis.k}, got shape {omega.shape}")
    return np.tensordot(np.sqrt(basis.eigenvalues) * omega, basis.modes, axes=(0, 0))


def sample_many(basis: KLBasis, count: int, seed: int) -> np.ndarray:
    """``count`` independent source fields with a single owned RNG stream."""
    rng = np.random.default_rng(seed)
    omegas = rng.standard_normal((count, basis.k))
    coeff = omegas * np.sqrt(basis.eigenvalues)[None, :]
    return np.tensordot(coeff, basis.modes, axes=(1, 0))
