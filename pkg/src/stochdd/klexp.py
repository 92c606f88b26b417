"""Karhunen-Loeve expansion of the separable exponential covariance kernel.

The discrete eigenproblem is solved Nystrom-style with lumped nodal
quadrature weights: with W = diag(weights) the symmetric problem
W^(1/2) C W^(1/2) v = lambda v is solved densely and the physical modes are
phi = v / sqrt(w), which are W-orthonormal.  Returned mode fields already
carry the sqrt(lambda) scaling, so the Gaussian field is
g(x, theta) = sum_i mode_i(x) xi_i with i.i.d. standard normal xi.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh


@dataclass(frozen=True)
class CovarianceKernel:
    """Exponential covariance sigma^2 exp(-|dx|/bx - |dy|/by - |dz|/bz)."""

    sigma: float
    bx: float
    by: float | None = None
    bz: float | None = None

    def __post_init__(self):
        if self.by is None:
            object.__setattr__(self, "by", self.bx)
        if self.bz is None:
            object.__setattr__(self, "bz", self.bx)
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if min(self.bx, self.by, self.bz) <= 0:
            raise ValueError("correlation lengths must be positive")


@dataclass(frozen=True)
class KLExpansion:
    """Truncated KL expansion: descending eigenvalues and sqrt(lambda)-scaled mode fields."""

    eigenvalues: np.ndarray
    modes: np.ndarray  # (L, nnodes), row i = sqrt(lambda_i) * phi_i
    total_variance: float

    @property
    def num_modes(self) -> int:
        return len(self.eigenvalues)


def assemble_covariance(nodes: np.ndarray, kernel: CovarianceKernel) -> np.ndarray:
    """Dense covariance matrix over the node coordinates (desk scale only)."""
    nodes = np.asarray(nodes, dtype=float)
    dx = np.abs(nodes[:, None, 0] - nodes[None, :, 0]) / kernel.bx
    dy = np.abs(nodes[:, None, 1] - nodes[None, :, 1]) / kernel.by
    dz = np.abs(nodes[:, None, 2] - nodes[None, :, 2]) / kernel.bz
    return kernel.sigma**2 * np.exp(-(dx + dy + dz))


def solve_kle(C: np.ndarray, weights: np.ndarray, num_modes: int) -> KLExpansion:
    """Top `num_modes` eigenpairs of the weighted covariance operator.

    `weights` are positive lumped-mass nodal volumes; the total variance is
    sigma^2 times the domain volume, i.e. trace(W^(1/2) C W^(1/2)).
    """
    C = np.asarray(C, dtype=float)
    weights = np.asarray(weights, dtype=float)
    n = C.shape[0]
    if num_modes > n:
        raise ValueError(f"requested {num_modes} modes from a {n}-node kernel")
    if np.any(weights <= 0):
        raise ValueError("quadrature weights must be positive")
    sw = np.sqrt(weights)
    B = sw[:, None] * C * sw[None, :]
    B = 0.5 * (B + B.T)
    total_variance = float(np.trace(B))
    vals, vecs = eigh(B, subset_by_index=[n - num_modes, n - 1])
    vals = vals[::-1]
    vecs = vecs[:, ::-1]
    if vals[0] <= 0:
        raise ValueError("leading KL eigenvalue is non-positive")
    # deterministic sign: largest-magnitude component of each mode is positive
    flip = np.sign(vecs[np.argmax(np.abs(vecs), axis=0), np.arange(num_modes)])
    vecs = vecs * flip[None, :]
    vals = np.clip(vals, 0.0, None)
    modes = (np.sqrt(vals)[None, :] * vecs / sw[:, None]).T
    return KLExpansion(eigenvalues=vals, modes=modes, total_variance=total_variance)


def relative_energy(kle: KLExpansion) -> np.ndarray:
    """Cumulative eigenvalue sums normalized by the total variance."""
    return np.cumsum(kle.eigenvalues) / kle.total_variance


def dump_energy_csv(kle: KLExpansion, path) -> None:
    """Eigenvalues and the partial-energy curve as CSV."""
    energy = relative_energy(kle)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "eigenvalue", "relative_partial_sum"])
        for i, (lam, e) in enumerate(zip(kle.eigenvalues, energy), start=1):
            writer.writerow([i, repr(float(lam)), repr(float(e))])
