"""Hermite polynomial chaos: multi-index bases, triple products, lognormal fields.

The chaos basis is built from unnormalized probabilists' Hermite polynomials
He_n, so the squared norm of a multivariate basis function with exponents
alpha is ``prod(alpha_m!)``.  Multi-indices are ordered graded-lexicographic:
index 0 is the constant term, the first-order terms follow with the first
random variable leading.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

MultiIndex = tuple[int, ...]


def _compositions(total: int, parts: int) -> Iterator[MultiIndex]:
    """Yield exponent tuples summing to `total`, first entry descending."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class PCBasis:
    """Multivariate Hermite chaos basis of total degree <= `order` in `num_rvs` variables."""

    num_rvs: int
    order: int
    indices: tuple[MultiIndex, ...]

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def norms(self) -> np.ndarray:
        """Squared norms <psi_k^2> = prod(alpha_m!) per basis index."""
        return np.array(
            [math.prod(math.factorial(a) for a in alpha) for alpha in self.indices],
            dtype=float,
        )

    def evaluate(self, xi: np.ndarray) -> np.ndarray:
        """Evaluate all basis functions at sample points.

        Parameters
        ----------
        xi : ndarray, shape (num_rvs,) or (nsamples, num_rvs)

        Returns
        -------
        ndarray, shape (len(self),) or (nsamples, len(self))
        """
        xi = np.asarray(xi, dtype=float)
        single = xi.ndim == 1
        pts = xi[None, :] if single else xi
        if pts.shape[1] != self.num_rvs:
            raise ValueError(f"expected {self.num_rvs} random variables, got {pts.shape[1]}")
        # cache 1D evaluations up to the max degree per dimension
        he = np.ones((self.order + 1,) + pts.shape)
        if self.order >= 1:
            he[1] = pts
        for n in range(1, self.order):
            he[n + 1] = pts * he[n] - n * he[n - 1]
        out = np.ones((pts.shape[0], len(self)))
        for k, alpha in enumerate(self.indices):
            for m, a in enumerate(alpha):
                if a:
                    out[:, k] *= he[a, :, m]
        return out[0] if single else out


def enumerate_basis(num_rvs: int, order: int) -> PCBasis:
    """All multi-indices of total degree <= order, graded lexicographic.

    The count equals binomial(num_rvs + order, order); degenerate inputs
    (num_rvs == 0 or order == 0) yield the single constant function.
    """
    if num_rvs < 0 or order < 0:
        raise ValueError("num_rvs and order must be non-negative")
    indices: list[MultiIndex] = []
    for degree in range(order + 1):
        indices.extend(_compositions(degree, num_rvs))
        if num_rvs == 0:
            break
    return PCBasis(num_rvs=num_rvs, order=order, indices=tuple(indices))


def hermite_eval(n: int, x: float) -> float:
    """Probabilists' Hermite He_n(x) by the three-term recurrence."""
    if n < 0:
        raise ValueError("degree must be non-negative")
    prev, cur = 1.0, x
    if n == 0:
        return prev
    for k in range(1, n):
        prev, cur = cur, x * cur - k * prev
    return cur


def hermite_moment_1d(a: int, b: int, c: int) -> float:
    """Gaussian expectation E[He_a He_b He_c].

    Nonzero only when s = (a+b+c)/2 is an integer with s >= max(a, b, c),
    in which case the value is a! b! c! / ((s-a)! (s-b)! (s-c)!).
    """
    total = a + b + c
    if total % 2:
        return 0.0
    s = total // 2
    if s < a or s < b or s < c:
        return 0.0
    num = math.factorial(a) * math.factorial(b) * math.factorial(c)
    den = math.factorial(s - a) * math.factorial(s - b) * math.factorial(s - c)
    return float(num // den)


@dataclass(frozen=True)
class TripleProductTensor:
    """Sparse tensor C_ijk = <psi_i psi_j psi_k>, i over the input basis, (j,k) over the output.

    Entries are stored as flat coordinate arrays sorted by (j, k, i) so that
    per-block iteration over (j, k) is contiguous.  `norms` holds <psi_k^2>
    for the output basis.
    """

    i: np.ndarray
    j: np.ndarray
    k: np.ndarray
    values: np.ndarray
    norms: np.ndarray
    p_in: int
    p_out: int

    def __len__(self) -> int:
        return len(self.values)

    def value(self, i: int, j: int, k: int) -> float:
        """Look up C_ijk (0.0 if not stored)."""
        lo = np.searchsorted(self._keys, self._key(i, j, k))
        if lo < len(self.values) and self._keys[lo] == self._key(i, j, k):
            return float(self.values[lo])
        return 0.0

    def _key(self, i, j, k) -> int:
        return (j * self.p_out + k) * self.p_in + i

    @property
    def _keys(self) -> np.ndarray:
        return (self.j.astype(np.int64) * self.p_out + self.k) * self.p_in + self.i

    def input_slices(self) -> list["np.ndarray | None"]:
        """Per input index i, the (p_out x p_out) sparse slice C_i with (C_i)_{jk} = C_ijk.

        Returns a list of scipy CSR matrices (None where slice i is all zero).
        """
        from scipy.sparse import coo_matrix

        slices: list = [None] * self.p_in
        for i in range(self.p_in):
            mask = self.i == i
            if not mask.any():
                continue
            slices[i] = coo_matrix(
                (self.values[mask], (self.j[mask], self.k[mask])),
                shape=(self.p_out, self.p_out),
            ).tocsr()
        return slices


def triple_products(input_basis: PCBasis, output_basis: PCBasis) -> TripleProductTensor:
    """Nonzero entries of <psi_i psi_j psi_k> as a product of 1D Hermite moments."""
    if input_basis.num_rvs != output_basis.num_rvs:
        raise ValueError(
            f"basis dimension mismatch: {input_basis.num_rvs} vs {output_basis.num_rvs}"
        )
    dims = input_basis.num_rvs
    max_deg = max(input_basis.order, output_basis.order)
    moment = np.zeros((max_deg + 1,) * 3)
    for a in range(max_deg + 1):
        for b in range(max_deg + 1):
            for c in range(max_deg + 1):
                moment[a, b, c] = hermite_moment_1d(a, b, c)

    ii, jj, kk, vals = [], [], [], []
    out_idx = output_basis.indices
    for j, alpha_j in enumerate(out_idx):
        for k, alpha_k in enumerate(out_idx):
            for i, alpha_i in enumerate(input_basis.indices):
                v = 1.0
                for m in range(dims):
                    v *= moment[alpha_i[m], alpha_j[m], alpha_k[m]]
                    if v == 0.0:
                        break
                if v != 0.0:
                    ii.append(i)
                    jj.append(j)
                    kk.append(k)
                    vals.append(v)
    return TripleProductTensor(
        i=np.array(ii, dtype=np.int64),
        j=np.array(jj, dtype=np.int64),
        k=np.array(kk, dtype=np.int64),
        values=np.array(vals, dtype=float),
        norms=output_basis.norms,
        p_in=len(input_basis),
        p_out=len(output_basis),
    )


def dump_tensor_csv(tensor: TripleProductTensor, path) -> None:
    """Write the nonzero tensor entries as CSV rows (i, j, k, value)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "k", "value"])
        for i, j, k, v in zip(tensor.i, tensor.j, tensor.k, tensor.values):
            writer.writerow([int(i), int(j), int(k), repr(float(v))])


@dataclass(frozen=True)
class LognormalPCE:
    """Chaos coefficients of exp(g0 + sum_i g_i xi_i) per mesh node.

    `coeffs` has shape (len(basis), nnodes); row 0 is the lognormal mean
    field exp(g0 + 0.5 sum_i g_i^2).
    """

    basis: PCBasis
    coeffs: np.ndarray

    @property
    def mean_field(self) -> np.ndarray:
        return self.coeffs[0]

    def sample(self, xi: np.ndarray) -> np.ndarray:
        """Field realization sum_alpha c_alpha(x) psi_alpha(xi) per node."""
        return self.basis.evaluate(xi) @ self.coeffs


def project_lognormal(g0: np.ndarray, modes: np.ndarray, input_basis: PCBasis) -> LognormalPCE:
    """Exact chaos projection of a lognormal field.

    The Gaussian exponent is g(x, theta) = g0(x) + sum_i g_i(x) xi_i with
    i.i.d. standard normal xi and mode fields `modes` (shape (L, nnodes))
    already carrying the sqrt(eigenvalue) scaling.  The coefficient for
    exponents alpha is exp(g0 + 0.5 sum g_i^2) * prod_i g_i^alpha_i / alpha_i!.
    """
    g0 = np.asarray(g0, dtype=float)
    modes = np.atleast_2d(np.asarray(modes, dtype=float))
    if modes.shape[0] != input_basis.num_rvs:
        raise ValueError(
            f"expected {input_basis.num_rvs} mode fields, got {modes.shape[0]}"
        )
    mean_scale = np.exp(g0 + 0.5 * np.sum(modes**2, axis=0))
    coeffs = np.empty((len(input_basis), g0.shape[0]))
    for row, alpha in enumerate(input_basis.indices):
        factor = mean_scale.copy()
        for i, a in enumerate(alpha):
            if a:
                factor *= modes[i] ** a / math.factorial(a)
        coeffs[row] = factor
    return LognormalPCE(basis=input_basis, coeffs=coeffs)
