"""Stochastic Galerkin block operators built from deterministic mode matrices.

A stochastic block operator has chaos blocks (j, k) equal to
sum_i C_ijk * A_i with the triple-product tensor C and deterministic mode
matrices A_i.  Stochastic vectors are plain ndarrays in chaos-block-major
layout: block k occupies entries [k*n, (k+1)*n) where n is the
deterministic dimension.

Two representations are provided: the explicit sparse form (needed for the
interior factorizations) and a matrix-free apply that only stores the mode
matrices.  The apply evaluates y_k = sum_i A_i (sum_j C_ijk x_j) with a
fixed ascending-i accumulation, so results are bit-identical across runs
and task schedules.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix, kron

from .fem import ModeMatrices
from .pce import TripleProductTensor


@dataclass
class StochasticBlockMatrix:
    """Matrix-free sum_i C_ijk A_i over chaos blocks; rectangular A_i allowed."""

    modes: list[csr_matrix]
    tensor: TripleProductTensor
    _slices: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if len(self.modes) != self.tensor.p_in:
            raise ValueError(
                f"{len(self.modes)} mode matrices for a tensor with p_in={self.tensor.p_in}"
            )
        if not self._slices:
            self._slices = self.tensor.input_slices()
        self._dense_slices = [None if c is None else c.toarray() for c in self._slices]

    @property
    def p_out(self) -> int:
        return self.tensor.p_out

    @property
    def block_shape(self) -> tuple[int, int]:
        return self.modes[0].shape

    @property
    def shape(self) -> tuple[int, int]:
        r, c = self.block_shape
        return (self.p_out * r, self.p_out * c)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """y = A x for a chaos-block-major vector or a stack of columns."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        nrow, ncol = self.block_shape
        cols = 1 if single else x.shape[1]
        xb = x.reshape(self.p_out, ncol, cols)
        y = np.zeros((self.p_out, nrow, cols))
        for i, ci in enumerate(self._dense_slices):
            if ci is None:
                continue
            # m[k] = sum_j C_ijk x_j, then one sparse product with A_i
            m = np.tensordot(ci, xb, axes=(0, 0))
            prod = self.modes[i] @ m.transpose(1, 0, 2).reshape(ncol, self.p_out * cols)
            y += prod.reshape(nrow, self.p_out, cols).transpose(1, 0, 2)
        out = y.reshape(self.p_out * nrow, cols)
        return out[:, 0] if single else out

    def __matmul__(self, x: np.ndarray) -> np.ndarray:
        return self.apply(x)

    def to_explicit(self) -> csr_matrix:
        """Explicit sparse (p_out * n) square/rectangular operator."""
        return assemble_blocks(self.modes, self.tensor)


def assemble_blocks(modes, tensor: TripleProductTensor) -> csr_matrix:
    """Explicit sparse assembly: scatter C_ijk * A_i into chaos block (j, k).

    Iterates input indices in ascending order; each deterministic matrix is
    only needed during its own pass.  Accepts a ModeMatrices or a plain list
    of sparse matrices.
    """
    mats = modes.matrices if isinstance(modes, ModeMatrices) else list(modes)
    if len(mats) != tensor.p_in:
        raise ValueError(f"{len(mats)} mode matrices for tensor with p_in={tensor.p_in}")
    out = None
    for ci, a_i in zip(tensor.input_slices(), mats):
        if ci is None:
            continue
        term = kron(ci, a_i, format="csr")
        out = term if out is None else out + term
    if out is None:
        r, c = mats[0].shape
        out = csr_matrix((tensor.p_out * r, tensor.p_out * c))
    return out


def split_interior_interface(
    modes: ModeMatrices, tensor: TripleProductTensor
) -> dict[str, StochasticBlockMatrix]:
    """Split each mode matrix by the interior/interface local numbering.

    Returns the four blocks {"II", "IG", "GI", "GG"}; the chaos structure is
    inherited unchanged since splitting commutes with the chaos sum.
    """
    ni = modes.num_interior * modes.ncomp
    nd = modes.ndof
    interior = np.arange(ni)
    gamma = np.arange(ni, nd)
    slices = tensor.input_slices()

    def take(rows, cols):
        mats = [csr_matrix(a[rows][:, cols]) for a in modes.matrices]
        return StochasticBlockMatrix(modes=mats, tensor=tensor, _slices=slices)

    return {
        "II": take(interior, interior),
        "IG": take(interior, gamma),
        "GI": take(gamma, interior),
        "GG": take(gamma, gamma),
    }


def dump_block_sparsity_csv(tensor: TripleProductTensor, path) -> None:
    """Chaos block occupancy (j, k) -> number of contributing input indices, as CSV."""
    occupancy = np.zeros((tensor.p_out, tensor.p_out), dtype=int)
    np.add.at(occupancy, (tensor.j, tensor.k), 1)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["j", "k", "terms"])
        for j in range(tensor.p_out):
            for k in range(tensor.p_out):
                if occupancy[j, k]:
                    writer.writerow([j, k, int(occupancy[j, k])])
