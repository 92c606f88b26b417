"""Brute-force references: dense global solves, dense Schur, Monte Carlo moments.

These paths never use the domain decomposition machinery; they assemble the
global Galerkin system in one piece (or sample the coefficient field
exactly) and therefore serve as independent checks of the solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.sparse.linalg import splu

from . import ssfem
from ._parallel import parallel_map
from .fem import ElementKernels, Problem, node_map_for
from .klexp import KLExpansion
from .mesh import BoxMesh, InterfaceClassification, Partition
from .pce import TripleProductTensor

DENSE_DIM_CAP = 30000


def free_node_ids(mesh: BoxMesh) -> np.ndarray:
    mask = np.ones(mesh.num_nodes, dtype=bool)
    mask[mesh.dirichlet_nodes] = False
    return np.flatnonzero(mask)


@dataclass
class DenseReference:
    """Global stochastic system assembled without decomposition, plus its direct solution."""

    matrix: object  # explicit sparse operator over free slots
    load: np.ndarray
    solution: np.ndarray
    free_nodes: np.ndarray
    p_out: int
    ncomp: int

    def nodal_solution(self, num_nodes: int) -> np.ndarray:
        """Solution scattered to (p_out, num_nodes, ncomp); Dirichlet nodes are zero."""
        out = np.zeros((self.p_out, num_nodes, self.ncomp))
        blocks = self.solution.reshape(self.p_out, len(self.free_nodes), self.ncomp)
        out[:, self.free_nodes, :] = blocks
        return out


def _global_modes(mesh: BoxMesh, problem: Problem):
    kernels = ElementKernels(mesh, problem)
    free = free_node_ids(mesh)
    node_map = node_map_for(mesh.num_nodes, free)
    ndof = len(free) * problem.ncomp
    coeffs = problem.pce.coeffs
    all_elements = np.arange(mesh.num_tets)
    mats, load = [], None
    for i in range(coeffs.shape[0]):
        ce = kernels.element_coefficients(coeffs[i], all_elements)
        if i == 0:
            mat, load = kernels.assemble(all_elements, ce, node_map, ndof, with_load=True)
        else:
            mat = kernels.assemble(all_elements, ce, node_map, ndof)
        mats.append(mat)
    return mats, load, free


def dense_solve(mesh: BoxMesh, problem: Problem, tensor: TripleProductTensor) -> DenseReference:
    """Assemble the undecomposed global Galerkin system and solve it directly."""
    mats, load_det, free = _global_modes(mesh, problem)
    dim = tensor.p_out * load_det.shape[0]
    if dim > DENSE_DIM_CAP:
        raise ValueError(f"dense reference dimension {dim} exceeds the cap {DENSE_DIM_CAP}")
    explicit = ssfem.assemble_blocks(mats, tensor)
    load = np.zeros(dim)
    load[: load_det.shape[0]] = load_det
    dense = explicit.toarray()
    try:
        solution = cho_solve(cho_factor(dense, lower=True, overwrite_a=False), load)
    except LinAlgError:
        from scipy.linalg import solve

        solution = solve(dense, load, assume_a="sym")
    return DenseReference(
        matrix=explicit,
        load=load,
        solution=solution,
        free_nodes=free,
        p_out=tensor.p_out,
        ncomp=problem.ncomp,
    )


def dense_schur(
    mesh: BoxMesh,
    partition: Partition,
    classification: InterfaceClassification,
    problem: Problem,
    tensor: TripleProductTensor,
) -> tuple[np.ndarray, np.ndarray]:
    """Dense interface Schur matrix and right-hand side by explicit elimination.

    Interface slots follow the solver's global ordering (chaos block, then
    interface node, then component), so columns are directly comparable with
    the matrix-free action.
    """
    mats, load_det, free = _global_modes(mesh, problem)
    ncomp = problem.ncomp
    n_free = len(free)
    dim = tensor.p_out * n_free * ncomp
    if dim > DENSE_DIM_CAP:
        raise ValueError(f"dense Schur dimension {dim} exceeds the cap {DENSE_DIM_CAP}")
    dense = ssfem.assemble_blocks(mats, tensor).toarray()
    load = np.zeros(dim)
    load[: load_det.shape[0]] = load_det

    free_pos = np.full(mesh.num_nodes, -1, dtype=np.int64)
    free_pos[free] = np.arange(n_free)
    gpos = free_pos[classification.gamma_nodes]
    det = (gpos[:, None] * ncomp + np.arange(ncomp)[None, :]).ravel()
    idx_gamma = (
        np.arange(tensor.p_out)[:, None] * (n_free * ncomp) + det[None, :]
    ).ravel()
    mask = np.zeros(dim, dtype=bool)
    mask[idx_gamma] = True
    idx_int = np.flatnonzero(~mask)

    a_gg = dense[np.ix_(idx_gamma, idx_gamma)]
    a_gi = dense[np.ix_(idx_gamma, idx_int)]
    a_ii = dense[np.ix_(idx_int, idx_int)]
    x = np.linalg.solve(a_ii, dense[np.ix_(idx_int, idx_gamma)])
    schur = a_gg - a_gi @ x
    rhs = load[idx_gamma] - a_gi @ np.linalg.solve(a_ii, load[idx_int])
    return schur, rhs


def deterministic_solve(mesh: BoxMesh, problem: Problem, coeff_nodal: np.ndarray) -> np.ndarray:
    """Single deterministic FE solve at the given nodal coefficient field.

    Returns the full nodal solution, (N,) for diffusion or (N, 3) for
    elasticity, with zeros at Dirichlet nodes.
    """
    kernels = ElementKernels(mesh, problem)
    free = free_node_ids(mesh)
    node_map = node_map_for(mesh.num_nodes, free)
    ndof = len(free) * problem.ncomp
    all_elements = np.arange(mesh.num_tets)
    ce = kernels.element_coefficients(np.asarray(coeff_nodal, dtype=float), all_elements)
    mat, load = kernels.assemble(all_elements, ce, node_map, ndof, with_load=True)
    if ndof <= 1200:
        sol = np.linalg.solve(mat.toarray(), load)
    else:
        sol = splu(mat.tocsc()).solve(load)
    if problem.ncomp == 1:
        out = np.zeros(mesh.num_nodes)
        out[free] = sol
    else:
        out = np.zeros((mesh.num_nodes, 3))
        out[free] = sol.reshape(-1, 3)
    return out


def mc_moments(
    mesh: BoxMesh,
    problem: Problem,
    kle: KLExpansion | np.ndarray,
    samples: int,
    seed: int,
    g0: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo mean and standard deviation of the solution field.

    Each sample draws i.i.d. standard normals, evaluates the coefficient
    field exactly as exp(g0 + sum_i g_i xi_i) at the nodes, and solves the
    deterministic problem.  Per-sample seeds derive from (seed, index), so
    the estimate is independent of chunking and thread count.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    modes = kle.modes if isinstance(kle, KLExpansion) else np.atleast_2d(kle)
    if g0 is None:
        g0 = np.zeros(mesh.num_nodes)

    kernels = ElementKernels(mesh, problem)
    free = free_node_ids(mesh)
    node_map = node_map_for(mesh.num_nodes, free)
    ndof = len(free) * problem.ncomp
    all_elements = np.arange(mesh.num_tets)
    shape = (mesh.num_nodes,) if problem.ncomp == 1 else (mesh.num_nodes, 3)
    dense_path = ndof <= 1200
    _, load = kernels.assemble(
        all_elements, np.ones(mesh.num_tets), node_map, ndof, with_load=True
    )

    # flat scatter target per kept element-matrix entry, for batched assembly
    if problem.ncomp == 1:
        lrows, lcols = node_map[kernels.rows], node_map[kernels.cols]
    else:
        lrows = np.where(node_map[kernels.rows // 3] >= 0,
                         node_map[kernels.rows // 3] * 3 + kernels.rows % 3, -1)
        lcols = np.where(node_map[kernels.cols // 3] >= 0,
                         node_map[kernels.cols // 3] * 3 + kernels.cols % 3, -1)
    keep = (lrows >= 0) & (lcols >= 0)
    flat_idx = lrows[keep] * ndof + lcols[keep]
    kernel_data = kernels.kernels.reshape(mesh.num_tets, -1)

    def sample_fields(chunk) -> np.ndarray:
        xi = np.stack(
            [np.random.default_rng([seed, idx]).standard_normal(modes.shape[0]) for idx in chunk]
        )
        return np.exp(g0[None, :] + xi @ modes)

    def solutions_dense(chunk) -> np.ndarray:
        fields = sample_fields(chunk)
        ce = fields[:, mesh.tets].mean(axis=2)  # (B, nel)
        data = (kernel_data[None, :, :] * ce[:, :, None]).reshape(len(chunk), -1)[:, keep]
        mats = np.stack(
            [np.bincount(flat_idx, weights=row, minlength=ndof * ndof) for row in data]
        ).reshape(len(chunk), ndof, ndof)
        rhs = np.broadcast_to(load[:, None], (len(chunk), ndof, 1))
        return np.linalg.solve(mats, rhs)[..., 0]

    def solutions_sparse(chunk) -> np.ndarray:
        fields = sample_fields(chunk)
        out = np.empty((len(chunk), ndof))
        for row, field in enumerate(fields):
            ce = kernels.element_coefficients(field, all_elements)
            mat = kernels.assemble(all_elements, ce, node_map, ndof)
            out[row] = splu(mat.tocsc()).solve(load)
        return out

    chunk_size = 128
    chunks = [range(s, min(s + chunk_size, samples)) for s in range(0, samples, chunk_size)]

    def accumulate(chunk) -> tuple[np.ndarray, np.ndarray]:
        sols = solutions_dense(chunk) if dense_path else solutions_sparse(chunk)
        total = np.zeros(shape)
        total_sq = np.zeros(shape)
        for sol in sols:
            u = np.zeros(shape)
            u[free] = sol if problem.ncomp == 1 else sol.reshape(-1, 3)
            total += u
            total_sq += u * u
        return total, total_sq

    partials = parallel_map(accumulate, chunks)
    total = np.zeros(shape)
    total_sq = np.zeros(shape)
    for t, ts in partials:
        total += t
        total_sq += ts
    mean = total / samples
    if samples == 1:
        return mean, np.zeros(shape)
    var = np.clip((total_sq - samples * mean**2) / (samples - 1), 0.0, None)
    return mean, np.sqrt(var)
