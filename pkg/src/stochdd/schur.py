"""Extended Schur complement operator over the global interface.

The global interface vector is chaos-block major, then interface node (in
ascending node id), then displacement component:

    slot(k, node_pos, comp) = k * (n_gamma * ncomp) + node_pos * ncomp + comp

Per subdomain the interior block is assembled explicitly and factorized
once; interface blocks stay matrix-free.  Gather/scatter between local and
global interface vectors is pure indexing, and all subdomain reductions run
in ascending subdomain order so results are bit-identical regardless of the
task schedule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ssfem
from ._parallel import parallel_map
from .fem import ElementKernels, ModeMatrices, Problem, assemble_modes
from .linalg import SpdFactor
from .mesh import DIRICHLET, BoxMesh, InterfaceClassification, Partition
from .pce import TripleProductTensor


@dataclass
class SubdomainOperators:
    """Split stochastic blocks, factorized interior, and the local-to-global interface map."""

    sid: int
    blocks: dict[str, ssfem.StochasticBlockMatrix]
    interior_lu: SpdFactor  # factorization of the explicit interior block
    load: np.ndarray  # deterministic load over the local numbering (chaos block 0)
    gamma_nodes: np.ndarray  # node ids of the local interface, local order
    gamma_map: np.ndarray  # local interface node pos -> global interface node pos
    interior_nodes: np.ndarray
    modes: ModeMatrices
    _schur_dense: np.ndarray | None = None

    @property
    def n_interior(self) -> int:
        return len(self.interior_nodes) * self.modes.ncomp

    @property
    def n_gamma(self) -> int:
        return len(self.gamma_nodes) * self.modes.ncomp

    def load_split(self, p_out: int) -> tuple[np.ndarray, np.ndarray]:
        """Interior and interface parts of the stochastic load (block 0 only)."""
        ni, ng = self.n_interior, self.n_gamma
        f_i = np.zeros(p_out * ni)
        f_g = np.zeros(p_out * ng)
        f_i[:ni] = self.load[:ni]
        f_g[:ng] = self.load[ni:]
        return f_i, f_g

    def schur_dense(self) -> np.ndarray:
        """Dense local interface Schur complement A_GG - A_GI A_II^-1 A_IG.

        Computed on first use and cached; preconditioner variants share it.
        """
        if self._schur_dense is None:
            a_gg = self.blocks["GG"].to_explicit().toarray()
            a_ig = self.blocks["IG"].to_explicit().toarray()
            self._schur_dense = self.interior_lu.schur_complement(a_gg, a_ig)
        return self._schur_dense


@dataclass
class SchurContext:
    """Everything needed to apply the extended Schur operator."""

    subdomains: list[SubdomainOperators]
    tensor: TripleProductTensor
    classification: InterfaceClassification
    partition: Partition
    mesh: BoxMesh
    problem: Problem
    kernels: ElementKernels
    ncomp: int

    @property
    def p_out(self) -> int:
        return self.tensor.p_out

    @property
    def n_gamma_nodes(self) -> int:
        return self.classification.num_gamma

    @property
    def dim(self) -> int:
        return self.p_out * self.n_gamma_nodes * self.ncomp

    def gather(self, sub: SubdomainOperators, x: np.ndarray) -> np.ndarray:
        """Restrict a global interface vector to subdomain-local layout."""
        xb = x.reshape(self.p_out, self.n_gamma_nodes, self.ncomp)
        return xb[:, sub.gamma_map, :].ravel()

    def scatter_add(self, sub: SubdomainOperators, y: np.ndarray, local: np.ndarray) -> None:
        """Accumulate a subdomain-local interface vector into the global one."""
        yb = y.reshape(self.p_out, self.n_gamma_nodes, self.ncomp)
        lb = local.reshape(self.p_out, len(sub.gamma_nodes), self.ncomp)
        np.add.at(yb, (slice(None), sub.gamma_map, slice(None)), lb)


def build_schur_context(
    mesh: BoxMesh,
    partition: Partition,
    classification: InterfaceClassification,
    problem: Problem,
    tensor: TripleProductTensor,
) -> SchurContext:
    """Assemble and factorize all subdomain operators (one task per subdomain)."""
    kernels = ElementKernels(mesh, problem)
    kind = classification.kind

    def build_one(sid: int) -> SubdomainOperators:
        elements = np.flatnonzero(partition.element_subdomain == sid)
        nodes = partition.subdomain_nodes[sid]
        nodes = nodes[kind[nodes] != DIRICHLET]
        interface_mask = classification.gamma_index[nodes] >= 0
        interior_nodes = nodes[~interface_mask]
        gamma_nodes = nodes[interface_mask]
        local_nodes = np.concatenate([interior_nodes, gamma_nodes])
        modes = assemble_modes(kernels, elements, local_nodes, len(interior_nodes))
        blocks = ssfem.split_interior_interface(modes, tensor)
        a_ii = ssfem.assemble_blocks(blocks["II"].modes, tensor)
        lu = SpdFactor(a_ii)
        return SubdomainOperators(
            sid=sid,
            blocks=blocks,
            interior_lu=lu,
            load=modes.load,  # deterministic source: chaos block 0 only after expansion
            gamma_nodes=gamma_nodes,
            gamma_map=classification.gamma_index[gamma_nodes],
            interior_nodes=interior_nodes,
            modes=modes,
        )

    subs = parallel_map(build_one, range(partition.num_subdomains))
    return SchurContext(
        subdomains=subs,
        tensor=tensor,
        classification=classification,
        partition=partition,
        mesh=mesh,
        problem=problem,
        kernels=kernels,
        ncomp=problem.ncomp,
    )


def schur_apply(ctx: SchurContext, x: np.ndarray) -> np.ndarray:
    """y = sum_s R_s^T [A_GG - A_GI A_II^-1 A_IG] R_s x."""

    def local_apply(sub: SubdomainOperators) -> np.ndarray:
        xl = ctx.gather(sub, x)
        v = sub.blocks["IG"] @ xl
        w = sub.interior_lu.solve(v)
        return (sub.blocks["GG"] @ xl) - (sub.blocks["GI"] @ w)

    contributions = parallel_map(local_apply, ctx.subdomains)
    y = np.zeros_like(x)
    for sub, yl in zip(ctx.subdomains, contributions):
        ctx.scatter_add(sub, y, yl)
    return y


def schur_rhs(ctx: SchurContext) -> np.ndarray:
    """g = sum_s R_s^T [F_G - A_GI A_II^-1 F_I] for the assembled loads."""

    def local_rhs(sub: SubdomainOperators) -> np.ndarray:
        f_i, f_g = sub.load_split(ctx.p_out)
        w = sub.interior_lu.solve(f_i)
        return f_g - (sub.blocks["GI"] @ w)

    contributions = parallel_map(local_rhs, ctx.subdomains)
    g = np.zeros(ctx.dim)
    for sub, gl in zip(ctx.subdomains, contributions):
        ctx.scatter_add(sub, g, gl)
    return g


def recover_interior(ctx: SchurContext, u_gamma: np.ndarray) -> list[np.ndarray]:
    """Per-subdomain interior solutions u_I = A_II^-1 (F_I - A_IG R_s u_gamma)."""

    def recover_one(sub: SubdomainOperators) -> np.ndarray:
        f_i, _ = sub.load_split(ctx.p_out)
        ul = ctx.gather(sub, u_gamma)
        return sub.interior_lu.solve(f_i - (sub.blocks["IG"] @ ul))

    return parallel_map(recover_one, ctx.subdomains)
