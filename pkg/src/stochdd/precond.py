"""Two-level Neumann-Neumann preconditioners for the extended Schur system.

Three variants share one code path and differ only in the coarse node set:

* ``wirebasket`` -- coarse set = interface-edge and vertex nodes
* ``vertex``     -- coarse set = vertex nodes only
* ``nocoarse``   -- empty coarse set (one-level baseline)

Per subdomain the local interface Schur complement S^s is formed densely
(its size is interface-local, so this is cheap at desk scale), the
face-face block is factorized, and the coarse operator is assembled from
the wirebasket Schur complements of all subdomains, then factorized once.
Interface multiplicity scaling provides the partition of unity.

Applying the preconditioner computes

    z = sum_s R_s^T D_s (R_F^T [S_FF]^-1 R_F) D_s R_s r  +  R_0^T F_WW^-1 R_0 r

with R_0 = sum_s B_W^T (R_W - S_WF [S_FF]^-1 R_F) D_s R_s.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from ._parallel import parallel_map
from .mesh import EDGE, FACE, VERTEX
from .schur import SchurContext, SubdomainOperators

logger = logging.getLogger("stochdd.precond")

_COARSE_KINDS = {"wirebasket": (EDGE, VERTEX), "vertex": (VERTEX,), "nocoarse": ()}


def _factorize_spd(mat: np.ndarray, label: str, events: list, presumed_singular: bool = False):
    """Cholesky with a diagonal-shift guard for (near-)singular local problems."""
    if mat.shape[0] == 0:
        return None
    shift = 0.0
    base = 1e-10 * float(np.mean(np.diag(mat))) if mat.shape[0] else 0.0
    if presumed_singular:
        shift = base
    for attempt in range(4):
        try:
            factor = cho_factor(mat + shift * np.eye(mat.shape[0]) if shift else mat, lower=True)
            if shift:
                events.append({"matrix": label, "shift": shift})
                logger.warning("regularized %s with diagonal shift %.3e", label, shift)
            return factor
        except LinAlgError:
            shift = base if shift == 0.0 else shift * 100.0
    raise LinAlgError(f"{label} is not positive definite even after shifting")


@dataclass
class SubdomainPrecond:
    """Per-subdomain pieces of the two-level preconditioner."""

    sid: int
    f_slots: np.ndarray  # local interface slots handled by the local solve
    w_slots: np.ndarray  # local interface slots in the coarse set
    sff_factor: object  # cho_factor of S_FF (None when F is empty)
    s_wf: np.ndarray  # dense S_WF block
    scaling: np.ndarray  # multiplicity scaling over local interface slots
    coarse_slots: np.ndarray  # global coarse slots matching w_slots


@dataclass
class TwoLevelPreconditioner:
    kind: str
    ctx: SchurContext
    subs: list[SubdomainPrecond]
    coarse_factor: object  # cho_factor of F_WW (None when the coarse set is empty)
    coarse_dim: int
    regularizations: list[dict] = field(default_factory=list)

    def apply(self, r: np.ndarray) -> np.ndarray:
        ctx = self.ctx

        def local_pass(pair):
            sub, pc = pair
            t = pc.scaling * ctx.gather(sub, r)
            z_loc = np.zeros_like(t)
            w_con = t[pc.w_slots]
            if pc.sff_factor is not None:
                sf = cho_solve(pc.sff_factor, t[pc.f_slots], check_finite=False)
                z_loc[pc.f_slots] = sf
                if len(pc.w_slots):
                    w_con = w_con - pc.s_wf @ sf
            return pc.scaling * z_loc, w_con

        pairs = list(zip(ctx.subdomains, self.subs))
        results = parallel_map(local_pass, pairs)

        z = np.zeros_like(r)
        for (sub, _), (z_loc, _) in zip(pairs, results):
            ctx.scatter_add(sub, z, z_loc)

        if self.coarse_factor is None:
            return z

        w_glob = np.zeros(self.coarse_dim)
        for (_, pc), (_, w_con) in zip(pairs, results):
            np.add.at(w_glob, pc.coarse_slots, w_con)
        u_w = cho_solve(self.coarse_factor, w_glob, check_finite=False)

        def coarse_pass(pair):
            sub, pc = pair
            y_loc = np.zeros(ctx.p_out * sub.n_gamma)
            uw_loc = u_w[pc.coarse_slots]
            y_loc[pc.w_slots] = uw_loc
            if pc.sff_factor is not None and len(pc.w_slots):
                y_loc[pc.f_slots] = -cho_solve(pc.sff_factor, pc.s_wf.T @ uw_loc, check_finite=False)
            return pc.scaling * y_loc

        coarse_results = parallel_map(coarse_pass, pairs)
        for (sub, _), y_loc in zip(pairs, coarse_results):
            ctx.scatter_add(sub, z, y_loc)
        return z


def _slot_indices(node_positions: np.ndarray, n_nodes: int, ncomp: int, p_out: int) -> np.ndarray:
    """Stochastic slot indices for the given node positions, chaos-block major."""
    det = (node_positions[:, None] * ncomp + np.arange(ncomp)[None, :]).ravel()
    return (np.arange(p_out)[:, None] * (n_nodes * ncomp) + det[None, :]).ravel()


def build_preconditioner(ctx: SchurContext, kind: str) -> TwoLevelPreconditioner:
    """Build the two-level preconditioner state for the given coarse grid kind."""
    if kind not in _COARSE_KINDS:
        raise ValueError(f"unknown preconditioner kind {kind!r}")
    coarse_tags = _COARSE_KINDS[kind]
    cls = ctx.classification
    p_out, ncomp = ctx.p_out, ctx.ncomp

    coarse_nodes = np.flatnonzero(np.isin(cls.kind, coarse_tags)) if coarse_tags else np.array([], dtype=int)
    coarse_index = np.full(ctx.mesh.num_nodes, -1, dtype=np.int64)
    coarse_index[coarse_nodes] = np.arange(len(coarse_nodes))
    coarse_dim = p_out * len(coarse_nodes) * ncomp

    mult = ctx.partition.multiplicity
    dirichlet = set(ctx.mesh.dirichlet_nodes.tolist())
    events: list[dict] = []

    def build_one(sub: SubdomainOperators):
        n_g = len(sub.gamma_nodes)
        tags = cls.kind[sub.gamma_nodes]
        w_mask = np.isin(tags, coarse_tags) if coarse_tags else np.zeros(n_g, dtype=bool)
        w_pos = np.flatnonzero(w_mask)
        f_pos = np.flatnonzero(~w_mask)
        f_slots = _slot_indices(f_pos, n_g, ncomp, p_out)
        w_slots = _slot_indices(w_pos, n_g, ncomp, p_out)

        s_dense = sub.schur_dense()
        s_ff = s_dense[np.ix_(f_slots, f_slots)]
        s_wf = s_dense[np.ix_(w_slots, f_slots)]
        s_ww = s_dense[np.ix_(w_slots, w_slots)]

        floating = not any(int(n) in dirichlet for n in ctx.partition.subdomain_nodes[sub.sid])
        local_events: list[dict] = []
        # with no coarse nodes on a floating subdomain the local Schur keeps
        # the rigid-body kernel, so shift proactively instead of trusting
        # roundoff to trip the factorization
        factor = _factorize_spd(
            s_ff,
            f"S_FF(subdomain {sub.sid})",
            local_events,
            presumed_singular=floating and len(w_slots) == 0,
        )
        coarse_block = None
        if len(w_slots):
            coarse_block = s_ww
            if factor is not None and len(f_slots):
                coarse_block = s_ww - s_wf @ cho_solve(factor, s_wf.T, check_finite=False)
        # global coarse slots aligned with w_slots ordering
        gpos = coarse_index[sub.gamma_nodes[w_pos]]
        det = (gpos[:, None] * ncomp + np.arange(ncomp)[None, :]).ravel()
        coarse_slots = (
            np.arange(p_out)[:, None] * (len(coarse_nodes) * ncomp) + det[None, :]
        ).ravel()

        d_node = 1.0 / mult[sub.gamma_nodes]
        scaling = np.tile(np.repeat(d_node, ncomp), p_out)
        pc = SubdomainPrecond(
            sid=sub.sid,
            f_slots=f_slots,
            w_slots=w_slots,
            sff_factor=factor,
            s_wf=s_wf,
            scaling=scaling,
            coarse_slots=coarse_slots,
        )
        return pc, coarse_block, local_events

    built = parallel_map(build_one, ctx.subdomains)
    subs = []
    f_ww = np.zeros((coarse_dim, coarse_dim)) if coarse_dim else None
    for pc, coarse_block, local_events in built:
        subs.append(pc)
        events.extend(local_events)
        if coarse_block is not None and f_ww is not None:
            f_ww[np.ix_(pc.coarse_slots, pc.coarse_slots)] += coarse_block

    coarse_factor = None
    if f_ww is not None and coarse_dim:
        f_ww = 0.5 * (f_ww + f_ww.T)
        coarse_factor = _factorize_spd(f_ww, "F_WW", events)
    return TwoLevelPreconditioner(
        kind=kind,
        ctx=ctx,
        subs=subs,
        coarse_factor=coarse_factor,
        coarse_dim=coarse_dim,
        regularizations=events,
    )


def build_wirebasket(ctx: SchurContext) -> TwoLevelPreconditioner:
    return build_preconditioner(ctx, "wirebasket")


def build_vertex(ctx: SchurContext) -> TwoLevelPreconditioner:
    return build_preconditioner(ctx, "vertex")


def build_nocoarse(ctx: SchurContext) -> TwoLevelPreconditioner:
    return build_preconditioner(ctx, "nocoarse")


def apply_wirebasket(state: TwoLevelPreconditioner, r: np.ndarray) -> np.ndarray:
    return state.apply(r)


def apply_vertex(state: TwoLevelPreconditioner, r: np.ndarray) -> np.ndarray:
    return state.apply(r)


def apply_nocoarse(state: TwoLevelPreconditioner, r: np.ndarray) -> np.ndarray:
    return state.apply(r)
