"""Linear tetrahedron elements and per-chaos-mode assembly.

Supports the scalar diffusion problem and isotropic linear elasticity with a
lognormal coefficient field.  Degrees of freedom are node-major with the
(x, y, z) displacement components interleaved per node.  Dirichlet
conditions are homogeneous and are eliminated symmetrically: constrained
nodes simply never enter the local numbering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix

from .mesh import BoxMesh
from .pce import LognormalPCE


def lame_constants(e: float, nu: float) -> tuple[float, float]:
    """Lame (lambda, mu) from Young's modulus and Poisson ratio."""
    lam = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    mu = e / (2.0 * (1.0 + nu))
    return lam, mu


def _tet_geometry(coords: np.ndarray) -> tuple[float, np.ndarray]:
    """Volume and constant shape-function gradients (3, 4) of one tet."""
    e = coords[1:] - coords[0]
    vol = float(np.linalg.det(e)) / 6.0
    if vol <= 0:
        raise ValueError(f"degenerate or inverted tet (volume {vol:g})")
    c = np.ones((4, 4))
    c[:, 1:] = coords
    grads = np.linalg.inv(c)[1:, :]
    return vol, grads


def diffusion_element(coords: np.ndarray, coeff: float) -> np.ndarray:
    """4x4 stiffness coeff * volume * G^T G for a linear tet."""
    vol, grads = _tet_geometry(np.asarray(coords, dtype=float))
    return coeff * vol * (grads.T @ grads)


def isotropic_elasticity_matrix(lam: float, mu: float) -> np.ndarray:
    """6x6 constitutive matrix in Voigt order (xx, yy, zz, xy, yz, zx)."""
    d = np.zeros((6, 6))
    d[:3, :3] = lam
    d[np.arange(3), np.arange(3)] += 2.0 * mu
    d[np.arange(3, 6), np.arange(3, 6)] = mu
    return d


def _strain_displacement(grads: np.ndarray) -> np.ndarray:
    """6x12 B matrix from shape gradients, dofs (node0 x,y,z, node1 x,y,z, ...)."""
    b = np.zeros((6, 12))
    for a in range(4):
        gx, gy, gz = grads[:, a]
        col = 3 * a
        b[0, col] = gx
        b[1, col + 1] = gy
        b[2, col + 2] = gz
        b[3, col] = gy
        b[3, col + 1] = gx
        b[4, col + 1] = gz
        b[4, col + 2] = gy
        b[5, col] = gz
        b[5, col + 2] = gx
    return b


def elasticity_element(coords: np.ndarray, lam: float, mu: float) -> np.ndarray:
    """12x12 stiffness volume * B^T D B for a linear tet."""
    vol, grads = _tet_geometry(np.asarray(coords, dtype=float))
    b = _strain_displacement(grads)
    return vol * (b.T @ isotropic_elasticity_matrix(lam, mu) @ b)


@dataclass(frozen=True)
class DiffusionProblem:
    """-div(c grad u) = forcing with lognormal coefficient c and u = 0 on the Dirichlet set."""

    coeff_pce: LognormalPCE
    forcing: float = 1.0

    ncomp = 1

    @property
    def pce(self) -> LognormalPCE:
        return self.coeff_pce


@dataclass(frozen=True)
class ElasticityProblem:
    """Linear elasticity under gravity body force with lognormal Young's modulus.

    The load is F = (0, -rho * gravity, 0) per unit volume; the traction on
    the free boundary is zero.
    """

    e_pce: LognormalPCE
    nu: float
    rho: float = 1.0
    gravity: float = 0.0

    ncomp = 3

    def __post_init__(self):
        if not 0.0 < self.nu < 0.5:
            raise ValueError("Poisson ratio must lie in (0, 0.5)")

    @property
    def pce(self) -> LognormalPCE:
        return self.e_pce


Problem = DiffusionProblem | ElasticityProblem


class ElementKernels:
    """Precomputed unit-coefficient element matrices and scatter indices.

    For diffusion the per-element kernel is the stiffness at unit
    coefficient; for elasticity it is the stiffness at unit Young's modulus
    (Poisson ratio folded in).  Mode and sampled matrices are then scaled
    scatters of these kernels, which keeps repeated assembly cheap.
    """

    def __init__(self, mesh: BoxMesh, problem: Problem):
        self.mesh = mesh
        self.problem = problem
        self.ncomp = problem.ncomp
        x = mesh.nodes[mesh.tets]
        e = x[:, 1:] - x[:, :1]
        vols = np.linalg.det(e) / 6.0
        if np.any(vols <= 0):
            raise ValueError("mesh contains non-positive tet volumes")
        self.volumes = vols

        c = np.ones((mesh.num_tets, 4, 4))
        c[:, :, 1:] = x
        grads = np.linalg.inv(c)[:, 1:, :]  # (M, 3, 4)

        if self.ncomp == 1:
            self.kernels = vols[:, None, None] * np.einsum("mia,mib->mab", grads, grads)
            dofs = mesh.tets
        else:
            bmats = np.zeros((mesh.num_tets, 6, 12))
            for a in range(4):
                gx, gy, gz = grads[:, 0, a], grads[:, 1, a], grads[:, 2, a]
                col = 3 * a
                bmats[:, 0, col] = gx
                bmats[:, 1, col + 1] = gy
                bmats[:, 2, col + 2] = gz
                bmats[:, 3, col] = gy
                bmats[:, 3, col + 1] = gx
                bmats[:, 4, col + 1] = gz
                bmats[:, 4, col + 2] = gy
                bmats[:, 5, col] = gz
                bmats[:, 5, col + 2] = gx
            d_unit = isotropic_elasticity_matrix(*lame_constants(1.0, problem.nu))
            self.kernels = vols[:, None, None] * np.einsum(
                "mia,ij,mjb->mab", bmats, d_unit, bmats
            )
            dofs = (3 * mesh.tets[:, :, None] + np.arange(3)[None, None, :]).reshape(-1, 12)
        nd = dofs.shape[1]
        self.element_dofs = dofs
        self.rows = np.repeat(dofs, nd, axis=1).ravel()
        self.cols = np.tile(dofs, (1, nd)).ravel()

        # mode-0 body load per element dof (deterministic source)
        if self.ncomp == 1:
            self.load_kernel = np.repeat(vols[:, None] / 4.0, 4, axis=1) * problem.forcing
        else:
            per_node = vols / 4.0 * (-problem.rho * problem.gravity)
            self.load_kernel = np.zeros((mesh.num_tets, 12))
            self.load_kernel[:, 1::3] = per_node[:, None]

    def element_coefficients(self, nodal_field: np.ndarray, element_ids: np.ndarray) -> np.ndarray:
        """One-point (centroid) coefficient per element: mean of the 4 nodal values."""
        return nodal_field[self.mesh.tets[element_ids]].mean(axis=1)

    def assemble(
        self,
        element_ids: np.ndarray,
        coeff: np.ndarray,
        node_map: np.ndarray,
        ndof: int,
        with_load: bool = False,
    ):
        """Scatter coeff-scaled kernels of the given elements into a CSR matrix.

        `node_map` sends node ids to local node positions (-1 for nodes that
        are excluded, e.g. Dirichlet); excluded rows/columns are dropped,
        which is the symmetric elimination for homogeneous conditions.
        """
        nd = self.element_dofs.shape[1]
        sel = (np.asarray(element_ids)[:, None] * (nd * nd) + np.arange(nd * nd)[None, :]).ravel()
        rows, cols = self.rows[sel], self.cols[sel]
        if self.ncomp == 1:
            lrows = node_map[rows]
            lcols = node_map[cols]
        else:
            lrows = np.where(node_map[rows // 3] >= 0, node_map[rows // 3] * 3 + rows % 3, -1)
            lcols = np.where(node_map[cols // 3] >= 0, node_map[cols // 3] * 3 + cols % 3, -1)
        data = (self.kernels[element_ids] * coeff[:, None, None]).ravel()
        keep = (lrows >= 0) & (lcols >= 0)
        mat = coo_matrix((data[keep], (lrows[keep], lcols[keep])), shape=(ndof, ndof)).tocsr()
        if not with_load:
            return mat
        lf = np.zeros(ndof)
        drows = self.element_dofs[element_ids].ravel()
        if self.ncomp == 1:
            ldofs = node_map[drows]
        else:
            ldofs = np.where(node_map[drows // 3] >= 0, node_map[drows // 3] * 3 + drows % 3, -1)
        vals = self.load_kernel[element_ids].ravel()
        ok = ldofs >= 0
        np.add.at(lf, ldofs[ok], vals[ok])
        return mat, lf


@dataclass(frozen=True)
class ModeMatrices:
    """Per input-chaos-index stiffness matrices on a local numbering, plus the mode-0 load."""

    matrices: list[csr_matrix]
    load: np.ndarray
    local_nodes: np.ndarray  # node ids in local order (interior first, then interface)
    num_interior: int  # count of interior nodes at the front of local_nodes
    ncomp: int

    @property
    def ndof(self) -> int:
        return len(self.local_nodes) * self.ncomp


def node_map_for(num_nodes: int, local_nodes: np.ndarray) -> np.ndarray:
    node_map = np.full(num_nodes, -1, dtype=np.int64)
    node_map[local_nodes] = np.arange(len(local_nodes))
    return node_map


def assemble_modes(
    kernels: ElementKernels,
    element_ids: np.ndarray,
    local_nodes: np.ndarray,
    num_interior: int,
) -> ModeMatrices:
    """Assemble one stiffness matrix per input chaos index over the given elements.

    The element coefficient for index i is the centroid value of the i-th
    coefficient field of the problem's lognormal expansion; index 0 carries
    the lognormal mean field and is the only index with a load vector.
    """
    element_ids = np.asarray(element_ids)
    if element_ids.size == 0:
        raise ValueError("empty element set for subdomain assembly")
    node_map = node_map_for(kernels.mesh.num_nodes, local_nodes)
    ndof = len(local_nodes) * kernels.ncomp
    coeffs = kernels.problem.pce.coeffs
    matrices: list[csr_matrix] = []
    load = None
    for i in range(coeffs.shape[0]):
        ce = kernels.element_coefficients(coeffs[i], element_ids)
        if i == 0:
            mat, load = kernels.assemble(element_ids, ce, node_map, ndof, with_load=True)
        else:
            mat = kernels.assemble(element_ids, ce, node_map, ndof)
        matrices.append(mat)
    return ModeMatrices(
        matrices=matrices,
        load=load,
        local_nodes=np.asarray(local_nodes),
        num_interior=num_interior,
        ncomp=kernels.ncomp,
    )
