"""Structured tetrahedral box meshes, box partitioning, interface classification.

Nodes are numbered x-fastest on the (nx+1) x (ny+1) x (nz+1) grid.  Each hex
cell is split into 6 tetrahedra by the Kuhn subdivision (one tet per
permutation of the axes), which keeps faces conforming across cells and
subdomains.

Interface node taxonomy for a box partition (Dirichlet nodes are eliminated
from every set):

* interior  -- touched by exactly one subdomain
* face      -- shared by exactly two subdomains, not on the interface boundary
* wirebasket edge / vertex -- shared by three or more subdomains, or shared
  interface nodes lying on the domain boundary (the boundary of the
  interface surface); vertices are the endpoints of each maximal run of
  wirebasket nodes with identical sharing signature
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

# node classification codes
INTERIOR = 0
FACE = 1
EDGE = 2
VERTEX = 3
DIRICHLET = 4

_FACE_NAMES = ("xmin", "xmax", "ymin", "ymax", "zmin", "zmax")


@dataclass(frozen=True)
class BoxMesh:
    nodes: np.ndarray  # (N, 3) coordinates
    tets: np.ndarray  # (M, 4) node ids, positively oriented
    dirichlet_nodes: np.ndarray  # sorted node ids
    cells: tuple[int, int, int]
    extents: tuple[float, float, float]

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def num_tets(self) -> int:
        return self.tets.shape[0]

    def tet_volumes(self) -> np.ndarray:
        x = self.nodes[self.tets]
        e = x[:, 1:] - x[:, :1]
        return np.linalg.det(e) / 6.0

    def lumped_weights(self) -> np.ndarray:
        """Nodal quadrature weights: a quarter of each incident tet volume."""
        vols = self.tet_volumes()
        w = np.zeros(self.num_nodes)
        np.add.at(w, self.tets.ravel(), np.repeat(vols / 4.0, 4))
        return w

    def edges(self) -> np.ndarray:
        """Unique undirected node-pair edges of the tetrahedra."""
        pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
        e = np.vstack([self.tets[:, p] for p in pairs])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def boundary_faces_per_node(self) -> list[int]:
        """Bitmask of domain boundary faces (order xmin..zmax) each node lies on."""
        lx, ly, lz = self.extents
        tol = 1e-12 * max(lx, ly, lz)
        masks = np.zeros(self.num_nodes, dtype=np.int64)
        coords = self.nodes
        limits = [(0, 0.0), (0, lx), (1, 0.0), (1, ly), (2, 0.0), (2, lz)]
        for bit, (axis, value) in enumerate(limits):
            masks[np.abs(coords[:, axis] - value) <= tol] |= 1 << bit
        return masks


def _kuhn_tets(corner_ids: np.ndarray) -> np.ndarray:
    """Six tets per hex cell, one per axis permutation, all positively oriented.

    `corner_ids` has shape (ncells, 2, 2, 2) indexed by (iz, iy, ix) offsets.
    """
    tets = []
    for perm in permutations(range(3)):
        # walk from (0,0,0) to (1,1,1) adding one axis at a time
        steps = [(0, 0, 0)]
        cur = [0, 0, 0]
        for axis in perm:
            cur[axis] = 1
            steps.append(tuple(cur))
        quad = [corner_ids[:, s[2], s[1], s[0]] for s in steps]
        # odd permutations produce negative volume; swap the last two nodes
        parity = sum(1 for a in range(3) for b in range(a + 1, 3) if perm[a] > perm[b]) % 2
        if parity:
            quad[2], quad[3] = quad[3], quad[2]
        tets.append(np.stack(quad, axis=1))
    return np.concatenate([t[:, None, :] for t in tets], axis=1).reshape(-1, 4)


def build_box_mesh(
    nx: int,
    ny: int,
    nz: int,
    lx: float = 1.0,
    ly: float = 1.0,
    lz: float = 1.0,
    dirichlet: str = "all",
) -> BoxMesh:
    """Structured box mesh with 6 tets per cell.

    `dirichlet` selects constrained boundary faces: "all", "none", or a
    comma-separated subset of xmin,xmax,ymin,ymax,zmin,zmax.
    """
    if min(nx, ny, nz) < 1:
        raise ValueError("cell counts must be at least 1")
    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    zs = np.linspace(0.0, lz, nz + 1)
    zg, yg, xg = np.meshgrid(zs, ys, xs, indexing="ij")
    nodes = np.column_stack([xg.ravel(), yg.ravel(), zg.ravel()])

    node_id = np.arange(nodes.shape[0]).reshape(nz + 1, ny + 1, nx + 1)
    corner_ids = np.empty((nz * ny * nx, 2, 2, 2), dtype=np.int64)
    base = node_id[:-1, :-1, :-1]
    for dz in (0, 1):
        for dy in (0, 1):
            for dx in (0, 1):
                corner_ids[:, dz, dy, dx] = node_id[
                    dz : nz + dz, dy : ny + dy, dx : nx + dx
                ].ravel()
    tets = _kuhn_tets(corner_ids)

    if dirichlet == "all":
        faces = set(_FACE_NAMES)
    elif dirichlet in ("none", ""):
        faces = set()
    else:
        faces = {name.strip() for name in dirichlet.split(",")}
        unknown = faces - set(_FACE_NAMES)
        if unknown:
            raise ValueError(f"unknown boundary face selector(s): {sorted(unknown)}")
    mask = np.zeros(nodes.shape[0], dtype=bool)
    sel = {
        "xmin": nodes[:, 0] <= 0.0,
        "xmax": nodes[:, 0] >= lx,
        "ymin": nodes[:, 1] <= 0.0,
        "ymax": nodes[:, 1] >= ly,
        "zmin": nodes[:, 2] <= 0.0,
        "zmax": nodes[:, 2] >= lz,
    }
    for name in faces:
        mask |= sel[name]
    return BoxMesh(
        nodes=nodes,
        tets=tets,
        dirichlet_nodes=np.flatnonzero(mask),
        cells=(nx, ny, nz),
        extents=(float(lx), float(ly), float(lz)),
    )


@dataclass(frozen=True)
class Partition:
    """Box-wise element ownership with node sharing information."""

    num_subdomains: int
    grid: tuple[int, int, int]
    element_subdomain: np.ndarray  # (M,)
    node_sets: tuple[frozenset[int], ...]  # sharing set per node
    multiplicity: np.ndarray  # (N,)
    subdomain_nodes: tuple[np.ndarray, ...]  # sorted node ids per subdomain
    subdomain_size: tuple[float, float, float]


def partition_boxes(mesh: BoxMesh, px: int, py: int, pz: int) -> Partition:
    """Assign elements to the px x py x pz box grid (cell counts must divide)."""
    nx, ny, nz = mesh.cells
    if nx % px or ny % py or nz % pz:
        raise ValueError(f"partition ({px},{py},{pz}) does not divide cells ({nx},{ny},{nz})")
    mx, my, mz = nx // px, ny // py, nz // pz

    cell = np.arange(nx * ny * nz)
    cx = cell % nx
    cy = (cell // nx) % ny
    cz = cell // (nx * ny)
    sid_cell = (cx // mx) + px * ((cy // my) + py * (cz // mz))
    element_subdomain = np.repeat(sid_cell, 6)

    num_nodes = mesh.num_nodes
    pairs = np.unique(
        np.column_stack([mesh.tets.ravel(), np.repeat(element_subdomain, 4)]), axis=0
    )
    node_sets: list[set[int]] = [set() for _ in range(num_nodes)]
    for node, sid in pairs:
        node_sets[node].add(int(sid))
    multiplicity = np.array([len(s) for s in node_sets], dtype=np.int64)

    ns = px * py * pz
    subdomain_nodes = tuple(
        np.unique(pairs[pairs[:, 1] == s, 0]) for s in range(ns)
    )
    lx, ly, lz = mesh.extents
    return Partition(
        num_subdomains=ns,
        grid=(px, py, pz),
        element_subdomain=element_subdomain,
        node_sets=tuple(frozenset(s) for s in node_sets),
        multiplicity=multiplicity,
        subdomain_nodes=subdomain_nodes,
        subdomain_size=(lx / px, ly / py, lz / pz),
    )


@dataclass(frozen=True)
class InterfaceClassification:
    """Per-node tags plus global index maps for interface/face/wirebasket slots."""

    kind: np.ndarray  # (N,) one of INTERIOR/FACE/EDGE/VERTEX/DIRICHLET
    owner: np.ndarray  # (N,) subdomain id for interior nodes, -1 otherwise
    gamma_nodes: np.ndarray  # sorted interface node ids
    gamma_index: np.ndarray  # (N,) position in gamma_nodes, -1 otherwise
    face_nodes: np.ndarray
    wirebasket_nodes: np.ndarray
    vertex_nodes: np.ndarray

    @property
    def num_gamma(self) -> int:
        return len(self.gamma_nodes)


def classify_interface(partition: Partition, mesh: BoxMesh) -> InterfaceClassification:
    """Tag every node as interior / face / wirebasket-edge / vertex.

    Wirebasket candidates are nodes shared by >= 3 subdomains plus shared
    nodes on the domain boundary (the interface-surface boundary).  Runs of
    candidates with the same sharing signature (subdomain set plus boundary
    faces) are traced along mesh edges; run endpoints become vertices.
    """
    n = mesh.num_nodes
    mult = partition.multiplicity
    bmask = mesh.boundary_faces_per_node()

    kind = np.full(n, INTERIOR, dtype=np.int8)
    owner = np.full(n, -1, dtype=np.int64)
    for node in range(n):
        if mult[node] == 1:
            owner[node] = next(iter(partition.node_sets[node]))

    candidate = (mult >= 3) | ((mult == 2) & (bmask != 0))
    kind[(mult == 2) & ~candidate] = FACE

    if candidate.any():
        signature = {
            node: (partition.node_sets[node], int(bmask[node]))
            for node in np.flatnonzero(candidate)
        }
        degree: dict[int, int] = {node: 0 for node in signature}
        same_sig: dict[int, list[int]] = {node: [] for node in signature}
        for a, b in mesh.edges():
            a, b = int(a), int(b)
            if a in signature and b in signature:
                degree[a] += 1
                degree[b] += 1
                if signature[a] == signature[b]:
                    same_sig[a].append(b)
                    same_sig[b].append(a)
        for node in signature:
            # vertices terminate a run (degree <= 1) or sit where the
            # sharing signature changes (isolated within their signature)
            if degree[node] <= 1 or not same_sig[node]:
                kind[node] = VERTEX
            else:
                kind[node] = EDGE

    dirichlet = mesh.dirichlet_nodes
    kind[dirichlet] = DIRICHLET
    owner[dirichlet] = -1

    gamma_nodes = np.flatnonzero((kind == FACE) | (kind == EDGE) | (kind == VERTEX))
    gamma_index = np.full(n, -1, dtype=np.int64)
    gamma_index[gamma_nodes] = np.arange(len(gamma_nodes))
    return InterfaceClassification(
        kind=kind,
        owner=owner,
        gamma_nodes=gamma_nodes,
        gamma_index=gamma_index,
        face_nodes=np.flatnonzero(kind == FACE),
        wirebasket_nodes=np.flatnonzero((kind == EDGE) | (kind == VERTEX)),
        vertex_nodes=np.flatnonzero(kind == VERTEX),
    )
