"""Legacy ASCII VTK writer for tetrahedral meshes with point/cell scalars."""

from __future__ import annotations

import numpy as np

from .mesh import BoxMesh

_TET_CELL_TYPE = 10


def write_vtk(
    path,
    mesh: BoxMesh,
    point_data: dict[str, np.ndarray] | None = None,
    cell_data: dict[str, np.ndarray] | None = None,
    title: str = "stochdd fields",
) -> None:
    """Write the mesh with optional scalar fields as a legacy VTK file.

    Point scalars must have one value per node, cell scalars one per tet.
    Integer arrays are written as int scalars, everything else as double.
    """
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.num_nodes} double",
    ]
    lines.extend(" ".join(repr(float(c)) for c in row) for row in mesh.nodes)
    lines.append(f"CELLS {mesh.num_tets} {5 * mesh.num_tets}")
    lines.extend("4 " + " ".join(str(int(v)) for v in tet) for tet in mesh.tets)
    lines.append(f"CELL_TYPES {mesh.num_tets}")
    lines.extend(str(_TET_CELL_TYPE) for _ in range(mesh.num_tets))

    def emit(block: dict[str, np.ndarray], count: int) -> None:
        for name, values in block.items():
            values = np.asarray(values)
            if values.shape != (count,):
                raise ValueError(f"field {name!r}: expected shape ({count},), got {values.shape}")
            if np.issubdtype(values.dtype, np.integer):
                lines.append(f"SCALARS {name} int 1")
                lines.append("LOOKUP_TABLE default")
                lines.extend(str(int(v)) for v in values)
            else:
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                lines.extend(repr(float(v)) for v in values)

    if cell_data:
        lines.append(f"CELL_DATA {mesh.num_tets}")
        emit(cell_data, mesh.num_tets)
    if point_data:
        lines.append(f"POINT_DATA {mesh.num_nodes}")
        emit(point_data, mesh.num_nodes)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
