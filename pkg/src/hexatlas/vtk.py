"""ASCII legacy VTK export of hexahedral meshes.

The writer emits one ``UNSTRUCTURED_GRID`` with two integer cell arrays
(``anatomy_label`` and ``property_label``) and, optionally, one nodal double
array.  Floats are printed with ``repr`` so they parse back bit-exactly.
:func:`read_vtk_legacy` reads back exactly what the writer produces; it is not
a general VTK reader.
"""

from __future__ import annotations

import io

import numpy as np

from .errors import FieldLengthMismatch, VtkFormatError
from .hexmesh import HexMesh

VTK_HEXAHEDRON = 12


def _float_lines(values, per_line):
    flat = np.asarray(values, dtype=float).reshape(-1, per_line)
    return "\n".join(" ".join(map(repr, row)) for row in flat.tolist())


def write_vtk_legacy(mesh, point_field=None, title="hexatlas mesh"):
    """Serialise ``mesh`` to legacy VTK bytes.

    Parameters
    ----------
    point_field : (name, values) or None
        Nodal scalars; ``values`` needs one entry per node.
    """
    n, m = mesh.n_nodes, mesh.n_cells
    if point_field is not None:
        name, values = point_field
        values = np.asarray(values, dtype=float)
        if values.shape != (n,):
            raise FieldLengthMismatch(f"field {name!r} has {values.size} values, mesh has {n} nodes")
        if not name or any(c.isspace() for c in name):
            raise ValueError(f"field name {name!r} must be one non-empty token")

    out = io.StringIO()
    out.write("# vtk DataFile Version 3.0\n")
    out.write(title.replace("\n", " ")[:255] + "\n")
    out.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
    out.write(f"POINTS {n} double\n")
    out.write(_float_lines(mesh.nodes, 3) + "\n")
    out.write(f"CELLS {m} {9 * m}\n")
    rows = np.column_stack([np.full(m, 8, dtype=np.int64), mesh.cells])
    out.write("\n".join(" ".join(map(str, r)) for r in rows.tolist()) + "\n")
    out.write(f"CELL_TYPES {m}\n")
    out.write("\n".join([str(VTK_HEXAHEDRON)] * m) + "\n")
    out.write(f"CELL_DATA {m}\n")
    for arr_name, arr in (("anatomy_label", mesh.anatomy_label),
                          ("property_label", mesh.property_label)):
        out.write(f"SCALARS {arr_name} int 1\nLOOKUP_TABLE default\n")
        out.write("\n".join(map(str, np.asarray(arr).tolist())) + "\n")
    if point_field is not None:
        out.write(f"POINT_DATA {n}\n")
        out.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
        out.write("\n".join(map(repr, values.tolist())) + "\n")
    return out.getvalue().encode("ascii")


def read_vtk_legacy(data):
    """Parse the output of :func:`write_vtk_legacy`.

    Returns
    -------
    mesh : HexMesh
        Without lattice provenance.
    point_data : dict
        Name -> nodal array.
    """
    if isinstance(data, bytes):
        data = data.decode("ascii")
    lines = data.splitlines()
    if len(lines) < 4 or not lines[0].startswith("# vtk DataFile Version"):
        raise VtkFormatError("not a legacy VTK file")
    if lines[2].strip() != "ASCII" or lines[3].strip() != "DATASET UNSTRUCTURED_GRID":
        raise VtkFormatError("only ASCII unstructured grids are supported")
    tokens = " ".join(lines[4:]).split()
    pos = 0

    def take(count):
        nonlocal pos
        if pos + count > len(tokens):
            raise VtkFormatError("file ends early")
        chunk = tokens[pos:pos + count]
        pos += count
        return chunk

    nodes = cells = None
    cell_data, point_data = {}, {}
    section = None
    try:
        while pos < len(tokens):
            key = take(1)[0]
            if key == "POINTS":
                n, _ = take(2)
                nodes = np.array(take(3 * int(n)), dtype=float).reshape(-1, 3)
            elif key == "CELLS":
                m, size = (int(v) for v in take(2))
                raw = np.array(take(size), dtype=np.int64).reshape(m, -1)
                if raw.shape[1] != 9 or np.any(raw[:, 0] != 8):
                    raise VtkFormatError("only 8-node cells are supported")
                cells = raw[:, 1:]
            elif key == "CELL_TYPES":
                m = int(take(1)[0])
                types = np.array(take(m), dtype=int)
                if np.any(types != VTK_HEXAHEDRON):
                    raise VtkFormatError("non-hexahedral cell type")
            elif key in ("CELL_DATA", "POINT_DATA"):
                section = key
                take(1)
            elif key == "SCALARS":
                name, vtype = take(2)
                # optional component count
                if tokens[pos] != "LOOKUP_TABLE":
                    take(1)
                take(2)
                count = len(nodes) if section == "POINT_DATA" else len(cells)
                dtype = float if vtype in ("float", "double") else np.int64
                values = np.array(take(count), dtype=float).astype(dtype)
                (point_data if section == "POINT_DATA" else cell_data)[name] = values
            else:
                raise VtkFormatError(f"unexpected keyword {key!r}")
    except (ValueError, IndexError) as exc:
        raise VtkFormatError(str(exc)) from None

    if nodes is None or cells is None:
        raise VtkFormatError("POINTS or CELLS section missing")
    m = len(cells)
    mesh = HexMesh(
        nodes=nodes,
        cells=cells,
        anatomy_label=cell_data.get("anatomy_label", np.zeros(m, dtype=np.int64)),
        property_label=cell_data.get("property_label", np.ones(m, dtype=np.int64)),
    )
    return mesh, point_data
