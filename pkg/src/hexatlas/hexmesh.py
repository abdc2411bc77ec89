"""Voxel-to-hexahedron meshing with anatomy and property label channels.

Every voxel with a non-zero property label becomes one 8-node hexahedron.
Corner nodes are shared between neighbouring voxels and numbered in ascending
lattice order, so the mesh is a deterministic function of its input volumes.
Corner ordering inside a cell follows VTK_HEXAHEDRON.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDomain, GridMismatch, UncoveredAnatomy

# (di, dj, dk) of the 8 corners, VTK order
HEX_CORNERS = np.array([
    [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
    [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1],
])

# for each corner, its three edge neighbours forming a right-handed triple
CORNER_NEIGHBOURS = np.array([
    [1, 3, 4], [2, 0, 5], [3, 1, 6], [0, 2, 7],
    [7, 5, 0], [4, 6, 1], [5, 7, 2], [6, 4, 3],
])

_CHUNK = 100_000


@dataclass(frozen=True, eq=False)
class HexMesh:
    """Unstructured hexahedral mesh built from a label volume.

    ``cell_voxel`` holds the flat (x-fastest) source voxel index of each cell,
    which is what ties every element back to the atlas.
    """

    nodes: np.ndarray
    cells: np.ndarray
    anatomy_label: np.ndarray
    property_label: np.ndarray
    cell_voxel: np.ndarray = None
    dims: tuple = None
    spacing: tuple = None
    origin: tuple = None
    direction: np.ndarray = None
    _lattice_ids: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("nodes", "cells", "anatomy_label", "property_label",
                     "cell_voxel", "_lattice_ids"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def has_lattice(self):
        return self.dims is not None

    def corner_coords(self, cell_index):
        return self.nodes[self.cells[cell_index]]

    def cell_of_voxel(self, i, j, k):
        """Cell index for voxel (i, j, k), or -1 if that voxel is not meshed."""
        nx, ny, nz = self.dims
        if not (0 <= i < nx and 0 <= j < ny and 0 <= k < nz):
            return -1
        flat = i + nx * (j + ny * k)
        pos = np.searchsorted(self.cell_voxel, flat)
        if pos < len(self.cell_voxel) and self.cell_voxel[pos] == flat:
            return int(pos)
        return -1

    def to_logical(self, point):
        """Continuous voxel-lattice coordinates of a physical point (mm)."""
        rel = np.asarray(point, dtype=float) - np.asarray(self.origin)
        return np.linalg.solve(np.asarray(self.direction), rel) / np.asarray(self.spacing)


def lattice_to_physical(ijk, spacing, origin, direction):
    ijk = np.asarray(ijk, dtype=float)
    return np.asarray(origin) + (ijk * np.asarray(spacing)) @ np.asarray(direction).T


def voxels_to_hexmesh(anatomy, property):
    """Mesh every voxel of ``property`` that is non-zero.

    Parameters
    ----------
    anatomy, property : LabelVolume
        Must share one grid.  ``anatomy`` may be 0 inside the domain but must
        not be labelled where ``property`` is 0.

    Returns
    -------
    HexMesh
    """
    if not anatomy.same_grid(property):
        raise GridMismatch("anatomy and property volumes are on different grids")
    anat = anatomy.voxels
    prop = property.voxels
    uncovered = (anat != 0) & (prop == 0)
    if uncovered.any():
        raise UncoveredAnatomy(
            f"{int(uncovered.sum())} anatomically labelled voxels have no property label"
        )
    cell_voxel = np.flatnonzero(prop)
    if cell_voxel.size == 0:
        raise EmptyDomain("property volume has no non-zero voxels")

    nx, ny, nz = anatomy.dims
    i = cell_voxel % nx
    j = (cell_voxel // nx) % ny
    k = cell_voxel // (nx * ny)
    px, py = nx + 1, ny + 1
    corner_ids = ((i[:, None] + HEX_CORNERS[:, 0])
                  + px * ((j[:, None] + HEX_CORNERS[:, 1])
                          + py * (k[:, None] + HEX_CORNERS[:, 2])))
    lattice_ids, cells = np.unique(corner_ids, return_inverse=True)
    cells = cells.reshape(-1, 8)

    li = lattice_ids % px
    lj = (lattice_ids // px) % py
    lk = lattice_ids // (px * py)
    nodes = lattice_to_physical(np.column_stack([li, lj, lk]),
                                anatomy.spacing, anatomy.origin, anatomy.direction)

    return HexMesh(
        nodes=nodes,
        cells=cells.astype(np.int64),
        anatomy_label=anat[cell_voxel].copy(),
        property_label=prop[cell_voxel].copy(),
        cell_voxel=cell_voxel,
        dims=anatomy.dims,
        spacing=anatomy.spacing,
        origin=anatomy.origin,
        direction=np.array(anatomy.direction),
        _lattice_ids=lattice_ids,
    )


def scaled_jacobians(mesh):
    """Scaled Jacobian of every cell.

    At each corner the three outgoing edges are normalised and their triple
    product taken; the cell value is the minimum over its corners.  A cube
    scores 1; values <= 0 mean the element is inverted.
    """
    out = np.empty(mesh.n_cells)
    for start in range(0, mesh.n_cells, _CHUNK):
        xyz = mesh.nodes[mesh.cells[start:start + _CHUNK]]   # (m, 8, 3)
        edges = xyz[:, CORNER_NEIGHBOURS, :] - xyz[:, :, None, :]
        lengths = np.linalg.norm(edges, axis=-1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = edges / lengths
        # rows of each 3x3 block are the corner's edges
        dets = np.nan_to_num(np.linalg.det(unit), nan=0.0)
        out[start:start + _CHUNK] = dets.min(axis=1)
    return out


def scaled_jacobian(mesh, cell_index):
    if not 0 <= cell_index < mesh.n_cells:
        raise IndexError(f"cell {cell_index} out of range")
    sub = HexMesh(mesh.nodes, mesh.cells[cell_index:cell_index + 1],
                  mesh.anatomy_label[cell_index:cell_index + 1],
                  mesh.property_label[cell_index:cell_index + 1])
    return float(scaled_jacobians(sub)[0])


def mesh_stats(mesh):
    """Summary dictionary: counts, bounding box, quality, label histograms."""
    sj = scaled_jacobians(mesh)

    def hist(arr):
        values, counts = np.unique(arr, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts)}

    return {
        "cells": int(mesh.n_cells),
        "nodes": int(mesh.n_nodes),
        "bbox_min": mesh.nodes.min(axis=0).tolist(),
        "bbox_max": mesh.nodes.max(axis=0).tolist(),
        "scaled_jacobian_min": float(sj.min()),
        "scaled_jacobian_mean": float(sj.mean()),
        "inverted_cells": int((sj <= 0).sum()),
        "anatomy_label_counts": hist(mesh.anatomy_label),
        "property_label_counts": hist(mesh.property_label),
    }
