"""Hexahedral meshes from atlas label maps, with an EEG forward solver."""

from .atlas import (
    AtlasHierarchy,
    ColorTable,
    generate_shells,
    labels_under,
    merge_labels,
    parse_color_table,
    parse_hierarchy,
    remove_labels,
)
from .errors import HexAtlasError, NoConvergence
from .fem import (
    BoundaryConditions,
    DipoleSource,
    FemSystem,
    PotentialField,
    analytic_infinite_dipole,
    assemble,
    dipole_rhs,
    element_stiffness,
    forward_solve,
    solve,
)
from .hexmesh import HexMesh, mesh_stats, scaled_jacobian, scaled_jacobians, voxels_to_hexmesh
from .material import (
    ConductivityTable,
    assign_conductivity,
    default_conductivity_table,
    parse_conductivity_table,
)
from .nrrd_io import LabelVolume, load_nrrd, read_nrrd, save_nrrd, write_nrrd
from .query import RegionStats, region_nodes, region_stats, report
from .vtk import read_vtk_legacy, write_vtk_legacy

__version__ = "0.1.0"
