"""Build a layered head model from a label map and mesh it.

A sphere of "brain" voxels gets CSF, skull and scalp grown around it,
then every conductive voxel becomes one hexahedron.  Files land in
demos/out/.
"""
from pathlib import Path

import numpy as np

import hexatlas as hx

out = Path(__file__).with_name("out")
out.mkdir(exist_ok=True)

# 40 mm cube at 1 mm, two tissues: gray matter outside, white matter inside
n = 40
ijk = np.indices((n, n, n)).transpose(1, 2, 3, 0) + 0.5
r = np.linalg.norm(ijk - n / 2, axis=-1)
labels = np.zeros((n, n, n), dtype=np.int64)
labels[r < 13] = 1
labels[r < 9] = 2

anatomy = hx.LabelVolume((n, n, n), (1.0, 1.0, 1.0), (-20.0, -20.0, -20.0), np.eye(3), labels)
print("anatomy histogram:", anatomy.histogram())

# csf 1 mm, skull 2 mm, scalp 3 mm, matching the default conductivity labels 3, 4, 5
head = hx.generate_shells(anatomy, [(1.0, 3), (2.0, 4), (3.0, 5)])
print("with shells:      ", head.histogram())
hx.save_nrrd(head, out / "head.nrrd")

mesh = hx.voxels_to_hexmesh(anatomy, head)
stats = hx.mesh_stats(mesh)
print(f"{stats['cells']} cells, {stats['nodes']} nodes, "
      f"scaled Jacobian min {stats['scaled_jacobian_min']:.3f}")

(out / "head_mesh.vtk").write_bytes(hx.write_vtk_legacy(mesh))
print("wrote", out / "head_mesh.vtk")
