"""Query the potential inside named atlas structures.

Anatomy labels stay on the cells after the property map has been
simplified, so results can be read back per structure and per branch
of the hierarchy.
"""
import json
import sys

import numpy as np

import hexatlas as hx

hierarchy = hx.parse_hierarchy(json.dumps({
    "name": "brain",
    "children": [
        {"name": "left_temporal_lobe", "children": [
            {"name": "left_middle_temporal_gyrus", "label": 11},
            {"name": "left_fusiform_gyrus", "label": 12},
            {"name": "left_parahippocampal_gyrus", "label": 14},
        ]},
        {"name": "left_amygdala", "label": 13},
        {"name": "white_matter", "label": 21},
    ],
}))

# slab phantom: four structures side by side along x, white matter behind
n = 24
anat = np.zeros((n, n, n), dtype=np.int64)
anat[2:22, 2:22, 2:22] = 21
for lab, x0 in zip((11, 12, 13, 14), (2, 7, 12, 17)):
    anat[x0:x0 + 5, 2:22, 14:22] = lab
anatomy = hx.LabelVolume((n, n, n), (1.0, 1.0, 1.0), voxels=anat)

# two conductive compartments plus three shells
prop = hx.merge_labels(anatomy, {11, 12, 13, 14}, 1)
prop = hx.merge_labels(prop, {21}, 2)
prop = hx.generate_shells(prop, [(0.0, 3), (1.0, 4), (1.0, 5)])

mesh = hx.voxels_to_hexmesh(anatomy, prop)
sigma = hx.assign_conductivity(mesh, hx.default_conductivity_table())
field = hx.forward_solve(mesh, sigma, hx.DipoleSource((9.5, 12.0, 17.0), (1e-8, 0.0, 0.0)))
print("solve:", field.report())

names = ["left_middle_temporal_gyrus", "left_amygdala",
         "left_parahippocampal_gyrus", "left_fusiform_gyrus", "left_temporal_lobe"]
stats = [hx.region_stats(mesh, field.values, hierarchy, name) for name in names]
sys.stdout.write(hx.report(stats, "csv").decode())
