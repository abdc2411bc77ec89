import itertools
import json

import numpy as np
import pytest

from hexatlas import (
    LabelVolume,
    generate_shells,
    labels_under,
    merge_labels,
    parse_color_table,
    parse_hierarchy,
    remove_labels,
)
from hexatlas.atlas import hierarchy_to_json, shell_iterations
from hexatlas.errors import (
    ChannelOutOfRange,
    DuplicateLabel,
    DuplicateName,
    LabelCollision,
    MalformedJson,
    MalformedLine,
    NegativeLabel,
    UnknownStructure,
)

from conftest import random_volume

TREE = {
    "name": "brain",
    "children": [
        {"name": "left_temporal_lobe", "children": [
            {"name": "left_middle_temporal_gyrus", "label": 2},
            {"name": "left_fusiform_gyrus", "label": 3},
        ]},
        {"name": "left_amygdala", "label": 4},
        {"name": "left_hippocampal_region", "label": 7, "children": [
            {"name": "left_parahippocampal_gyrus", "label": 1},
        ]},
    ],
}


def brute_labels(obj, name):
    def find(node):
        if node["name"] == name:
            return node
        for c in node.get("children", []):
            hit = find(c)
            if hit:
                return hit
        return None

    def collect(node):
        out = {node["label"]} if "label" in node else set()
        for c in node.get("children", []):
            out |= collect(c)
        return out

    return collect(find(obj))


def test_minimal_hierarchy():
    h = parse_hierarchy('{"name":"brain","children":[{"name":"left_amygdala","label":4}]}')
    assert h.root.name == "brain" and h.root.label is None
    assert len(list(h.root.walk())) == 2
    assert h.node("left_amygdala").label == 4


@pytest.mark.parametrize("text, exc", [
    ('{"name":"a","children":[{"name":"a","label":1}]}', DuplicateName),
    ('{"name":"r","children":[{"name":"x","label":1},{"name":"y","label":1}]}', DuplicateLabel),
    ('{"name":"r","children":[{"name":"x","label":-3}]}', NegativeLabel),
    ('{"name":"r", "children": [', MalformedJson),
    ('{"children": []}', MalformedJson),
    ('{"name":"r","label":"4"}', MalformedJson),
    ('[1,2]', MalformedJson),
])
def test_hierarchy_errors(text, exc):
    with pytest.raises(exc):
        parse_hierarchy(text)


def test_labels_under():
    h = parse_hierarchy(json.dumps(TREE))
    assert labels_under(h, "left_amygdala") == {4}
    assert labels_under(h, "left_temporal_lobe") == {2, 3}
    assert labels_under(h, "left_hippocampal_region") == {1, 7}
    for name in h.names:
        assert labels_under(h, name) == brute_labels(TREE, name)
    assert labels_under(h, "brain") == {1, 2, 3, 4, 7}
    with pytest.raises(UnknownStructure):
        labels_under(h, "nonexistent")


def test_hierarchy_json_round_trip():
    h = parse_hierarchy(json.dumps(TREE))
    assert parse_hierarchy(hierarchy_to_json(h)) == h


def test_random_trees_labels_under(rng):
    for case in range(20):
        nodes = [{"name": "root", "children": []}]
        labels = rng.permutation(np.arange(1, 60))[: 25].tolist()
        for i in range(25):
            parent = nodes[int(rng.integers(len(nodes)))]
            node = {"name": f"s{case}_{i}", "children": []}
            if rng.random() < 0.7:
                node["label"] = labels[i]
            parent["children"].append(node)
            nodes.append(node)
        h = parse_hierarchy(json.dumps(nodes[0]))
        for n in nodes:
            assert labels_under(h, n["name"]) == brute_labels(nodes[0], n["name"])


def test_color_table():
    t = parse_color_table("2 left_middle_temporal_gyrus 128 64 200 255")
    assert t.entries[2].name == "left_middle_temporal_gyrus"
    assert t.entries[2].rgba == (128, 64, 200, 255)
    assert t.label_of("left_middle_temporal_gyrus") == 2
    assert len(parse_color_table("# comment\n\n")) == 0


@pytest.mark.parametrize("text, exc", [
    ("5 a 1 2 3 4\n5 b 1 2 3 4", DuplicateLabel),
    ("5 a 1 2 3", MalformedLine),
    ("x a 1 2 3 4", MalformedLine),
    ("5 a 1 2 3 256", ChannelOutOfRange),
    ("5 a -1 2 3 4", ChannelOutOfRange),
])
def test_color_table_errors(text, exc):
    with pytest.raises(exc):
        parse_color_table(text)


def vol_of(values):
    return LabelVolume((len(values), 1, 1), (1, 1, 1), voxels=values)


def test_merge_examples():
    assert merge_labels(vol_of([1, 2, 3, 2]), {2, 3}, 2).voxels.tolist() == [1, 2, 2, 2]
    v = vol_of([1, 2, 3, 2])
    assert merge_labels(v, set(), 9) == v


def test_remove_examples():
    assert remove_labels(vol_of([1, 2, 1]), {1}).voxels.tolist() == [0, 2, 0]
    v = vol_of([1, 2, 1])
    assert remove_labels(v, {5}) == v


def test_merge_does_not_mutate():
    v = vol_of([1, 2, 3])
    merge_labels(v, {1}, 3)
    assert v.voxels.tolist() == [1, 2, 3]


def count(vol, label):
    return sum(1 for x in vol.voxels.tolist() if x == label)


def test_merge_remove_histograms(rng):
    for _ in range(30):
        v = random_volume(rng, max_dim=8, n_labels=6)
        source = set(rng.choice(np.arange(1, 8), size=int(rng.integers(0, 4)), replace=False).tolist())
        target = int(rng.integers(1, 8))
        out = merge_labels(v, source, target)
        assert count(out, target) == sum(count(v, lab) for lab in source | {target})
        assert out.dims == v.dims and out.same_grid(v)
        assert merge_labels(out, source, target) == out
        gone = remove_labels(out, {target})
        assert count(gone, 0) == count(v, 0) + sum(count(v, lab) for lab in source | {target})


def brute_dilate(mask):
    nx, ny, nz = mask.shape
    out = mask.copy()
    for i, j, k in itertools.product(range(nx), range(ny), range(nz)):
        if mask[i, j, k]:
            continue
        for di, dj, dk in [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]:
            a, b, c = i + di, j + dj, k + dk
            if 0 <= a < nx and 0 <= b < ny and 0 <= c < nz and mask[a, b, c]:
                out[i, j, k] = True
                break
    return out


def brute_shells(vol, shells):
    labels = vol.array.copy()
    mask = labels != 0
    for thickness, lab in shells:
        for _ in range(shell_iterations(thickness, vol.spacing)):
            grown = brute_dilate(mask)
            labels[grown & ~mask] = lab
            mask = grown
    return labels


def test_single_voxel_shell():
    vox = np.zeros((5, 5, 5), dtype=int)
    vox[2, 2, 2] = 1
    vol = LabelVolume((5, 5, 5), (1, 1, 1), voxels=vox)
    out = generate_shells(vol, [(1.0, 9)]).array
    nine = {tuple(p) for p in np.argwhere(out == 9)}
    assert nine == {(1, 2, 2), (3, 2, 2), (2, 1, 2), (2, 3, 2), (2, 2, 1), (2, 2, 3)}
    assert out[2, 2, 2] == 1


def test_zero_thickness_is_identity():
    vox = np.zeros((3, 3, 3), dtype=int)
    vox[1, 1, 1] = 2
    vol = LabelVolume((3, 3, 3), (1, 1, 1), voxels=vox)
    assert generate_shells(vol, [(0.0, 9)]) == vol


def test_shell_label_collision():
    with pytest.raises(LabelCollision):
        generate_shells(vol_of([0, 1, 0]), [(1.0, 1)])


def test_shell_iterations_rounding():
    assert shell_iterations(0.7, (0.1, 0.1, 0.1)) == 7
    assert shell_iterations(1.0, (1.0, 0.5, 2.0)) == 2
    assert shell_iterations(2.5, (1.0, 1.0, 1.0)) == 3


def test_shells_nested_and_disjoint(rng):
    for _ in range(10):
        v = random_volume(rng, max_dim=7, n_labels=3, fill=0.1)
        out = generate_shells(v, [(1.0, 9), (1.0, 8)])
        np.testing.assert_array_equal(out.array, brute_shells(v, [(1.0, 9), (1.0, 8)]))
        base = v.voxels != 0
        assert not np.any((out.voxels == 8) & (out.voxels == 9))
        assert not np.any((out.voxels == 8) & base)
        np.testing.assert_array_equal(out.voxels[base], v.voxels[base])


def test_shell_clipped_at_boundary():
    out = generate_shells(vol_of([1, 0, 0]), [(5.0, 4)])
    assert out.voxels.tolist() == [1, 4, 4]
