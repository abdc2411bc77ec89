"""Atlas structure hierarchy, colour table and label-map editing.

The hierarchy JSON accepted here is a plain tree::

    {"name": "brain", "children": [{"name": "left_amygdala", "label": 4}]}

Editing operations never modify their input volume; each returns a new
:class:`~hexatlas.nrrd_io.LabelVolume` on the same grid.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import (
    ChannelOutOfRange,
    DuplicateLabel,
    DuplicateName,
    LabelCollision,
    MalformedJson,
    MalformedLine,
    NegativeLabel,
    UnknownStructure,
)


@dataclass(frozen=True)
class HierarchyNode:
    name: str
    label: int | None = None
    children: tuple = ()

    def walk(self):
        """Yield this node and every descendant, depth first."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))


@dataclass(frozen=True)
class AtlasHierarchy:
    root: HierarchyNode
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {}
        owner = {}
        for node in self.root.walk():
            if node.name in index:
                raise DuplicateName(f"structure name {node.name!r} appears twice")
            index[node.name] = node
            if node.label is not None:
                if node.label < 0:
                    raise NegativeLabel(f"structure {node.name!r} has label {node.label}")
                if node.label in owner:
                    raise DuplicateLabel(
                        f"label {node.label} on both {owner[node.label]!r} and {node.name!r}"
                    )
                owner[node.label] = node.name
        object.__setattr__(self, "_index", index)

    def __contains__(self, name):
        return name in self._index

    def node(self, name):
        try:
            return self._index[name]
        except KeyError:
            raise UnknownStructure(f"no structure named {name!r}") from None

    @property
    def names(self):
        return list(self._index)

    def name_of(self, label):
        """Structure name carrying ``label``, or None."""
        for node in self._index.values():
            if node.label == label:
                return node.name
        return None


def _build_node(obj, path="root"):
    if not isinstance(obj, dict):
        raise MalformedJson(f"{path}: expected an object")
    name = obj.get("name")
    if not isinstance(name, str) or not name:
        raise MalformedJson(f"{path}: 'name' must be a non-empty string")
    label = obj.get("label")
    if label is not None:
        if isinstance(label, bool) or not isinstance(label, int):
            raise MalformedJson(f"{path}: 'label' must be an integer")
        if label < 0:
            raise NegativeLabel(f"structure {name!r} has label {label}")
    children = obj.get("children", [])
    if not isinstance(children, list):
        raise MalformedJson(f"{path}: 'children' must be an array")
    kids = tuple(_build_node(c, f"{path}/{name}[{i}]") for i, c in enumerate(children))
    return HierarchyNode(name, label, kids)


def parse_hierarchy(json_text):
    """Build an :class:`AtlasHierarchy` from its JSON text.

    Names must be unique across the whole tree and each label may appear on
    only one node.
    """
    try:
        obj = json.loads(json_text)
    except (json.JSONDecodeError, TypeError) as exc:
        raise MalformedJson(str(exc)) from None
    root = _build_node(obj)
    return AtlasHierarchy(root)


def hierarchy_to_json(h):
    def dump(node):
        out = {"name": node.name}
        if node.label is not None:
            out["label"] = node.label
        if node.children:
            out["children"] = [dump(c) for c in node.children]
        return out

    return json.dumps(dump(h.root), indent=2)


def labels_under(h, structure_name):
    """Labels on the named structure and all of its descendants."""
    node = h.node(structure_name)
    return frozenset(n.label for n in node.walk() if n.label is not None)


@dataclass(frozen=True)
class ColorEntry:
    name: str
    rgba: tuple


@dataclass(frozen=True)
class ColorTable:
    entries: dict

    def name(self, label):
        entry = self.entries.get(label)
        return entry.name if entry else None

    def label_of(self, name):
        for label, entry in self.entries.items():
            if entry.name == name:
                return label
        raise UnknownStructure(f"no colour-table entry named {name!r}")

    def __len__(self):
        return len(self.entries)


def parse_color_table(text):
    """Parse Slicer-style ``id name R G B A`` lines."""
    entries = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        if len(parts) != 6:
            raise MalformedLine(f"line {lineno}: expected 6 fields, got {len(parts)}")
        try:
            label = int(parts[0])
            rgba = tuple(int(p) for p in parts[2:])
        except ValueError:
            raise MalformedLine(f"line {lineno}: non-integer id or channel") from None
        if label < 0:
            raise MalformedLine(f"line {lineno}: negative label {label}")
        if any(c < 0 or c > 255 for c in rgba):
            raise ChannelOutOfRange(f"line {lineno}: channel outside [0, 255]")
        if label in entries:
            raise DuplicateLabel(f"line {lineno}: label {label} already defined")
        entries[label] = ColorEntry(parts[1], rgba)
    return ColorTable(entries)


def format_color_table(table):
    lines = ["# label name R G B A"]
    for label in sorted(table.entries):
        e = table.entries[label]
        lines.append(f"{label} {e.name} " + " ".join(str(c) for c in e.rgba))
    return "\n".join(lines) + "\n"


def _as_label_array(labels):
    arr = np.array(sorted(int(v) for v in labels), dtype=np.int64)
    if arr.size and arr[0] <= 0:
        raise ValueError("label sets may only hold positive labels")
    return arr


def merge_labels(vol, source, target):
    """Relabel every voxel whose label is in ``source`` to ``target``."""
    if int(target) <= 0:
        raise ValueError(f"merge target must be positive, got {target}")
    src = _as_label_array(source)
    if src.size == 0:
        return vol.with_voxels(vol.voxels)
    out = np.where(np.isin(vol.voxels, src), int(target), vol.voxels)
    return vol.with_voxels(out)


def remove_labels(vol, victims):
    """Set voxels carrying any of ``victims`` to background (0)."""
    v = _as_label_array(victims)
    out = np.where(np.isin(vol.voxels, v), 0, vol.voxels)
    return vol.with_voxels(out)


SIX_CONNECTED = ndimage.generate_binary_structure(3, 1)


def shell_iterations(thickness, spacing):
    """Dilation steps needed so a shell is at least ``thickness`` mm thick."""
    if thickness < 0:
        raise ValueError(f"shell thickness must be >= 0, got {thickness}")
    # small slack so that e.g. 0.7 mm / 0.1 mm does not round up to 8
    return max(0, math.ceil(thickness / min(spacing) - 1e-9))


def generate_shells(vol, shells):
    """Grow nested layers (CSF, skull, scalp, ...) around the labelled region.

    Parameters
    ----------
    vol : LabelVolume
    shells : sequence of (thickness_mm, new_label)
        Applied in order; each layer is produced by 6-connected dilation of
        everything labelled so far and only claims background voxels.
    """
    present = set(np.unique(vol.voxels).tolist())
    new_labels = [int(lab) for _, lab in shells]
    for lab in new_labels:
        if lab <= 0:
            raise ValueError(f"shell label must be positive, got {lab}")
        if lab in present:
            raise LabelCollision(f"shell label {lab} already present in the volume")
    if len(set(new_labels)) != len(new_labels):
        raise LabelCollision("shell labels must be distinct")

    labels = vol.array.copy()
    mask = labels != 0
    for thickness, lab in shells:
        n = shell_iterations(thickness, vol.spacing)
        if n == 0:
            continue
        grown = ndimage.binary_dilation(mask, structure=SIX_CONNECTED, iterations=n)
        labels[grown & ~mask] = lab
        mask = grown
    return vol.with_voxels(labels)
