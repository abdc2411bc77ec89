"""Per-structure statistics of a nodal field.

A structure's region is every node touching at least one cell whose anatomy
label lies under that structure in the atlas hierarchy.  Nodes on the
interface between two structures belong to both.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass

import numpy as np

from .atlas import labels_under
from .errors import EmptyRegion, FieldLengthMismatch

CSV_HEADER = ("structure", "node_count", "max_uV", "mean_uV", "min_uV")


@dataclass(frozen=True)
class RegionStats:
    structure_name: str
    labels: frozenset
    node_count: int
    max: float
    mean: float
    min: float


def region_nodes(mesh, labels):
    """Sorted node ids incident to cells whose anatomy label is in ``labels``."""
    wanted = np.fromiter((int(v) for v in labels), dtype=np.int64)
    if wanted.size == 0:
        return np.zeros(0, dtype=np.int64)
    mask = np.isin(mesh.anatomy_label, wanted)
    return np.unique(mesh.cells[mask])


def stats_for_labels(mesh, values, labels, name=""):
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.n_nodes,):
        raise FieldLengthMismatch(f"field has {values.size} values, mesh has {mesh.n_nodes} nodes")
    nodes = region_nodes(mesh, labels)
    if nodes.size == 0:
        raise EmptyRegion(f"structure {name or sorted(labels)!r} has no cells in this mesh")
    sel = values[nodes]
    mean = float(np.mean(sel))
    # keep min <= mean <= max when all values are equal up to rounding
    lo, hi = float(sel.min()), float(sel.max())
    return RegionStats(name, frozenset(int(v) for v in labels), int(nodes.size),
                       hi, min(max(mean, lo), hi), lo)


def region_stats(mesh, field, hierarchy, structure_name):
    """Max, mean and min of ``field`` over one atlas structure and its children.

    ``field`` is a :class:`~hexatlas.fem.PotentialField` or a plain nodal array
    in microvolts.
    """
    labels = labels_under(hierarchy, structure_name)
    values = getattr(field, "values", field)
    return stats_for_labels(mesh, values, labels, structure_name)


def report(stats, format="csv"):
    """Serialise a list of :class:`RegionStats` as CSV or JSON bytes."""
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for s in stats:
            writer.writerow([s.structure_name, s.node_count, repr(s.max), repr(s.mean), repr(s.min)])
        return buf.getvalue().encode("ascii")
    if format == "json":
        rows = []
        for s in stats:
            row = asdict(s)
            row["labels"] = sorted(s.labels)
            rows.append(row)
        return json.dumps(rows, indent=2).encode("ascii")
    raise ValueError(f"unknown report format {format!r}")


def parse_report(data, format="csv"):
    """Inverse of :func:`report`."""
    text = data.decode("ascii") if isinstance(data, bytes) else data
    if format == "json":
        return [RegionStats(r["structure_name"], frozenset(r.get("labels", ())), r["node_count"],
                            r["max"], r["mean"], r["min"]) for r in json.loads(text)]
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError("missing report header")
    return [RegionStats(r[0], frozenset(), int(r[1]), float(r[2]), float(r[3]), float(r[4]))
            for r in rows[1:]]
