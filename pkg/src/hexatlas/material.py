"""Tissue conductivities keyed by property label.

The bundled default (``data/conductivity_default.json``) holds the five
compartments of the standard head model: gray matter, white matter, CSF,
skull and scalp.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import DuplicateLabel, MalformedJson, NonPositiveSigma, UnmappedLabel


@dataclass(frozen=True)
class Compartment:
    name: str
    sigma: float  # S/m


@dataclass(frozen=True)
class ConductivityTable:
    entries: dict

    def sigma(self, label):
        return self.entries[label].sigma

    def __len__(self):
        return len(self.entries)

    def to_json(self):
        return json.dumps(
            {str(k): {"name": v.name, "sigma": v.sigma} for k, v in sorted(self.entries.items())},
            indent=2,
        )


def _pairs_no_dupes(pairs):
    seen = {}
    for key, value in pairs:
        if key in seen:
            raise DuplicateLabel(f"key {key!r} appears twice")
        seen[key] = value
    return seen


def parse_conductivity_table(text):
    """Parse ``{"<label>": {"name": ..., "sigma": ...}, ...}``."""
    try:
        obj = json.loads(text, object_pairs_hook=_pairs_no_dupes)
    except json.JSONDecodeError as exc:
        raise MalformedJson(str(exc)) from None
    if not isinstance(obj, dict):
        raise MalformedJson("conductivity table must be a JSON object")
    entries = {}
    for key, value in obj.items():
        try:
            label = int(key)
        except ValueError:
            raise MalformedJson(f"label key {key!r} is not an integer") from None
        if label <= 0:
            raise MalformedJson(f"property labels must be positive, got {label}")
        if label in entries:
            raise DuplicateLabel(f"label {label} appears twice")
        if not isinstance(value, dict) or "sigma" not in value:
            raise MalformedJson(f"entry {key!r} needs a 'sigma'")
        sigma = value["sigma"]
        if isinstance(sigma, bool) or not isinstance(sigma, (int, float)):
            raise MalformedJson(f"entry {key!r}: sigma must be a number")
        if not sigma > 0 or not np.isfinite(sigma):
            raise NonPositiveSigma(f"label {label}: sigma {sigma} must be positive")
        entries[label] = Compartment(str(value.get("name", f"label_{label}")), float(sigma))
    return ConductivityTable(entries)


def default_conductivity_table():
    text = resources.files("hexatlas").joinpath("data/conductivity_default.json").read_text()
    return parse_conductivity_table(text)


def assign_conductivity(mesh, table):
    """Per-cell conductivity (S/m) looked up from the cell property labels."""
    labels = np.asarray(mesh.property_label)
    present = np.unique(labels)
    missing = [int(v) for v in present if int(v) not in table.entries]
    if missing:
        raise UnmappedLabel(missing)
    lut = {int(v): table.entries[int(v)].sigma for v in present}
    keys = np.array(sorted(lut))
    values = np.array([lut[k] for k in keys])
    return values[np.searchsorted(keys, labels)] if labels.size else np.zeros(0)
