"""Command line front end: ``hexatlas info|edit|mesh|solve|query|run-all``.

Every command except ``info`` reads a JSON run configuration::

    {
      "paths": {"anatomy": "anatomy.nrrd", "property": "property.nrrd",
                "hierarchy": "hierarchy.json", "color_table": "colors.txt",
                "conductivity": "conductivity.json"},
      "edit": {"input": "anatomy.nrrd", "encoding": "gzip",
               "script": [{"op": "merge", "structures": ["cortex"], "target": 1},
                          {"op": "remove", "labels": [17]},
                          {"op": "shells", "shells": [[1.0, 3], [2.0, 4]]}]},
      "dipole": {"position": [10, 20, 30], "moment": [0, 0, 1e-8], "separation": null},
      "solver": {"tol": 1e-8, "maxit": null},
      "query": {"structures": ["left_amygdala"], "format": "csv"},
      "outputs": {"property": "property.nrrd", "mesh_vtk": "mesh.vtk",
                  "mesh_stats": "mesh_stats.json", "field_vtk": "field.vtk",
                  "solve_report": "solve.json", "report": "report.csv"}
    }

Relative paths resolve against the configuration file's directory.  Exit
status is 0 on success, 1 when the solver fails to converge and 2 for any
input or validation error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import atlas, fem, hexmesh, material, nrrd_io, query, vtk
from .errors import HexAtlasError, NoConvergence, UnknownStructure

log = logging.getLogger("hexatlas")

EXIT_OK, EXIT_NO_CONVERGENCE, EXIT_INPUT = 0, 1, 2


class ConfigError(HexAtlasError):
    pass


class RunConfig:
    """Thin accessor over the JSON configuration with path resolution."""

    def __init__(self, data, base_dir="."):
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        self.data = data
        self.base = Path(base_dir)

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return cls(data, path.parent)

    def section(self, name):
        value = self.data.get(name, {})
        if not isinstance(value, dict):
            raise ConfigError(f"'{name}' must be an object")
        return value

    def path(self, section, key, required=True):
        value = self.section(section).get(key)
        if value is None:
            if required:
                raise ConfigError(f"missing '{section}.{key}' in configuration")
            return None
        return self.base / value

    def property_path(self):
        return self.path("paths", "property", required=False) or self.path("outputs", "property")

    def hierarchy(self):
        p = self.path("paths", "hierarchy", required=False)
        return atlas.parse_hierarchy(p.read_text()) if p else None

    def color_table(self):
        p = self.path("paths", "color_table", required=False)
        return atlas.parse_color_table(p.read_text()) if p else None

    def conductivity(self):
        p = self.path("paths", "conductivity", required=False)
        if p is None:
            return material.default_conductivity_table()
        return material.parse_conductivity_table(p.read_text())

    def dipole(self):
        d = self.section("dipole")
        try:
            return fem.DipoleSource(tuple(float(v) for v in d["position"]),
                                    tuple(float(v) for v in d.get("moment", (0.0, 0.0, 1e-8))),
                                    d.get("separation"))
        except (KeyError, TypeError, ValueError):
            raise ConfigError("'dipole' needs a 3-vector 'position' (mm)") from None

    def solver(self):
        s = self.section("solver")
        return float(s.get("tol", 1e-8)), s.get("maxit")


def _resolve_labels(directive, hierarchy, colors):
    labels = set(int(v) for v in directive.get("labels", []))
    for name in directive.get("structures", []):
        if hierarchy is not None and name in hierarchy:
            labels |= atlas.labels_under(hierarchy, name)
        elif colors is not None:
            labels.add(colors.label_of(name))
        else:
            raise UnknownStructure(f"no structure named {name!r}")
    labels.discard(0)
    return labels


def apply_edit_script(vol, script, hierarchy=None, colors=None):
    """Run merge/remove/shells directives in order."""
    for step in script:
        op = step.get("op")
        if op == "merge":
            vol = atlas.merge_labels(vol, _resolve_labels(step, hierarchy, colors), int(step["target"]))
        elif op == "remove":
            vol = atlas.remove_labels(vol, _resolve_labels(step, hierarchy, colors))
        elif op == "shells":
            vol = atlas.generate_shells(vol, [(float(t), int(lab)) for t, lab in step["shells"]])
        else:
            raise ConfigError(f"unknown edit op {op!r}")
    return vol


def build_mesh(cfg):
    anatomy = nrrd_io.load_nrrd(cfg.path("paths", "anatomy"))
    prop = nrrd_io.load_nrrd(cfg.property_path())
    return hexmesh.voxels_to_hexmesh(anatomy, prop)


def _write(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)
    log.info("wrote %s", path)


def cmd_info(args):
    vol = nrrd_io.load_nrrd(args.volume)
    colors = atlas.parse_color_table(Path(args.color_table).read_text()) if args.color_table else None
    lines = [
        "dims: " + "x".join(str(n) for n in vol.dims),
        "spacing: " + " ".join(f"{s:g}" for s in vol.spacing),
        "origin: " + " ".join(f"{o:g}" for o in vol.origin),
        "labels:",
    ]
    for label, count in vol.histogram().items():
        name = colors.name(label) if colors else None
        lines.append(f"  {label}: {count}" + (f" {name}" if name else ""))
    text = "\n".join(lines) + "\n"
    if args.output:
        _write(args.output, text.encode())
    else:
        sys.stdout.write(text)


def cmd_edit(args, cfg):
    section = cfg.section("edit")
    src = cfg.path("edit", "input", required=False) or cfg.path("paths", "anatomy")
    vol = nrrd_io.load_nrrd(src)
    vol = apply_edit_script(vol, section.get("script", []), cfg.hierarchy(), cfg.color_table())
    out = args.output or cfg.path("outputs", "property")
    _write(out, nrrd_io.write_nrrd(vol, section.get("encoding", "gzip")))


def cmd_mesh(args, cfg):
    mesh = build_mesh(cfg)
    out = args.output or cfg.path("outputs", "mesh_vtk")
    _write(out, vtk.write_vtk_legacy(mesh))
    stats_path = cfg.path("outputs", "mesh_stats", required=False) or Path(out).with_suffix(".stats.json")
    _write(stats_path, json.dumps(hexmesh.mesh_stats(mesh), indent=2).encode())


def cmd_solve(args, cfg):
    mesh = build_mesh(cfg)
    sigma = material.assign_conductivity(mesh, cfg.conductivity())
    tol, maxit = cfg.solver()
    field = fem.forward_solve(mesh, sigma, cfg.dipole(), tol, maxit)
    out = args.output or cfg.path("outputs", "field_vtk")
    _write(out, vtk.write_vtk_legacy(mesh, ("potential", field.values)))
    report = field.report()
    report["tolerance"] = tol
    report_path = cfg.path("outputs", "solve_report", required=False) or Path(out).with_suffix(".solve.json")
    _write(report_path, json.dumps(report, indent=2).encode())
    log.info("converged in %d iterations (relative residual %.2e)", field.iterations, field.residual)


def cmd_query(args, cfg):
    mesh = build_mesh(cfg)
    field_path = cfg.path("paths", "field", required=False) or cfg.path("outputs", "field_vtk")
    field_mesh, point_data = vtk.read_vtk_legacy(field_path.read_bytes())
    if "potential" not in point_data:
        raise ConfigError("field file has no 'potential' point array")
    if field_mesh.n_nodes != mesh.n_nodes or not np.array_equal(field_mesh.cells, mesh.cells):
        raise ConfigError("field file does not match the mesh built from the configured volumes")
    hierarchy = cfg.hierarchy()
    if hierarchy is None:
        raise ConfigError("querying needs 'paths.hierarchy'")
    q = cfg.section("query")
    stats = [query.region_stats(mesh, point_data["potential"], hierarchy, name)
             for name in q.get("structures", [])]
    fmt = q.get("format", "csv")
    out = args.output or cfg.path("outputs", "report")
    _write(out, query.report(stats, fmt))


def cmd_run_all(args, cfg):
    args.output = None
    if cfg.section("edit").get("script") is not None:
        cmd_edit(args, cfg)
    cmd_mesh(args, cfg)
    cmd_solve(args, cfg)
    if cfg.section("query").get("structures"):
        cmd_query(args, cfg)


COMMANDS = {
    "edit": cmd_edit,
    "mesh": cmd_mesh,
    "solve": cmd_solve,
    "query": cmd_query,
    "run-all": cmd_run_all,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="hexatlas", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    info = sub.add_parser("info", help="summarise a label volume")
    info.add_argument("volume")
    info.add_argument("--color-table")
    info.add_argument("--output")
    helps = {
        "edit": "apply the edit script and write the property volume",
        "mesh": "write the hexahedral mesh (VTK) and its statistics (JSON)",
        "solve": "solve the dipole forward problem and write the potential field",
        "query": "report potential statistics per atlas structure",
        "run-all": "edit, mesh, solve and query in one go",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", required=True)
        p.add_argument("--output", help="override the command's primary output path")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "info":
            cmd_info(args)
        else:
            COMMANDS[args.command](args, RunConfig.load(args.config))
    except NoConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except (ValueError, OSError, KeyError, TypeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
