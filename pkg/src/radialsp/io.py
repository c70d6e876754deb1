"""Schema-versioned CSV persistence and run manifests.

Every output file starts with a header line ``# schema=<name>@<semver>``
followed by the column names; float64 columns carry 17 significant digits
so re-runs with identical inputs are byte-identical.  Complex data is
stored as paired re/im columns.
"""

from __future__ import annotations

import hashlib
import json
import platform
import time
from pathlib import Path

import numpy as np

from .errors import SchemaError

SCHEMAS = {
    "branch": ("branch", "1.0.0",
               ["branch", "gamma", "E", "mass", "n_nodes", "residual"]),
    "profile": ("profile", "1.0.0", ["r", "u", "v", "w", "z", "m"]),
    "linear-eigs": ("linear-eigs", "1.0.0",
                    ["j", "eigenvalue", "E", "rayleigh_defect"]),
    "spectrum": ("spectrum", "1.0.0", ["operator", "re", "im"]),
    "trace": ("trace", "1.0.0", ["t", "mass", "energy", "boundary_mag"]),
    "transition": ("transition", "1.0.0",
                   ["branch", "E", "mass", "sigma_max", "n_quartets",
                    "unstable_bound"]),
    "snapshots": ("snapshots", "1.0.0", None),  # first column t, then radii
    "rescale": ("rescale", "1.0.0", ["E", "mass", "log_E", "log_mass"]),
}


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path, schema: str, columns, rows) -> Path:
    name, version, canonical = SCHEMAS[schema]
    if canonical is not None and list(columns) != canonical:
        raise SchemaError(
            f"schema {schema} expects columns {canonical}, got {list(columns)}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# schema={name}@{version}", ",".join(str(c) for c in columns)]
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path, expect: str | None = None):
    """Returns (schema_name, version, columns, rows-as-strings)."""
    path = Path(path)
    text = path.read_text().splitlines()
    if not text or not text[0].startswith("# schema="):
        raise SchemaError(f"{path}: missing schema header line")
    tag = text[0][len("# schema="):].strip()
    if "@" not in tag:
        raise SchemaError(f"{path}: malformed schema tag {tag!r}")
    name, version = tag.split("@", 1)
    if expect is not None and name != expect:
        raise SchemaError(f"{path}: schema {name!r}, expected {expect!r}")
    if len(text) < 2:
        raise SchemaError(f"{path}: missing column header")
    columns = text[1].split(",")
    rows = [ln.split(",") for ln in text[2:] if ln.strip()]
    return name, version, columns, rows


def read_csv_numeric(path, expect: str | None = None):
    """Like read_csv but with all-numeric rows as a float array."""
    name, version, columns, rows = read_csv(path, expect)
    data = np.array([[float(x) for x in row] for row in rows]) \
        if rows else np.zeros((0, len(columns)))
    return name, version, columns, data


def content_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def write_manifest(path, subcommand: str, config_dict: dict,
                   tolerances: dict, outputs: list, wall_time_s: float,
                   extra: dict | None = None) -> Path:
    import radialsp
    import scipy
    manifest = {
        "subcommand": subcommand,
        "config": config_dict,
        "tolerances": tolerances,
        "outputs": [str(o) for o in outputs],
        "wall_time_s": wall_time_s,
        "versions": {
            "radialsp": radialsp.__version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "input_hash": content_hash(config_dict),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    if extra:
        manifest.update(extra)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    return path


def branch_rows(curve_states):
    """branch.csv rows from a sequence of BoundState objects."""
    return [(s.branch_index, s.gamma, s.E, s.mass,
             s.zero_crossings(), s.colloc_resid) for s in curve_states]


def profile_rows(state):
    return [(r, u, v, w, z, m) for r, u, v, w, z, m in zip(
        state.mesh.nodes, state.u, state.v, state.w, state.z, state.m)]


def write_snapshots(path, times, radii, mags) -> Path:
    """Spacetime magnitude matrix: rows are times, columns sample radii."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    name, version, _ = SCHEMAS["snapshots"]
    cols = ["t"] + [format(float(r), ".8g") for r in radii]
    lines = [f"# schema={name}@{version}", ",".join(cols)]
    for t, row in zip(times, mags):
        lines.append(format(float(t), ".17g") + ","
                     + ",".join(format(float(x), ".8g") for x in row))
    path.write_text("\n".join(lines) + "\n")
    return path
