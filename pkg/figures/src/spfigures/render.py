"""Render publication-style figures from persisted pipeline CSV files.

Usage:  render <kind> <inputs...> -o <image>

Eight figure kinds cover the pipeline's artifact families: radial profiles,
branch curves in (E, mass), the same on log-log axes with the fitted slope
annotated, negative linearization spectra, the complex JL eigenvalue plane,
instability-onset scans, spacetime magnitude heatmaps, and invariant traces.
Inputs are accepted only when their schema header matches the kind; data
files are never modified and re-rendering identical inputs is
pixel-deterministic (fixed canvas, fonts, ordering, no timestamps).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

# locked style: deterministic output across runs
matplotlib.rcParams.update({
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.family": "DejaVu Sans",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "spfigures",
})

HEATMAP_MAX_CELLS = 2000


class SchemaMismatch(ValueError):
    pass


class EmptyInput(ValueError):
    pass


KIND_SCHEMAS = {
    "profiles": {"profile"},
    "mass-vs-E": {"branch"},
    "loglog-mass": {"branch", "rescale"},
    "Lpm-spectrum": {"spectrum"},
    "JL-complex-plane": {"spectrum"},
    "sigma-vs-E": {"transition"},
    "spacetime-heatmap": {"snapshots"},
    "invariant-trace": {"trace"},
}


def read_schema_csv(path: Path, allowed: set):
    """Parse one schema-versioned CSV; returns (name, columns, rows)."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# schema="):
        raise SchemaMismatch(f"{path}: missing schema header")
    name = lines[0][len("# schema="):].split("@", 1)[0]
    if name not in allowed:
        raise SchemaMismatch(
            f"{path}: schema {name!r} not accepted here (expected one of "
            f"{sorted(allowed)})")
    if len(lines) < 2:
        raise EmptyInput(f"{path}: no column header")
    columns = lines[1].split(",")
    rows = [ln.split(",") for ln in lines[2:] if ln.strip()]
    if not rows:
        raise EmptyInput(f"{path}: empty data body")
    return name, columns, rows


def _numeric(rows, cols_idx):
    return np.array([[float(r[i]) for i in cols_idx] for r in rows])


def fig_profiles(paths):
    fig, ax = plt.subplots()
    for p in sorted(paths):
        _, cols, rows = read_schema_csv(p, KIND_SCHEMAS["profiles"])
        d = _numeric(rows, [cols.index("r"), cols.index("u")])
        ax.plot(d[:, 0], d[:, 1], lw=1.2, label=Path(p).stem)
    ax.set_xlabel("r")
    ax.set_ylabel("u(r)")
    ax.set_xlim(left=0)
    ax.legend(fontsize=7)
    return fig


def _branch_groups(paths, kind):
    rows_all = []
    for p in sorted(paths):
        name, cols, rows = read_schema_csv(p, KIND_SCHEMAS[kind])
        if name == "rescale":
            d = _numeric(rows, [cols.index("E"), cols.index("mass")])
            rows_all.append((Path(p).stem, d))
        else:
            d = _numeric(rows, [cols.index("branch"), cols.index("E"),
                                cols.index("mass")])
            for b in np.unique(d[:, 0]):
                sel = d[d[:, 0] == b]
                order = np.argsort(sel[:, 1])
                rows_all.append((f"branch {int(b)}", sel[order][:, 1:]))
    return rows_all


def fig_mass_vs_E(paths):
    fig, ax = plt.subplots()
    for label, d in _branch_groups(paths, "mass-vs-E"):
        ax.plot(d[:, 0], d[:, 1], lw=1.2, label=label)
    ax.set_xlabel("E")
    ax.set_ylabel("mass")
    ax.legend(fontsize=7)
    return fig


def fig_loglog_mass(paths):
    fig, ax = plt.subplots()
    for label, d in _branch_groups(paths, "loglog-mass"):
        E, m = d[:, 0], d[:, 1]
        ax.loglog(E, m, lw=1.2, label=label)
        tail = E >= E.max() / 10.0
        if np.sum(tail) >= 3:
            slope = np.polyfit(np.log(E[tail]), np.log(m[tail]), 1)[0]
            ax.annotate(f"slope {slope:.3f}", xy=(E[tail][0], m[tail][0]),
                        fontsize=8)
    ax.set_xlabel("E")
    ax.set_ylabel("mass")
    ax.legend(fontsize=7)
    return fig


def fig_Lpm_spectrum(paths):
    fig, ax = plt.subplots()
    markers = {"Lminus": "o", "Lplus": "s"}
    for p in sorted(paths):
        _, cols, rows = read_schema_csv(p, KIND_SCHEMAS["Lpm-spectrum"])
        ops = [r[cols.index("operator")] for r in rows]
        re = np.array([float(r[cols.index("re")]) for r in rows])
        for op in ("Lminus", "Lplus"):
            sel = np.array([o == op for o in ops])
            vals = np.sort(re[sel])
            neg = vals[vals < 0]
            if neg.size:
                ax.plot(np.arange(neg.size), neg, markers[op], ms=5,
                        label=f"{Path(p).stem}:{op}")
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel("index")
    ax.set_ylabel("negative eigenvalues")
    ax.legend(fontsize=7)
    return fig


def fig_JL_complex_plane(paths):
    fig, ax = plt.subplots()
    for p in sorted(paths):
        _, cols, rows = read_schema_csv(p, KIND_SCHEMAS["JL-complex-plane"])
        sel = [r for r in rows if r[cols.index("operator")] == "JL"]
        if not sel:
            raise EmptyInput(f"{p}: no JL rows")
        re = np.array([float(r[cols.index("re")]) for r in sel])
        im = np.array([float(r[cols.index("im")]) for r in sel])
        ax.plot(re, im, ".", ms=3, label=Path(p).stem)
    ax.axvline(0.0, color="k", lw=0.8)
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    ax.legend(fontsize=7)
    return fig


def fig_sigma_vs_E(paths):
    fig, ax = plt.subplots()
    for p in sorted(paths):
        _, cols, rows = read_schema_csv(p, KIND_SCHEMAS["sigma-vs-E"])
        d = _numeric(rows, [cols.index("E"), cols.index("sigma_max")])
        order = np.argsort(d[:, 0])
        ax.plot(d[order, 0], d[order, 1], "o-", ms=4, label=Path(p).stem)
    ax.set_xlabel("E")
    ax.set_ylabel("max Re of the linearized spectrum")
    ax.legend(fontsize=7)
    return fig


def fig_spacetime_heatmap(paths):
    if len(paths) != 1:
        raise SchemaMismatch("spacetime-heatmap takes exactly one input")
    _, cols, rows = read_schema_csv(paths[0], KIND_SCHEMAS["spacetime-heatmap"])
    if cols[0] != "t":
        raise SchemaMismatch(f"{paths[0]}: first column must be t")
    radii = np.array([float(c) for c in cols[1:]])
    data = np.array([[float(x) for x in r] for r in rows])
    t, mags = data[:, 0], data[:, 1:]
    # stride-decimate to the cell budget
    st = max(1, int(np.ceil(mags.shape[0] / HEATMAP_MAX_CELLS)))
    sr = max(1, int(np.ceil(mags.shape[1] / HEATMAP_MAX_CELLS)))
    mags, t, radii = mags[::st, ::sr], t[::st], radii[::sr]
    fig, ax = plt.subplots()
    pc = ax.pcolormesh(radii, t, mags, shading="auto", cmap="viridis")
    fig.colorbar(pc, ax=ax, label="|phi|")
    ax.set_xlabel("r")
    ax.set_ylabel("t")
    return fig


def fig_invariant_trace(paths):
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True)
    for p in sorted(paths):
        _, cols, rows = read_schema_csv(p, KIND_SCHEMAS["invariant-trace"])
        d = _numeric(rows, [cols.index("t"), cols.index("mass"),
                            cols.index("energy")])
        t = d[:, 0]
        label = Path(p).stem
        ax1.plot(t, np.abs(d[:, 1] - d[0, 1]) / abs(d[0, 1]), lw=1.2,
                 label=label)
        ax2.plot(t, np.abs(d[:, 2] - d[0, 2]) / abs(d[0, 2]), lw=1.2)
    ax1.set_ylabel("mass drift")
    ax2.set_ylabel("energy drift")
    ax2.set_xlabel("t")
    ax1.legend(fontsize=7)
    return fig


RENDERERS = {
    "profiles": fig_profiles,
    "mass-vs-E": fig_mass_vs_E,
    "loglog-mass": fig_loglog_mass,
    "Lpm-spectrum": fig_Lpm_spectrum,
    "JL-complex-plane": fig_JL_complex_plane,
    "sigma-vs-E": fig_sigma_vs_E,
    "spacetime-heatmap": fig_spacetime_heatmap,
    "invariant-trace": fig_invariant_trace,
}


def render(kind: str, inputs, output) -> Path:
    if kind not in RENDERERS:
        raise SchemaMismatch(
            f"unknown figure kind {kind!r}; choose from "
            f"{sorted(RENDERERS)}")
    for p in inputs:
        if not Path(p).exists():
            raise FileNotFoundError(p)
    fig = RENDERERS[kind]([Path(p) for p in inputs])
    out = Path(output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, metadata={"Software": "spfigures"})
    plt.close(fig)
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="render", description=__doc__.splitlines()[0])
    ap.add_argument("kind", choices=sorted(RENDERERS))
    ap.add_argument("inputs", nargs="+")
    ap.add_argument("-o", "--output", required=True)
    args = ap.parse_args(argv)
    try:
        out = render(args.kind, args.inputs, args.output)
    except (SchemaMismatch, EmptyInput) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
