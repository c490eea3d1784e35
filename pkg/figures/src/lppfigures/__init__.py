"""Render figure analogues from lpplab CSV outputs.

A batch tool: it reads the solver CLI's documented CSV/JSON files and draws
images, nothing more -- every number plotted exists in an input file.  Jobs
are JSON documents:

    {"kind": "skeletons",
     "inputs": {"path_weights": "out/path_weights_7.csv"},
     "out": "skeletons.png",
     "options": {"thresholds": [4096, 512, 64, 8]}}

Kinds: heatmap_geodesic, skeletons, histogram, growth_curve, variance_curve.
Rendering is deterministic: fixed style, fixed PNG metadata, no timestamps,
so the same inputs and options give byte-identical images.
"""

import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

__version__ = "0.1.0"

KINDS = ("heatmap_geodesic", "skeletons", "histogram", "growth_curve",
         "variance_curve")

_PNG_METADATA = {"Software": "lppfigures"}
_FIGSIZE = (6.4, 5.6)
_DPI = 150


class SchemaError(ValueError):
    """An input file does not match its documented schema."""


@dataclass(frozen=True)
class FigureJob:
    kind: str
    inputs: dict
    out: str
    options: dict = field(default_factory=dict)

    @classmethod
    def from_json(cls, doc):
        if isinstance(doc, (str, Path)):
            doc = json.loads(Path(doc).read_text(encoding="utf-8"))
        bad = sorted(set(doc) - {"kind", "inputs", "out", "options"})
        if bad:
            raise SchemaError(f"unknown job keys: {bad}")
        for key in ("kind", "inputs", "out"):
            if key not in doc:
                raise SchemaError(f"missing job key: {key}")
        if doc["kind"] not in KINDS:
            raise SchemaError(f"unknown figure kind {doc['kind']!r}")
        return cls(kind=doc["kind"], inputs=dict(doc["inputs"]),
                   out=doc["out"], options=dict(doc.get("options") or {}))


def _read_csv(path, columns):
    """Read the named columns as float arrays; name the offender on mismatch."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file")
        missing = [c for c in columns if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column {missing[0]!r} "
                              f"(header: {header})")
        idx = [header.index(c) for c in columns]
        rows = [[float(row[i]) for i in idx] for row in reader]
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    arr = np.asarray(rows)
    return [arr[:, j] for j in range(len(columns))]


def _input(job, name):
    if name not in job.inputs:
        raise SchemaError(f"{job.kind} needs input {name!r}")
    return job.inputs[name]


def _save(fig, out):
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    kw = {"metadata": _PNG_METADATA} if str(out).endswith(".png") else {}
    fig.savefig(out, dpi=_DPI, **kw)
    plt.close(fig)


def _skeleton_mask(weights, threshold):
    keep = weights > threshold
    keep[0] = keep[-1] = True  # endpoints anchor the rendered skeleton
    return keep


def _render_heatmap_geodesic(job):
    x, y, w = _read_csv(_input(job, "weights"), ["x", "y", "weight"])
    gx, gy = _read_csv(_input(job, "geodesic"), ["x", "y"])
    nx, ny = int(x.max()) + 1, int(y.max()) + 1
    dense = np.full((nx, ny), np.nan)
    dense[x.astype(int), y.astype(int)] = w
    if np.isnan(dense).any():
        raise SchemaError(f"{_input(job, 'weights')}: grid has holes")
    # heavy tails wash out structure; clip color at the 99.9th percentile
    cap = float(np.percentile(w, job.options.get("percentile_cap", 99.9)))
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.imshow(dense.T, origin="lower", cmap="Greys", vmax=cap,
              interpolation="nearest")
    ax.plot(gx, gy, color="crimson", linewidth=1.2)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    _save(fig, job.out)
    return {"out": job.out, "grid": [nx, ny], "color_cap": cap,
            "geodesic_vertices": int(len(gx))}


def _render_skeletons(job):
    x, y, w = _read_csv(_input(job, "path_weights"), ["x", "y", "weight"])
    thresholds = job.options.get("thresholds")
    if not thresholds:
        raise SchemaError("skeletons needs options.thresholds")
    thresholds = sorted((float(t) for t in thresholds), reverse=True)
    panels = bool(job.options.get("panels", True))
    if panels:
        fig, axes = plt.subplots(1, len(thresholds),
                                 figsize=(3.2 * len(thresholds), 3.4),
                                 sharex=True, sharey=True)
        axes = np.atleast_1d(axes)
    else:
        fig, ax = plt.subplots(figsize=_FIGSIZE)
        axes = [ax] * len(thresholds)
    indices = {}
    for i, (thr, ax) in enumerate(zip(thresholds, axes)):
        keep = _skeleton_mask(w, thr)
        indices[thr] = np.flatnonzero(keep).tolist()
        ax.plot(x[keep], y[keep], linewidth=1.0,
                label=f"> {thr:g}", color=plt.cm.viridis(i / max(1, len(thresholds) - 1)))
        if panels:
            ax.set_title(f"weights > {thr:g}", fontsize=9)
    if not panels:
        axes[0].legend(fontsize=8)
    _save(fig, job.out)
    return {"out": job.out, "thresholds": thresholds,
            "skeleton_indices": indices,
            "sizes": {t: len(v) for t, v in indices.items()}}


def _render_histogram(job):
    (w,) = _read_csv(_input(job, "path_weights"), ["weight"])
    bins = int(job.options.get("bins", 40))
    log_log = bool(job.options.get("log_log", True))
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    if log_log:
        pos = w[w > 0]
        if pos.size == 0:
            raise SchemaError("log-log histogram needs positive weights")
        edges = np.geomspace(pos.min(), pos.max() * (1 + 1e-9), bins + 1)
        counts, _ = np.histogram(pos, bins=edges)
        ax.set_xscale("log")
        ax.set_yscale("log")
    else:
        edges = np.linspace(w.min(), w.max(), bins + 1)
        counts, _ = np.histogram(w, bins=edges)
    ax.stairs(np.maximum(counts, 0.5) if log_log else counts, edges,
              fill=True, color="steelblue", alpha=0.8)
    ax.set_xlabel("weight")
    ax.set_ylabel("count")
    _save(fig, job.out)
    return {"out": job.out, "bin_edges": edges.tolist(),
            "bin_counts": counts.tolist()}


def _render_growth_curve(job):
    doc = json.loads(Path(_input(job, "summary")).read_text(encoding="utf-8"))
    if "means" not in doc:
        raise SchemaError("summary.json lacks 'means'")
    ns = sorted(int(k) for k in doc["means"])
    ratios = [doc["means"][str(n)] / n for n in ns]
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(ns, ratios, "o-", color="steelblue", label="mean L / n")
    refs = doc.get("reference_bounds")
    if refs:
        ref = [refs[str(n)] / n for n in ns]
        scale = ratios[-1] / ref[-1]
        ax.plot(ns, [scale * r for r in ref], "--", color="grey",
                label="lower-bound shape (scaled)")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("n")
    ax.set_ylabel("mean L / n")
    ax.legend(fontsize=8)
    _save(fig, job.out)
    return {"out": job.out, "ns": ns, "ratios": ratios}


def _render_variance_curve(job):
    doc = json.loads(Path(_input(job, "summary")).read_text(encoding="utf-8"))
    rows = doc.get("variance_curve")
    if not rows:
        raise SchemaError("summary.json lacks 'variance_curve'")
    ns = [r["n"] for r in rows]
    ratios = [r["var_over_n2"] for r in rows]
    errs = [r["jackknife_se"] / r["n"] ** 2 for r in rows]
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.errorbar(ns, ratios, yerr=errs, fmt="o-", color="steelblue", capsize=3)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("n")
    ax.set_ylabel("Var(L) / n^2")
    ax.set_ylim(bottom=0)
    _save(fig, job.out)
    return {"out": job.out, "ns": ns, "ratios": ratios}


_RENDERERS = {
    "heatmap_geodesic": _render_heatmap_geodesic,
    "skeletons": _render_skeletons,
    "histogram": _render_histogram,
    "growth_curve": _render_growth_curve,
    "variance_curve": _render_variance_curve,
}


def render(job) -> dict:
    """Render one job (FigureJob, dict, or path to a job JSON)."""
    if not isinstance(job, FigureJob):
        job = FigureJob.from_json(job)
    return _RENDERERS[job.kind](job)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print("usage: lppfigures JOB.json", file=sys.stderr)
        return 2
    try:
        info = render(argv[0])
    except (SchemaError, FileNotFoundError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(info["out"])
    return 0
