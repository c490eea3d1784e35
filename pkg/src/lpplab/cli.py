"""Command-line entry point: reproducible solver, construction, and
experiment runs with file outputs.

Exit codes are stable: 0 success, 2 invalid spec/config, 3 size guard,
4 degenerate construction.  All randomness flows from --seed (or the seed
inside an experiment config); there is no wall-clock seeding.  Outputs land
in a fixed layout under --out: manifest.json, summary.json, records.csv,
scales.csv, geodesic_{seed}.csv, path_weights_{seed}.csv, levels_{seed}.csv,
choices_{seed}.csv, weights_{seed}.csv (per command; see README).  Identical
invocations produce byte-identical outputs except manifest timestamps and
the runtime_ms column.
"""

import argparse
import csv
import dataclasses
import hashlib
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, construct, lpp, stats
from .env import EnvironmentSpec, gen_poisson_layers, make_field, scale_of
from .errors import DegenerateError, DomainError, InfeasibleError, SizeError

_DUMP_MAX_N = 2 ** 10


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _digest(path: Path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


class _Manifest:
    def __init__(self, out_dir: Path, config_echo):
        self.out = out_dir
        self.doc = {"tool": "lpplab", "version": __version__,
                    "config": config_echo,
                    "started": datetime.now(timezone.utc).isoformat(),
                    "finished": None, "outputs": {}}

    def add(self, *names):
        for name in names:
            self.doc["outputs"][name] = _digest(self.out / name)

    def write(self):
        self.doc["finished"] = datetime.now(timezone.utc).isoformat()
        (self.out / "manifest.json").write_text(
            json.dumps(self.doc, indent=2) + "\n", encoding="utf-8")


def _spec_from_args(args) -> EnvironmentSpec:
    layer_count = args.layer_count
    if args.model == "poisson" and layer_count is None:
        layer_count = int(math.floor(math.log2(args.n))) + 1
    return EnvironmentSpec(kind=args.model, n=args.n, d=args.d, seed=args.seed,
                           t0=args.t0, beta=args.beta, layer_count=layer_count)


def cmd_solve(args) -> int:
    spec = _spec_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _Manifest(out, spec.to_json())
    summary = {"model": spec.kind, "n": spec.n, "d": spec.d, "seed": spec.seed}

    if spec.kind == "poisson":
        layers = gen_poisson_layers(spec.n, spec.layer_count, spec.seed)
        summary["value"] = lpp.poisson_last_passage(layers)
        summary["total_points"] = layers.total_points
    else:
        fld = make_field(spec)
        if args.geodesic:
            res = lpp.geodesic(fld)
            summary["value"] = res.value
            summary["transversal"] = res.transversal
            path = res.geodesic
            name = f"geodesic_{spec.seed}.csv"
            _write_csv(out / name, ["x", "y"] if spec.d == 1 else ["x", "y", "z"],
                       [tuple(v) for v in path])
            wname = f"path_weights_{spec.seed}.csv"
            w = lpp.path_weights(fld, path)
            _write_csv(out / wname, ["x", "y", "weight"] if spec.d == 1
                       else ["x", "y", "z", "weight"],
                       [tuple(v) + (float(wv),) for v, wv in zip(path, w)])
            _write_csv(out / "scales.csv", ["scale", "sum"],
                       sorted(res.scale_sums.items()))
            manifest.add(name, wname, "scales.csv")
        else:
            summary["value"] = lpp.last_passage(fld)
        if args.dump_weights:
            if spec.n > _DUMP_MAX_N or spec.d != 1:
                raise SizeError(f"--dump-weights supports d=1, n <= {_DUMP_MAX_N}")
            dense = fld.materialize()
            name = f"weights_{spec.seed}.csv"
            sx, sy = dense.shape
            xs, ys = np.meshgrid(np.arange(sx), np.arange(sy), indexing="ij")
            _write_csv(out / name, ["x", "y", "weight"],
                       zip(xs.ravel().tolist(), ys.ravel().tolist(),
                           dense.ravel().tolist()))
            manifest.add(name)

    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n",
                                      encoding="utf-8")
    manifest.add("summary.json")
    manifest.write()
    print(f"value = {summary['value']!r}")
    return 0


def cmd_construct(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"model": args.model, "n": args.n, "seed": args.seed}

    if args.model == "brw":
        spec = EnvironmentSpec(kind="brw", n=args.n, d=1, seed=args.seed)
        fld = make_field(spec)
        s = args.s if args.s is not None else construct.DESK_S
        path, choices, l1, l2 = construct.build_brw_path(fld, s)
        manifest = _Manifest(out, {**spec.to_json(), "s": s})
        name = f"choices_{args.seed}.csv"
        _write_csv(out / name,
                   ["level", "corner_x", "corner_y", "side", "choice",
                    "gain", "alternative_gain"],
                   [(c.level, c.square.a[0], c.square.a[1],
                     c.square.b[0] - c.square.a[0], c.choice, c.gain,
                     c.alternative_gain) for c in choices])
        summary.update({"s": s, "squares": len(choices), "L1": l1, "L2": l2,
                        "constructed_value": float(l1 + l2),
                        "reference_bound": construct.reference_bound(args.n, "brw")})
        manifest.add(name)
    else:
        spec = EnvironmentSpec(kind=args.model, n=args.n, d=1, seed=args.seed,
                               beta=args.beta, t0=args.t0)
        if args.paper_params:
            params = construct.heavy_params(args.n)
            if params.degenerate:
                raise DegenerateError(
                    f"degenerate: M=0 at n={args.n} under the asymptotic "
                    f"parameters (s={params.s}); pass --s/--M overrides")
        else:
            if args.s is None or args.M is None:
                raise DomainError("construct needs --s and --M, or --paper-params")
            params = construct.heavy_params(args.n, s=args.s, M=args.M)
        fld = make_field(spec)
        path, levels = construct.build_heavy_path(fld, params)
        report = construct.verify_apriori(levels, params)
        manifest = _Manifest(out, {**spec.to_json(),
                                   "s": params.s, "M": params.M,
                                   "source": params.source})
        name = f"levels_{args.seed}.csv"
        rows = []
        for lvl, verts in enumerate(levels.levels):
            for idx, (x, y) in enumerate(verts):
                w = fld.at((int(x), int(y)))
                sc = scale_of(w, args.n) if w > 0 else None
                rows.append((lvl, idx, int(x), int(y), sc))
        _write_csv(out / name, ["level", "index", "x", "y", "scale"], rows)
        hit_fractions = {str(l + 1): (levels.hits[l] / levels.scanned[l]
                                      if levels.scanned[l] else None)
                         for l in range(params.M)}
        summary.update({
            "s": params.s, "M": params.M, "lambda": params.lam, "rho": params.rho,
            "apriori_all_ok": report.all_ok,
            "hit_fractions": hit_fractions,
            "hit_benchmark": construct.BENCHMARK_HIT_FRACTION,
            "constructed_value": lpp.ltr_sum(lpp.path_weights(fld, path)),
            "vertices_per_level": [len(v) for v in levels.levels],
            "reference_bound": construct.reference_bound(args.n, "heavy")})
        manifest.add(name)

    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n",
                                      encoding="utf-8")
    manifest.add("summary.json")
    manifest.write()
    print(f"constructed value = {summary['constructed_value']!r}")
    return 0


def cmd_experiment(args) -> int:
    cfg_doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
    config = stats.ExperimentConfig.from_json(cfg_doc)
    if args.threads is not None:
        config = dataclasses.replace(config, threads=args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _Manifest(out, config.to_json())

    records, scale_rows = stats.run_experiment(config)
    _write_csv(out / "records.csv",
               ["model", "n", "d", "replicate", "seed", "L", "transversal",
                "constructed_L", "runtime_ms"],
               [(r.model, r.n, r.d, r.replicate, r.seed, r.L, r.transversal,
                 r.constructed_L, round(r.runtime_ms, 3)) for r in records])
    manifest.add("records.csv")
    if scale_rows:
        _write_csv(out / "scales.csv", ["n", "replicate", "scale", "sum"], scale_rows)
        manifest.add("scales.csv")

    by_n = {}
    for r in records:
        by_n.setdefault(r.n, []).append(r.L)
    summary = {"model": config.environment.kind, "seed": config.seed,
               "replicates": config.replicates,
               "means": {str(n): float(np.mean(v)) for n, v in by_n.items()},
               "variances": {str(n): (float(np.var(v, ddof=1)) if len(v) > 1 else None)
                             for n, v in by_n.items()}}
    ref_model = {"iid-pareto2": "heavy", "iid-logcorrected": "logcorrected",
                 "brw": "brw"}.get(config.environment.kind)
    if ref_model:
        summary["reference_bounds"] = {
            str(n): construct.reference_bound(n, ref_model,
                                              beta=config.environment.beta,
                                              d=config.environment.d)
            for n in config.n_list}
    if len(config.n_list) >= 3:
        ns = sorted(by_n)
        try:
            p, se = stats.fit_log_correction(ns, [float(np.mean(by_n[n])) for n in ns])
            summary["effective_exponent"] = {"p": p, "stderr": se}
        except DomainError:
            summary["effective_exponent"] = None  # e.g. non-positive means
    if len(by_n) >= 2 and min(len(v) for v in by_n.values()) >= 100:
        summary["variance_curve"] = [
            {"n": n, "var": v, "var_over_n2": vn, "jackknife_se": se}
            for n, v, vn, se in stats.variance_curve({n: v for n, v in by_n.items()})]
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n",
                                      encoding="utf-8")
    manifest.add("summary.json")
    manifest.write()
    print(f"wrote {len(records)} records to {out}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="lpplab",
                                description="Last passage percolation in hierarchical "
                                            "random environments")
    sub = p.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="exact last passage value / geodesic")
    solve.add_argument("--model", required=True,
                       choices=["iid-pareto2", "iid-logcorrected", "brw", "poisson"])
    solve.add_argument("--n", type=int, required=True)
    solve.add_argument("--d", type=int, default=1)
    solve.add_argument("--seed", type=int, required=True)
    solve.add_argument("--beta", type=float, default=None)
    solve.add_argument("--t0", type=float, default=1.0)
    solve.add_argument("--layer-count", type=int, default=None)
    solve.add_argument("--geodesic", action="store_true")
    solve.add_argument("--dump-weights", action="store_true")
    solve.add_argument("--threads", type=int, default=1)
    solve.add_argument("--out", default="out")
    solve.set_defaults(func=cmd_solve)

    cons = sub.add_parser("construct", help="multi-scale lower-bound path")
    cons.add_argument("--model", required=True,
                      choices=["iid-pareto2", "iid-logcorrected", "brw"])
    cons.add_argument("--n", type=int, required=True)
    cons.add_argument("--seed", type=int, required=True)
    cons.add_argument("--s", type=int, default=None)
    cons.add_argument("--M", type=int, default=None)
    cons.add_argument("--paper-params", action="store_true")
    cons.add_argument("--beta", type=float, default=None)
    cons.add_argument("--t0", type=float, default=1.0)
    cons.add_argument("--out", default="out")
    cons.set_defaults(func=cmd_construct)

    exp = sub.add_parser("experiment", help="replicate experiment from a JSON config")
    exp.add_argument("config")
    exp.add_argument("--threads", type=int, default=None)
    exp.add_argument("--out", default="out")
    exp.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DomainError, InfeasibleError, FileNotFoundError,
            json.JSONDecodeError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except SizeError as e:
        print(f"size guard: {e}", file=sys.stderr)
        return 3
    except DegenerateError as e:
        print(f"degenerate construction: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
