"""Replicate experiment runner and estimators.

Reproducibility contract: replicate seeds derive from (master seed, n,
replicate index) by the same keyed hash the environments use, so no
sequential RNG state crosses replicate boundaries and output tables are
identical at any worker count (records carry indices and are sorted before
aggregation).  The runtime_ms column is wall-clock and is the one
non-deterministic field.
"""

import dataclasses
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np

from . import _rng, construct, lpp
from .env import EnvironmentSpec, gen_poisson_layers, make_field
from .errors import DomainError

MEASURES = ("value", "geodesic", "scale_sums", "transversal", "constructed_path")
_TAG_REPLICATE = 0x55


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of a replicate experiment."""

    environment: EnvironmentSpec
    n_list: tuple
    replicates: int
    measure: tuple = ("value",)
    construction: dict | None = None  # {"s": int, "M": int} for constructed_path
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.replicates < 1:
            raise DomainError("replicates must be >= 1")
        if len(self.n_list) == 0 or any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise DomainError("n_list must be nonempty and strictly increasing")
        bad = sorted(set(self.measure) - set(MEASURES))
        if bad:
            raise DomainError(f"unknown measures: {bad}")
        if "constructed_path" in self.measure and self.environment.kind != "brw" \
                and not self.construction:
            raise DomainError("constructed_path on an i.i.d. environment needs construction {s, M}")
        if self.threads < 1:
            raise DomainError("threads must be >= 1")

    @classmethod
    def from_json(cls, doc):
        if isinstance(doc, str):
            doc = json.loads(doc)
        allowed = {"environment", "n_list", "replicates", "measure",
                   "construction", "seed", "threads"}
        bad = sorted(set(doc) - allowed)
        if bad:
            raise DomainError(f"unknown ExperimentConfig keys: {bad}")
        for key in ("environment", "n_list", "replicates"):
            if key not in doc:
                raise DomainError(f"missing ExperimentConfig key: {key}")
        return cls(environment=EnvironmentSpec.from_json(doc["environment"]),
                   n_list=tuple(int(n) for n in doc["n_list"]),
                   replicates=int(doc["replicates"]),
                   measure=tuple(doc.get("measure", ("value",))),
                   construction=doc.get("construction"),
                   seed=int(doc.get("seed", 0)),
                   threads=int(doc.get("threads", 1)))

    def to_json(self):
        return {"environment": self.environment.to_json(),
                "n_list": list(self.n_list), "replicates": self.replicates,
                "measure": list(self.measure), "construction": self.construction,
                "seed": self.seed, "threads": self.threads}


@dataclass
class ReplicateRecord:
    model: str
    n: int
    d: int
    replicate: int
    seed: int
    L: float
    transversal: int | None = None
    constructed_L: float | None = None
    runtime_ms: float = 0.0


def replicate_seed(master, n, index):
    """Per-replicate seed from (master, n, index); no sequential state."""
    return _rng.derive_key(_TAG_REPLICATE, master, n, index) & ((1 << 63) - 1)


def _run_one(config: ExperimentConfig, n, rep):
    t_start = time.perf_counter()
    seed = replicate_seed(config.seed, n, rep)
    env = config.environment
    spec = dataclasses.replace(env, n=n, seed=seed)
    scale_rows = []
    transversal = constructed = None

    if env.kind == "poisson":
        layers = gen_poisson_layers(n, spec.layer_count, seed)
        value = lpp.poisson_last_passage(layers)
    else:
        fld = make_field(spec)
        need_path = {"geodesic", "scale_sums", "transversal"} & set(config.measure)
        if need_path:
            res = lpp.geodesic(fld)
            value = res.value
            transversal = res.transversal if "transversal" in config.measure else None
            if "scale_sums" in config.measure:
                scale_rows = [(n, rep, k, v) for k, v in sorted(res.scale_sums.items())]
        else:
            value = lpp.last_passage(fld)
        if "constructed_path" in config.measure:
            if env.kind == "brw":
                s = (config.construction or {}).get("s", construct.DESK_S)
                cpath, _, _, _ = construct.build_brw_path(fld, s)
            else:
                params = construct.heavy_params(n, s=config.construction["s"],
                                                M=config.construction["M"])
                cpath, _ = construct.build_heavy_path(fld, params)
            constructed = lpp.ltr_sum(lpp.path_weights(fld, cpath))

    runtime_ms = (time.perf_counter() - t_start) * 1e3
    rec = ReplicateRecord(model=env.kind, n=n, d=env.d, replicate=rep, seed=seed,
                          L=value, transversal=transversal, constructed_L=constructed,
                          runtime_ms=runtime_ms)
    return rec, scale_rows


def _run_job(config, job):
    return _run_one(config, *job)


def run_experiment(config: ExperimentConfig):
    """Run all replicates; returns (records, scale_rows), both sorted by
    (n, replicate) regardless of worker interleaving.

    Workers are processes, not threads: the lattice DP is made of many
    small numpy operations that fight over the GIL in a thread pool.
    """
    jobs = [(n, rep) for n in config.n_list for rep in range(config.replicates)]
    if config.threads == 1:
        results = [_run_one(config, n, rep) for n, rep in jobs]
    else:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(partial(_run_job, config), jobs, chunksize=4))
    results.sort(key=lambda pair: (pair[0].n, pair[0].replicate))
    records = [r for r, _ in results]
    scale_rows = [row for _, rows in results for row in rows]
    return records, scale_rows


def fit_log_correction(ns, means):
    """Effective log-correction exponent: least squares of log2(mean/n) on
    log2(log2 n).  Returns (p, stderr).  The loglog denominator of the
    theorems is not separable at desk scale; treat p as an effective
    exponent, not an estimate of the true correction."""
    ns = np.asarray(ns, dtype=np.float64)
    means = np.asarray(means, dtype=np.float64)
    if ns.size < 3:
        raise DomainError("need at least 3 sizes to fit")
    if np.any(means <= 0) or np.any(ns <= 2):
        raise DomainError("means must be positive and ns > 2")
    x = np.log2(np.log2(ns))
    y = np.log2(means / ns)
    sxx = float(((x - x.mean()) ** 2).sum())
    if sxx == 0.0:
        raise DomainError("degenerate design: all sizes give identical log2 log2 n")
    slope = float(((x - x.mean()) * (y - y.mean())).sum() / sxx)
    resid = y - (y.mean() + slope * (x - x.mean()))
    sigma2 = float((resid ** 2).sum() / (ns.size - 2))
    return slope, math.sqrt(sigma2 / sxx)


_Z95 = 1.959963984540054


def concentration_tail(samples, n, ts):
    """Empirical P(|L - mean|/n > t) with Wilson 95% intervals."""
    samples = np.asarray(samples, dtype=np.float64)
    m = samples.size
    if m < 100:
        raise DomainError("need at least 100 samples for tail frequencies")
    dev = np.abs(samples - samples.mean()) / n
    rows = []
    for t in ts:
        p = float((dev > t).mean())
        denom = 1.0 + _Z95 ** 2 / m
        center = (p + _Z95 ** 2 / (2 * m)) / denom
        half = _Z95 * math.sqrt(p * (1 - p) / m + _Z95 ** 2 / (4 * m ** 2)) / denom
        rows.append((float(t), p, max(0.0, center - half), min(1.0, center + half)))
    return rows


def variance_curve(samples_by_n):
    """Unbiased Var(L) and Var(L)/n^2 per size, with jackknife errors.

    Accepts {n: samples} or a list of ReplicateRecord."""
    if not isinstance(samples_by_n, dict):
        grouped = {}
        for rec in samples_by_n:
            grouped.setdefault(rec.n, []).append(rec.L)
        samples_by_n = grouped
    if len(samples_by_n) < 2:
        raise DomainError("need at least 2 sizes")
    rows = []
    for n in sorted(samples_by_n):
        x = np.asarray(samples_by_n[n], dtype=np.float64)
        m = x.size
        if m < 100:
            raise DomainError(f"need at least 100 replicates per size, got {m} at n={n}")
        var = float(x.var(ddof=1))
        # jackknife over replicates
        s1, s2 = x.sum(), (x ** 2).sum()
        mean_loo = (s1 - x) / (m - 1)
        var_loo = (s2 - x ** 2 - (m - 1) * mean_loo ** 2) / (m - 2)
        se = math.sqrt((m - 1) / m * float(((var_loo - var_loo.mean()) ** 2).sum()))
        rows.append((int(n), var, var / n ** 2, se))
    return rows
