"""Random environments: critical heavy-tailed i.i.d. fields, the hierarchical
Gaussian field built from nested dyadic boxes, and layered Poisson clouds.

Weights are computable on demand from (spec, coordinate) through the
counter-based primitives in _rng, so a dynamic program over an n x n grid
never has to hold the field in memory, and any number of threads can read
the same environment concurrently.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .errors import DomainError, InternalError

KINDS = ("iid-pareto2", "iid-logcorrected", "brw", "poisson")

# stream-tag constants so distinct purposes never share counters
_TAG_FIELD = 0x11
_TAG_BRW_LEVEL = 0x22
_TAG_LAYER_COUNT = 0x33
_TAG_LAYER_POS = 0x44


@dataclass(frozen=True)
class EnvironmentSpec:
    """Declarative description of a random environment.

    kind: one of KINDS; n: grid size; d: spatial codimension (the lattice
    is (d+1)-dimensional); seed: 64-bit master seed; t0 / beta /
    layer_count: tail and field parameters, used per kind.
    """

    kind: str
    n: int
    d: int = 1
    seed: int = 0
    t0: float = 1.0
    beta: float | None = None
    layer_count: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown environment kind {self.kind!r}")
        if self.n < 1:
            raise DomainError("n must be >= 1")
        if self.d < 1:
            raise DomainError("d must be >= 1")
        if self.kind == "brw" and (self.n & (self.n - 1)) != 0:
            raise DomainError("brw requires n to be a power of two")
        if self.t0 < 1.0:
            raise DomainError("t0 must be >= 1")
        if self.kind == "iid-logcorrected":
            if self.beta is None:
                raise DomainError("iid-logcorrected requires beta")
            if not (1.0 < self.beta < (self.d + 2) / 2):
                raise DomainError(
                    f"beta must lie in (1, {(self.d + 2) / 2}) for d={self.d}")
        if self.kind == "poisson":
            lc = self.layer_count
            if lc is None or lc < 1:
                raise DomainError("poisson requires layer_count >= 1")
            if lc > int(math.floor(math.log2(self.n))) + 1:
                raise DomainError("layer_count must be <= log2(n) + 1")

    @property
    def grid_shape(self):
        """Lattice vertex counts per axis; brw lives on [0, n-1]^(d+1)."""
        side = self.n if self.kind == "brw" else self.n + 1
        return (side,) * (self.d + 1)

    def to_json(self):
        params = {"t0": self.t0}
        if self.beta is not None:
            params["beta"] = self.beta
        if self.layer_count is not None:
            params["layer_count"] = self.layer_count
        return {"kind": self.kind, "n": self.n, "d": self.d,
                "seed": self.seed, "params": params}

    @classmethod
    def from_json(cls, doc):
        if isinstance(doc, str):
            doc = json.loads(doc)
        bad = sorted(set(doc) - {"kind", "n", "d", "seed", "params"})
        if bad:
            raise DomainError(f"unknown EnvironmentSpec keys: {bad}")
        params = doc.get("params", {}) or {}
        bad = sorted(set(params) - {"t0", "beta", "layer_count"})
        if bad:
            raise DomainError(f"unknown EnvironmentSpec params keys: {bad}")
        try:
            return cls(kind=doc["kind"], n=int(doc["n"]), d=int(doc.get("d", 1)),
                       seed=int(doc.get("seed", 0)), t0=float(params.get("t0", 1.0)),
                       beta=params.get("beta"), layer_count=params.get("layer_count"))
        except KeyError as e:
            raise DomainError(f"missing EnvironmentSpec key: {e.args[0]}") from None


def sample_pareto2(u, t0=1.0):
    """Critical Pareto quantile: survival P(X > t) = (t0/t)^2 for t >= t0.

    Exact inverse CDF X = t0 / sqrt(1 - u), so P(X > t) * t^2 = t0^2 holds
    identically, not just asymptotically.
    """
    if t0 < 1.0:
        raise DomainError("t0 must be >= 1")
    arr = np.asarray(u, dtype=np.float64)
    if np.any(arr < 0.0) or np.any(arr >= 1.0):
        raise DomainError("u must lie in [0, 1)")
    out = t0 / np.sqrt(1.0 - arr)
    return float(out) if np.ndim(u) == 0 else out


def logcorrected_sf(t, beta, d=1):
    """Survival function min{1, t^-(d+1) * (1 + log2 t)^-beta} for t >= 1."""
    t = np.asarray(t, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        val = t ** (-(d + 1)) * (1.0 + np.log2(t)) ** (-beta)
    return np.where(t <= 1.0, 1.0, np.minimum(1.0, val))


def sample_logcorrected(u, beta, d=1, rtol=1e-12):
    """Quantile of the log-corrected critical tail, by monotone bisection.

    The survival function decreases strictly on [1, inf), so bisection on
    sf(x) = 1 - u converges unconditionally; an iteration cap guards the
    impossible non-convergent case.  The iteration count is fixed, never
    an all-converged early exit, so each element's result depends only on
    its own u and not on what else happens to share the batch.
    """
    if not (1.0 < beta < (d + 2) / 2):
        raise DomainError(f"beta must lie in (1, {(d + 2) / 2}) for d={d}")
    arr = np.atleast_1d(np.asarray(u, dtype=np.float64))
    if np.any(arr < 0.0) or np.any(arr >= 1.0):
        raise DomainError("u must lie in [0, 1)")
    target = 1.0 - arr

    # per-element doubling: each bracket stops at its own first sf(hi) <= target
    hi = np.full(arr.shape, 2.0)
    for _ in range(200):
        mask = logcorrected_sf(hi, beta, d) > target
        if not mask.any():
            break
        hi[mask] *= 2.0
    else:
        raise InternalError("bracketing failed for log-corrected quantile")

    # u < 1 - 2^-53 caps hi at ~2^(54/(d+1)); 110 halvings reach rtol from there
    lo = np.ones_like(hi)
    for _ in range(110):
        mid = 0.5 * (lo + hi)
        too_high = logcorrected_sf(mid, beta, d) > target
        lo = np.where(too_high, mid, lo)
        hi = np.where(too_high, hi, mid)
    if np.any(hi - lo > 4.0 * rtol * lo):
        raise InternalError("bisection failed to converge")

    out = np.where(target >= 1.0, 1.0, 0.5 * (lo + hi))
    return float(out[0]) if np.ndim(u) == 0 else out


def scale_of(x, n, k_max=None):
    """Dyadic scale index: the unique k >= 0 with n/2^k < x <= n/2^(k-1).

    Scale 0 is the coarsest bucket and, by convention here, also absorbs
    outliers above 2n (the definition has no k >= 0 there).  Returns None
    when k_max is given and x <= n/2^k_max.
    """
    if x <= 0:
        raise DomainError("scale is defined for positive weights only")
    if n < 1:
        raise DomainError("n must be >= 1")
    if x > n:
        return 0
    k = 1
    thr = n / 2.0
    while x <= thr:
        thr /= 2.0
        k += 1
    if k_max is not None and k > k_max:
        return None
    return k


def scale_indices(x, n, k_max):
    """Vectorized scale_of with residual bucket -1 for x <= n/2^k_max.

    Non-positive entries (possible for the Gaussian hierarchical field) land
    in the residual bucket as well.
    """
    x = np.asarray(x, dtype=np.float64)
    k = np.zeros(x.shape, dtype=np.int64)
    pos = x > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = np.ceil(np.log2(n) - np.log2(np.where(pos, x, 1.0)))
    k[pos] = np.maximum(raw[pos], 0).astype(np.int64)
    # fix boundary rounding so that n/2^k < x <= n/2^(k-1) holds exactly
    for _ in range(3):
        low = pos & (x <= np.ldexp(float(n), -k))
        k[low] += 1
        high = pos & (k >= 1) & (x > np.ldexp(float(n), -(k - 1)))
        k[high] -= 1
        if not (low.any() or high.any()):
            break
    k[~pos] = k_max + 1
    return np.where(k > k_max, -1, k)


class WeightField:
    """Deterministic map from lattice coordinates to weights.

    Evaluation is pure: the weight at a vertex depends only on (spec,
    coordinates), never on evaluation order.  materialize() caches the dense
    array for small grids; cached lookups are bit-identical to on-demand
    evaluation because both run the same per-element transform in the same
    order.
    """

    def __init__(self, spec: EnvironmentSpec):
        if spec.kind == "poisson":
            raise DomainError("poisson environments are point clouds, not lattice fields")
        self.spec = spec
        self.shape = spec.grid_shape
        self._key = _rng.derive_key(_TAG_FIELD, KINDS.index(spec.kind),
                                    spec.n, spec.d, spec.seed)
        self._dense = None
        if spec.kind == "brw":
            self._m = spec.n.bit_length() - 1
            self._level_keys = [_rng.derive_key(self._key, _TAG_BRW_LEVEL, k)
                                for k in range(self._m + 1)]

    # -- evaluation ------------------------------------------------------

    def _counter(self, coords):
        if len(coords) == 2:
            return _rng.pack2(coords[0], coords[1])
        return _rng.counter_many(self._key, coords)

    def weights(self, *coords):
        """Vectorized weights at absolute lattice coordinates (no bounds check)."""
        if self._dense is not None:
            return self._dense[tuple(np.asarray(c) for c in coords)]
        return self._weights_direct(coords)

    def _weights_direct(self, coords):
        kind = self.spec.kind
        if kind == "brw":
            return self._brw_weights(coords)
        u = _rng.uniform01(_rng.hash_u64(self._key, self._counter(coords)))
        if kind == "iid-pareto2":
            return self.spec.t0 / np.sqrt(1.0 - u)
        return sample_logcorrected(u, self.spec.beta, self.spec.d)

    def brw_xi(self, k, *box_coords):
        """Standard normal attached to the level-k box with the given indices."""
        key = self._level_keys[k]
        if len(box_coords) == 2:
            counter = _rng.pack2(box_coords[0], box_coords[1])
        else:
            counter = _rng.counter_many(key, box_coords)
        return _rng.normals(key, counter)

    def _brw_weights(self, coords):
        coords = [np.asarray(c, dtype=np.int64) for c in coords]
        acc = np.zeros(np.broadcast(*coords).shape, dtype=np.float64)
        for k in range(self._m + 1):
            shift = self._m - k
            acc = acc + self.brw_xi(k, *[c >> shift for c in coords])
        return acc

    def at(self, v):
        """Bounds-checked single-vertex weight (the field_eval contract)."""
        v = tuple(int(c) for c in v)
        if len(v) != len(self.shape):
            raise DomainError(f"expected {len(self.shape)} coordinates, got {len(v)}")
        for c, side in zip(v, self.shape):
            if not (0 <= c < side):
                raise DomainError(f"coordinate {v} outside grid {self.shape}")
        return float(self._weights_direct(tuple(np.asarray([c]) for c in v))[0]
                     if self._dense is None else self._dense[v])

    # -- dense cache -----------------------------------------------------

    def materialize(self, limit_cells=2 ** 24):
        """Cache the dense weight array (refuses above limit_cells)."""
        cells = int(np.prod(self.shape))
        if cells > limit_cells:
            raise DomainError(f"grid of {cells} cells exceeds materialize limit")
        if self._dense is None:
            if self.spec.kind == "brw" and self.spec.d == 1:
                self._dense = self._brw_dense()
            else:
                grids = np.meshgrid(*[np.arange(s, dtype=np.int64) for s in self.shape],
                                    indexing="ij")
                self._dense = self._weights_direct(tuple(grids))
        return self._dense

    def _brw_dense(self):
        # repeat-upsample per level; summation order matches _brw_weights
        n = self.spec.n
        acc = np.zeros((n, n), dtype=np.float64)
        for k in range(self._m + 1):
            nb = 1 << k
            bx = np.arange(nb, dtype=np.int64)
            xi = self.brw_xi(k, bx[:, None], bx[None, :])
            side = n >> k
            acc += np.repeat(np.repeat(xi, side, axis=0), side, axis=1)
        return acc


def make_field(spec: EnvironmentSpec) -> WeightField:
    return WeightField(spec)


def field_eval(spec: EnvironmentSpec, v):
    """Weight at lattice coordinate v, straight from (spec, v)."""
    return WeightField(spec).at(v)


# -- layered Poisson clouds ----------------------------------------------


@dataclass(frozen=True)
class PoissonLayer:
    k: int
    weight: float
    points: np.ndarray  # (count, 2) float64 in [0, n)^2


@dataclass(frozen=True)
class PoissonLayers:
    n: int
    layers: list = field(default_factory=list)

    @property
    def total_points(self):
        return sum(len(l.points) for l in self.layers)


def _poisson_count(key, lam):
    # count of unit-exponential arrivals before time lam, from counters
    drawn = 0
    total = 0.0
    count = 0
    while True:
        chunk = max(64, int(lam - total + 10.0 * math.sqrt(lam) + 64))
        bits = _rng.hash_u64(key, np.arange(drawn, drawn + chunk, dtype=np.uint64))
        gaps = -np.log1p(-_rng.uniform01(bits))
        cs = total + np.cumsum(gaps)
        idx = int(np.searchsorted(cs, lam, side="right"))
        count += idx
        if idx < chunk:
            return count
        total = float(cs[-1])
        drawn += chunk


def gen_poisson_layers(n, layer_count, seed) -> PoissonLayers:
    """Superimposed Poisson layers: layer k has point weight n/2^k, point
    count Poisson(2^(2k)) (intensity 2^(2k)/n^2 over the box [0,n]^2), all
    deterministic functions of the seed."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if layer_count < 1 or layer_count > int(math.floor(math.log2(n))) + 1:
        raise DomainError("layer_count must lie in [1, log2(n) + 1]")
    layers = []
    for k in range(layer_count):
        ckey = _rng.derive_key(_TAG_LAYER_COUNT, n, seed, k)
        pkey = _rng.derive_key(_TAG_LAYER_POS, n, seed, k)
        count = _poisson_count(ckey, float(4 ** k))
        idx = np.arange(count, dtype=np.uint64)
        xs = _rng.uniform01(_rng.hash_u64(pkey, idx * np.uint64(2))) * n
        ys = _rng.uniform01(_rng.hash_u64(pkey, idx * np.uint64(2) + np.uint64(1))) * n
        layers.append(PoissonLayer(k=k, weight=n / 2 ** k,
                                   points=np.column_stack([xs, ys])))
    return PoissonLayers(n=n, layers=layers)
