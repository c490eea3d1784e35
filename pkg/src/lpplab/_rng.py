"""Counter-based random primitives.

Every random quantity in this package is a pure function of a 64-bit stream
key and an integer counter (here: lattice coordinates, box indices, replicate
numbers).  Nothing carries sequential generator state, so evaluations are
reproducible bit-for-bit regardless of evaluation order or thread count, and
a weight at one lattice site can be recomputed without touching any other.

The mixer is the SplitMix64 finalizer (Steele/Lea/Flood 2014, constants due
to David Stafford's "Mix13"), applied to counter * golden-gamma so that
structured counters (consecutive coordinates) are decorrelated.  Gaussians
come from the uniform via Peter Acklam's rational approximation of the
inverse normal CDF (relative error < 1.2e-9), a fixed closed-form transform
that yields identical doubles on every platform.
"""

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_U_GOLDEN = np.uint64(_GOLDEN)
_U_MIX1 = np.uint64(_MIX1)
_U_MIX2 = np.uint64(_MIX2)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S32 = np.uint64(32)
_S11 = np.uint64(11)

# 2^-53 and a half-ulp offset used to keep uniforms strictly inside (0,1)
_INV53 = 2.0 ** -53
_HALF54 = 2.0 ** -54


def mix64(z):
    """SplitMix64 finalizer on uint64 scalars or arrays (wrapping multiply)."""
    with np.errstate(over="ignore"):
        z = z ^ (z >> _S30)
        z = z * _U_MIX1
        z = z ^ (z >> _S27)
        z = z * _U_MIX2
        z = z ^ (z >> _S31)
    return z


def _mix64_int(z):
    # Python-int twin of mix64, for key derivation outside hot loops.
    z &= _MASK
    z ^= z >> 30
    z = (z * _MIX1) & _MASK
    z ^= z >> 27
    z = (z * _MIX2) & _MASK
    z ^= z >> 31
    return z


def derive_key(*words):
    """Fold integer words into a 64-bit stream key (order-sensitive)."""
    h = 0x8E14A4B3D6F2C901
    for w in words:
        h = _mix64_int(((h ^ (int(w) & _MASK)) * _GOLDEN) & _MASK)
    return h


def hash_u64(key, counters):
    """Hash uint64 counters under a stream key; full-avalanche output."""
    with np.errstate(over="ignore"):
        z = (np.asarray(counters, dtype=np.uint64) ^ np.uint64(key)) * _U_GOLDEN
    return mix64(z)


def pack2(x, y):
    """Pack two coordinates < 2^32 into one counter word."""
    return (np.asarray(x, dtype=np.uint64) << _S32) | np.asarray(y, dtype=np.uint64)


def counter_many(key, coords):
    """Counter for a >=3 dimensional coordinate tuple (per-word folding)."""
    h = np.full(np.broadcast(*coords).shape, np.uint64(key))
    with np.errstate(over="ignore"):
        for c in coords:
            h = mix64((h ^ np.asarray(c, dtype=np.uint64)) * _U_GOLDEN)
    return h


def uniform01(bits):
    """Map hash bits to doubles in [0, 1) (53-bit resolution)."""
    return (bits >> _S11).astype(np.float64) * _INV53


def uniform_open(bits):
    """Doubles in the open interval (0, 1); safe for log and norm_ppf."""
    return (bits >> _S11).astype(np.float64) * _INV53 + _HALF54


# Acklam's inverse normal CDF coefficients (central rational on
# p in [0.02425, 0.97575], tail rational in q = sqrt(-2 log p) outside).
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def norm_ppf(p):
    """Inverse standard normal CDF (Acklam), vectorized, p in (0,1)."""
    p = np.asarray(p, dtype=np.float64)
    scalar = p.ndim == 0
    p = np.atleast_1d(p)
    x = np.empty_like(p)

    lo = p < _P_LOW
    hi = p > 1.0 - _P_LOW
    mid = ~(lo | hi)

    if lo.any():
        q = np.sqrt(-2.0 * np.log(p[lo]))
        x[lo] = ((((( _C[0]*q + _C[1])*q + _C[2])*q + _C[3])*q + _C[4])*q + _C[5]) / \
                (((( _D[0]*q + _D[1])*q + _D[2])*q + _D[3])*q + 1.0)
    if mid.any():
        q = p[mid] - 0.5
        r = q * q
        x[mid] = ((((( _A[0]*r + _A[1])*r + _A[2])*r + _A[3])*r + _A[4])*r + _A[5])*q / \
                 ((((( _B[0]*r + _B[1])*r + _B[2])*r + _B[3])*r + _B[4])*r + 1.0)
    if hi.any():
        q = np.sqrt(-2.0 * np.log(1.0 - p[hi]))
        x[hi] = -((((( _C[0]*q + _C[1])*q + _C[2])*q + _C[3])*q + _C[4])*q + _C[5]) / \
                 (((( _D[0]*q + _D[1])*q + _D[2])*q + _D[3])*q + 1.0)

    return float(x[0]) if scalar else x


def normals(key, counters):
    """Standard normal variates indexed by counters under a stream key."""
    return norm_ppf(uniform_open(hash_u64(key, counters)))
