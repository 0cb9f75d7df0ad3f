"""Hot numeric kernels: counter-based hashing and CSR segment reductions.

Every kernel has a numba ``@njit`` implementation and a pure-numpy fallback.
The active backend is chosen at import time: set ``EPIGRAD_NO_NUMBA=1`` to
force the numpy path (the fallback also engages automatically when numba is
not importable). Both implementations are bit-identical; ``tests/`` and
``benchmarks/run_bench.py`` exercise the pair.
"""

import os

import numpy as np

_PHI = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_K_STEP = np.uint64(0xD1B54A32D192ED03)
_K_SALT = np.uint64(0x8CB92BA72F3D8DD7)
_K_DRAW = np.uint64(0xAEF17502108EF2D9)
_K_IDS = np.uint64(0x9FB21C651E98DF25)

_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)
_INV53 = 1.0 / float(1 << 53)


def _fmix64_np(z):
    z = (z ^ (z >> _U30)) * _M1
    z = (z ^ (z >> _U27)) * _M2
    return z ^ (z >> _U31)


def _stream_base_np(seed, step, salt, draw):
    with np.errstate(over="ignore"):
        h = _fmix64_np(np.uint64(seed) ^ _PHI)
        h = _fmix64_np(h ^ (np.uint64(step) * _PHI + _K_STEP))
        h = _fmix64_np(h ^ (np.uint64(salt) * _PHI + _K_SALT))
        h = _fmix64_np(h ^ (np.uint64(draw) * _PHI + _K_DRAW))
    return h


def _hash_ids_np(base, ids):
    out = ids * _PHI + _K_IDS
    out ^= np.uint64(base)
    return _fmix64_np(out)


def _segment_sum_np(values, offsets, cols):
    n = offsets.shape[0] - 1
    rows = np.repeat(np.arange(n), np.diff(offsets))
    return np.bincount(rows, weights=values[cols], minlength=n)


def _segment_max_np(values, offsets, cols):
    n = offsets.shape[0] - 1
    rows = np.repeat(np.arange(n), np.diff(offsets))
    out = np.full(n, -np.inf)
    np.maximum.at(out, rows, values[cols])
    out[np.diff(offsets) == 0] = 0.0
    return out


try:  # pragma: no cover - exercised indirectly through the dispatch
    if os.environ.get("EPIGRAD_NO_NUMBA", "").strip() not in ("", "0"):
        raise ImportError("numba disabled by EPIGRAD_NO_NUMBA")
    from numba import njit

    @njit(cache=True)
    def _hash_ids_nb(base, ids):
        phi = np.uint64(0x9E3779B97F4A7C15)
        m1 = np.uint64(0xBF58476D1CE4E5B9)
        m2 = np.uint64(0x94D049BB133111EB)
        kids = np.uint64(0x9FB21C651E98DF25)
        out = np.empty(ids.shape[0], dtype=np.uint64)
        for i in range(ids.shape[0]):
            z = (ids[i] * phi + kids) ^ base
            z = (z ^ (z >> np.uint64(30))) * m1
            z = (z ^ (z >> np.uint64(27))) * m2
            out[i] = z ^ (z >> np.uint64(31))
        return out

    @njit(cache=True)
    def _segment_sum_nb(values, offsets, cols):
        n = offsets.shape[0] - 1
        out = np.empty(n, dtype=np.float64)
        for i in range(n):
            acc = 0.0
            for e in range(offsets[i], offsets[i + 1]):
                acc += values[cols[e]]
            out[i] = acc
        return out

    @njit(cache=True)
    def _segment_max_nb(values, offsets, cols):
        n = offsets.shape[0] - 1
        out = np.empty(n, dtype=np.float64)
        for i in range(n):
            if offsets[i] == offsets[i + 1]:
                out[i] = 0.0
                continue
            acc = -np.inf
            for e in range(offsets[i], offsets[i + 1]):
                v = values[cols[e]]
                if v > acc:
                    acc = v
            out[i] = acc
        return out

    BACKEND = "numba"
    _hash_ids_fast = _hash_ids_nb
    _segment_sum_fast = _segment_sum_nb
    _segment_max_fast = _segment_max_nb
except ImportError:
    BACKEND = "numpy"
    _hash_ids_nb = None
    _segment_sum_nb = None
    _segment_max_nb = None
    _hash_ids_fast = _hash_ids_np
    _segment_sum_fast = _segment_sum_np
    _segment_max_fast = _segment_max_np


def hash_ids(base, ids):
    """Hash a uint64 id array against a precombined stream base."""
    return _hash_ids_fast(np.uint64(base), ids)


def segment_sum(values, offsets, cols):
    """out[i] = sum of values[cols[e]] over the CSR row i (0 when empty)."""
    return _segment_sum_fast(values, offsets, cols)


def segment_max(values, offsets, cols):
    """out[i] = max of values[cols[e]] over the CSR row i (0 when empty)."""
    return _segment_max_fast(values, offsets, cols)


def u64_to_unit(h):
    """Map uint64 to float64 in [0, 1)."""
    return (h >> _U11).astype(np.float64) * _INV53


def u64_to_open_unit(h):
    """Map uint64 to float64 strictly inside (0, 1)."""
    return ((h >> _U11).astype(np.float64) + 0.5) * _INV53
