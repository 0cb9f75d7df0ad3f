"""Counter-based random streams keyed by (seed, id, step, stream name, draw).

Draws are pure functions of their key, so any processing order of agents (or
any partitioning across workers) produces the same values. Distinct substeps
get distinct streams via a salt hashed from the stream name.
"""

import numpy as np

from ._kernels import _stream_base_np, hash_ids, u64_to_open_unit, u64_to_unit

_FNV_OFFSET = np.uint64(0xCBF29CE484222325)
_FNV_PRIME = np.uint64(0x100000001B3)


def stream_salt(name: str) -> int:
    """FNV-1a hash of a stream name, used as the salt key component."""
    h = _FNV_OFFSET
    with np.errstate(over="ignore"):
        for b in name.encode("utf-8"):
            h = (h ^ np.uint64(b)) * _FNV_PRIME
    return int(h)


def _as_id_array(ids):
    if np.isscalar(ids):
        return np.array([ids], dtype=np.uint64), True
    arr = np.asarray(ids)
    if arr.dtype != np.uint64:
        arr = arr.astype(np.uint64)
    return arr, False


def raw_u64(seed, ids, step, salt, draw=0):
    """Keyed uint64 draws, one per id."""
    base = _stream_base_np(seed, step, salt, draw)
    arr, scalar = _as_id_array(ids)
    out = hash_ids(base, arr)
    return out[0] if scalar else out


def uniform(seed, ids, step, salt, draw=0):
    """Keyed float64 draws in [0, 1), one per id."""
    out = u64_to_unit(raw_u64(seed, _as_id_array(ids)[0], step, salt, draw))
    return float(out[0]) if np.isscalar(ids) else out


def uniform_open(seed, ids, step, salt, draw=0):
    """Keyed float64 draws strictly inside (0, 1); safe under log transforms."""
    out = u64_to_open_unit(raw_u64(seed, _as_id_array(ids)[0], step, salt, draw))
    return float(out[0]) if np.isscalar(ids) else out


def choose_k_by_hash(seed, n, k, salt):
    """Deterministic, order-invariant choice of k ids out of range(n).

    Ranks ids by their keyed hash and keeps the k smallest, so the selection
    is a pure function of (seed, salt) and invariant to processing order.
    """
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    h = raw_u64(seed, np.arange(n, dtype=np.uint64), 0, salt)
    return np.sort(np.argsort(h, kind="stable")[:k]).astype(np.int64)
