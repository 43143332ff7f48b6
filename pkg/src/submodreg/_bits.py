"""Bitmask helpers for subsets of {0,...,p-1}.

Subsets cross the public API as boolean numpy arrays; internally the
exhaustive routines work on integer bitmasks (bit k set <=> element k in
the subset).
"""

import numpy as np


def as_mask(a, p):
    """Coerce ``a`` to a boolean mask of length p (indices or bools)."""
    arr = np.asarray(a)
    if arr.dtype == bool:
        if arr.shape != (p,):
            raise ValueError(f"mask has length {arr.shape}, expected ({p},)")
        return arr
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError("subset must be a 1-d index list or boolean mask")
    mask = np.zeros(p, dtype=bool)
    if arr.size:
        idx = arr.astype(np.int64)
        if idx.min() < 0 or idx.max() >= p:
            raise ValueError("subset index out of range")
        mask[idx] = True
    return mask


def mask_to_int(mask):
    m = 0
    for k in np.flatnonzero(mask):
        m |= 1 << int(k)
    return m


def int_to_mask(m, p):
    return (m >> np.arange(p)) & 1 == 1


def popcounts(p):
    """|A| for every bitmask 0..2^p-1, as an int64 array."""
    n = 1 << p
    out = np.zeros(n, dtype=np.int64)
    for k in range(p):
        out += (np.arange(n) >> k) & 1
    return out


def submasks(m):
    """All non-empty proper sub-bitmasks of bitmask m."""
    sub = (m - 1) & m
    while sub:
        yield sub
        sub = (sub - 1) & m
