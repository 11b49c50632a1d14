"""Counting kernels for marginal tables.

Two interchangeable backends are provided: numba-compiled loops and plain
numpy (``bincount`` based). The backend is picked once at import time from the
``DDSSP_BACKEND`` environment variable (``numba`` or ``numpy``); when unset,
numba is used if it imports cleanly. Both backends return identical integer
counts, which the test-suite checks directly.
"""

from __future__ import annotations

import os

import numpy as np

_requested = os.environ.get("DDSSP_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise ImportError(f"DDSSP_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

try:
    if _requested == "numpy":
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    if _requested == "numba":
        raise
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


def _pair_layout(sizes: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    d = len(sizes)
    js, ks = np.triu_indices(d, k=1)
    cells = sizes[js] * sizes[ks]
    offsets = np.zeros(len(cells) + 1, dtype=np.int64)
    np.cumsum(cells, out=offsets[1:])
    return js.astype(np.int64), ks.astype(np.int64), offsets, int(offsets[-1])


# -- numpy path -------------------------------------------------------------


def _joint_counts_numpy(records, sizes):
    flat = np.ravel_multi_index(tuple(records.T), tuple(sizes)) if records.shape[0] else np.zeros(0, np.int64)
    return np.bincount(flat, minlength=int(np.prod(sizes))).astype(np.int64)


def _pair_counts_numpy(records, sizes, js, ks, offsets, total):
    out = np.zeros(total, dtype=np.int64)
    for q in range(len(js)):
        j, k = js[q], ks[q]
        flat = records[:, j] * sizes[k] + records[:, k]
        out[offsets[q] : offsets[q + 1]] = np.bincount(flat, minlength=sizes[j] * sizes[k])
    return out


# -- numba path -------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _joint_counts_numba(records, sizes):
        n, r = records.shape
        total = 1
        for a in range(r):
            total *= sizes[a]
        out = np.zeros(total, dtype=np.int64)
        for i in range(n):
            idx = 0
            for a in range(r):
                idx = idx * sizes[a] + records[i, a]
            out[idx] += 1
        return out

    @njit(cache=True)
    def _pair_counts_numba(records, sizes, js, ks, offsets, total):
        n = records.shape[0]
        npairs = js.shape[0]
        out = np.zeros(total, dtype=np.int64)
        for i in range(n):
            for q in range(npairs):
                j = js[q]
                k = ks[q]
                out[offsets[q] + records[i, j] * sizes[k] + records[i, k]] += 1
        return out


def joint_counts(records: np.ndarray, sizes: np.ndarray, backend: str | None = None) -> np.ndarray:
    """Row-major contingency counts of ``records`` (n x r) over ``sizes`` (r,)."""
    records = np.ascontiguousarray(records, dtype=np.int64)
    sizes = np.ascontiguousarray(sizes, dtype=np.int64)
    if (backend or BACKEND) == "numba":
        return _joint_counts_numba(records, sizes)
    return _joint_counts_numpy(records, sizes)


def pair_counts(records: np.ndarray, sizes: np.ndarray, backend: str | None = None) -> dict[tuple[int, int], np.ndarray]:
    """Counts for every attribute pair j < k in a single sweep over the records.

    Returns a dict mapping ``(j, k)`` to a flat row-major vector of length
    ``sizes[j] * sizes[k]``.
    """
    records = np.ascontiguousarray(records, dtype=np.int64)
    sizes = np.ascontiguousarray(sizes, dtype=np.int64)
    js, ks, offsets, total = _pair_layout(sizes)
    if (backend or BACKEND) == "numba":
        flat = _pair_counts_numba(records, sizes, js, ks, offsets, total)
    else:
        flat = _pair_counts_numpy(records, sizes, js, ks, offsets, total)
    return {(int(js[q]), int(ks[q])): flat[offsets[q] : offsets[q + 1]] for q in range(len(js))}
