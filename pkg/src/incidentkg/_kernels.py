"""Pairwise distance kernels for title-vector clustering.

The O(n^2 * d) distance matrices behind DBSCAN neighborhoods and k-distance
profiles are the only numeric hot loops in the package. They are JIT-compiled
with numba when it is importable; setting ``INCIDENTKG_DISABLE_NUMBA=1``
forces the pure-numpy fallback. Both paths share the same conventions:

* matrices are symmetric with a zero diagonal;
* cosine distance is 1 - cosine similarity, with zero-norm vectors defined
  to have similarity 0 against everything else.

``benchmarks/bench_kernels.py`` times the two backends against each other.
"""

from __future__ import annotations

import os

import numpy as np

METRICS = ("euclidean", "cosine-distance")

_CHUNK = 256


def _numba_disabled() -> bool:
    return os.environ.get("INCIDENTKG_DISABLE_NUMBA", "").strip() not in ("", "0")


def pairwise_euclidean_numpy(x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    out = np.empty((n, n), dtype=np.float64)
    for i0 in range(0, n, _CHUNK):
        block = x[i0 : i0 + _CHUNK]
        diff = block[:, None, :] - x[None, :, :]
        out[i0 : i0 + _CHUNK] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(out, 0.0)
    return out


def pairwise_cosine_numpy(x: np.ndarray) -> np.ndarray:
    norms = np.sqrt(np.einsum("ij,ij->i", x, x))
    unit = np.zeros_like(x)
    nonzero = norms > 0.0
    unit[nonzero] = x[nonzero] / norms[nonzero, None]
    dist = 1.0 - unit @ unit.T
    np.clip(dist, 0.0, 2.0, out=dist)
    np.fill_diagonal(dist, 0.0)
    return dist


try:  # pragma: no cover - exercised indirectly through the dispatch table
    from numba import njit

    @njit(cache=True)
    def pairwise_euclidean_numba(x):
        n, d = x.shape
        out = np.zeros((n, n), dtype=np.float64)
        for i in range(n):
            for j in range(i + 1, n):
                acc = 0.0
                for k in range(d):
                    diff = x[i, k] - x[j, k]
                    acc += diff * diff
                value = np.sqrt(acc)
                out[i, j] = value
                out[j, i] = value
        return out

    @njit(cache=True)
    def pairwise_cosine_numba(x):
        n, d = x.shape
        norms = np.empty(n, dtype=np.float64)
        for i in range(n):
            acc = 0.0
            for k in range(d):
                acc += x[i, k] * x[i, k]
            norms[i] = np.sqrt(acc)
        out = np.zeros((n, n), dtype=np.float64)
        for i in range(n):
            for j in range(i + 1, n):
                if norms[i] > 0.0 and norms[j] > 0.0:
                    dot = 0.0
                    for k in range(d):
                        dot += x[i, k] * x[j, k]
                    value = 1.0 - dot / (norms[i] * norms[j])
                else:
                    value = 1.0
                if value < 0.0:
                    value = 0.0
                elif value > 2.0:
                    value = 2.0
                out[i, j] = value
                out[j, i] = value
        return out

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    pairwise_euclidean_numba = None
    pairwise_cosine_numba = None
    _HAVE_NUMBA = False

BACKEND = "numba" if (_HAVE_NUMBA and not _numba_disabled()) else "numpy"

if BACKEND == "numba":
    _DISPATCH = {
        "euclidean": pairwise_euclidean_numba,
        "cosine-distance": pairwise_cosine_numba,
    }
else:
    _DISPATCH = {
        "euclidean": pairwise_euclidean_numpy,
        "cosine-distance": pairwise_cosine_numpy,
    }


def pairwise_distances(x: np.ndarray, metric: str) -> np.ndarray:
    """Full symmetric distance matrix for the active backend."""
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("expected a 2-D array of row vectors")
    if x.shape[0] == 0:
        return np.zeros((0, 0), dtype=np.float64)
    return _DISPATCH[metric](x)
