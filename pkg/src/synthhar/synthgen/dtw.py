"""Dynamic time warping with pinned endpoints.

Local cost is the squared difference; the alignment cost is its sum along
the path. Steps are (1, 0), (0, 1) and (1, 1), unweighted.
"""

from __future__ import annotations

from typing import NamedTuple

import numba
import numpy as np

from ..errors import ConfigError


class DTWResult(NamedTuple):
    cost: float
    path: np.ndarray  # (L, 2) int array of (i, j) index pairs


@numba.njit(cache=True, nogil=True)
def _accumulate(a, b):
    n, m = a.shape[0], b.shape[0]
    D = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            d = a[i] - b[j]
            c = d * d
            if i == 0 and j == 0:
                D[i, j] = c
            elif i == 0:
                D[i, j] = c + D[i, j - 1]
            elif j == 0:
                D[i, j] = c + D[i - 1, j]
            else:
                best = D[i - 1, j - 1]
                if D[i - 1, j] < best:
                    best = D[i - 1, j]
                if D[i, j - 1] < best:
                    best = D[i, j - 1]
                D[i, j] = c + best
    return D


@numba.njit(cache=True, nogil=True)
def _backtrack(D):
    n, m = D.shape
    path = np.empty((n + m - 1, 2), dtype=np.int64)
    i, j = n - 1, m - 1
    k = 0
    path[k, 0] = i
    path[k, 1] = j
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag = D[i - 1, j - 1]
            up = D[i - 1, j]
            left = D[i, j - 1]
            # diagonal preferred on ties, then advancing in the first series
            if diag <= up and diag <= left:
                i -= 1
                j -= 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
        k += 1
        path[k, 0] = i
        path[k, 1] = j
    return path[k::-1].copy()


@numba.njit(cache=True, nogil=True)
def dtw_cost_kernel(a, b):
    """Alignment cost only, in O(len(b)) memory."""
    m = b.shape[0]
    prev = np.empty(m)
    cur = np.empty(m)
    for i in range(a.shape[0]):
        for j in range(m):
            d = a[i] - b[j]
            c = d * d
            if i == 0 and j == 0:
                cur[j] = c
            elif i == 0:
                cur[j] = c + cur[j - 1]
            elif j == 0:
                cur[j] = c + prev[j]
            else:
                best = prev[j - 1]
                if prev[j] < best:
                    best = prev[j]
                if cur[j - 1] < best:
                    best = cur[j - 1]
                cur[j] = c + best
        prev, cur = cur, prev
    return prev[m - 1]


@numba.njit(cache=True, nogil=True)
def dtw_path_kernel(a, b):
    D = _accumulate(a, b)
    return D[-1, -1], _backtrack(D)


def _as_series(x, name) -> np.ndarray:
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ConfigError(f"{name} must be one-dimensional")
    if arr.size == 0:
        raise ConfigError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} contains non-finite values")
    return arr


def dtw(a, b) -> DTWResult:
    """Optimal alignment of two scalar sequences.

    >>> dtw([0.0, 0.0], [1.0, 1.0]).cost
    2.0
    """
    a = _as_series(a, "a")
    b = _as_series(b, "b")
    cost, path = dtw_path_kernel(a, b)
    return DTWResult(float(cost), path)


def dtw_cost(a, b) -> float:
    return float(dtw_cost_kernel(_as_series(a, "a"), _as_series(b, "b")))


def path_cost(a, b, path) -> float:
    """Cost of a given warping path (no optimality assumed)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    path = np.asarray(path)
    return float(np.sum((a[path[:, 0]] - b[path[:, 1]]) ** 2))


def is_admissible(path, n: int, m: int) -> bool:
    """Check endpoint pinning, unit steps and monotonicity."""
    path = np.asarray(path)
    if path.ndim != 2 or path.shape[1] != 2 or len(path) == 0:
        return False
    if tuple(path[0]) != (0, 0) or tuple(path[-1]) != (n - 1, m - 1):
        return False
    steps = np.diff(path, axis=0)
    ok = {(1, 0), (0, 1), (1, 1)}
    return all(tuple(s) in ok for s in steps)
