"""Hot numeric kernels with a numba path and a pure-numpy path.

``DEEPFMEA_BACKEND=numpy`` forces the fallback; otherwise numba is used
when it imports.  Both paths select the same neighbours (ties at the k-th
distance go to the lower reference index) and accumulate per-feature
contributions in the same order.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _want_numba() -> bool:
    choice = os.environ.get("DEEPFMEA_BACKEND", "numba").strip().lower()
    if choice not in ("numba", "numpy"):
        raise ValueError(f"DEEPFMEA_BACKEND must be 'numba' or 'numpy', got {choice!r}")
    return choice == "numba" and numba is not None


# -- numpy ---------------------------------------------------------------------


def knn_contributions_numpy(queries: np.ndarray, reference: np.ndarray, k: int, chunk: int | None = None):
    """Per-feature mean squared differences to the k nearest reference rows.

    Returns ``(contributions, neighbours)`` with shapes ``(m, d)`` and ``(m, k)``.
    """
    m, d = queries.shape
    n = reference.shape[0]
    if chunk is None:
        # keep the (chunk, n, d) difference block near 16 MB
        chunk = max(1, 2_000_000 // max(1, n * d))
    contrib = np.empty((m, d))
    nbrs = np.empty((m, k), dtype=np.int64)
    for lo in range(0, m, chunk):
        q = queries[lo:lo + chunk]
        diff2 = (q[:, None, :] - reference[None, :, :]) ** 2
        dist = np.zeros((q.shape[0], n))
        for j in range(d):
            dist += diff2[:, :, j]
        for i in range(q.shape[0]):
            row = dist[i]
            if k < n:
                kth = np.partition(row, k - 1)[k - 1]
                cand = np.flatnonzero(row <= kth)
                order = cand[np.argsort(row[cand], kind="stable")][:k]
            else:
                order = np.argsort(row, kind="stable")
            nbrs[lo + i] = order
            acc = np.zeros(d)
            for r in order:
                acc += diff2[i, r]
            contrib[lo + i] = acc / k
    return contrib, nbrs


def count_above_numpy(sorted_scores: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """How many of ``sorted_scores`` (ascending) exceed each threshold."""
    return sorted_scores.size - np.searchsorted(sorted_scores, thresholds, side="right")


# -- numba ---------------------------------------------------------------------

if numba is not None:

    @numba.njit(cache=True)
    def _knn_contributions_nb(queries, reference, k):
        m, d = queries.shape
        n = reference.shape[0]
        contrib = np.empty((m, d))
        nbrs = np.empty((m, k), dtype=np.int64)
        best_d = np.empty(k)
        best_i = np.empty(k, dtype=np.int64)
        for qi in range(m):
            filled = 0
            for r in range(n):
                s = 0.0
                for j in range(d):
                    t = queries[qi, j] - reference[r, j]
                    s += t * t
                if filled < k:
                    pos = filled
                    filled += 1
                elif s < best_d[k - 1]:
                    pos = k - 1
                else:
                    continue
                # shift strictly larger distances right; equal ones keep precedence
                while pos > 0 and best_d[pos - 1] > s:
                    best_d[pos] = best_d[pos - 1]
                    best_i[pos] = best_i[pos - 1]
                    pos -= 1
                best_d[pos] = s
                best_i[pos] = r
            for j in range(d):
                acc = 0.0
                for t in range(k):
                    v = queries[qi, j] - reference[best_i[t], j]
                    acc += v * v
                contrib[qi, j] = acc / k
            for t in range(k):
                nbrs[qi, t] = best_i[t]
        return contrib, nbrs

    @numba.njit(cache=True)
    def _count_above_nb(sorted_scores, thresholds):
        n = sorted_scores.size
        out = np.empty(thresholds.size, dtype=np.int64)
        ascending = True
        for t in range(1, thresholds.size):
            if thresholds[t] < thresholds[t - 1]:
                ascending = False
                break
        if ascending:
            # one merge pass over scores and thresholds
            lo = 0
            for t in range(thresholds.size):
                x = thresholds[t]
                while lo < n and sorted_scores[lo] <= x:
                    lo += 1
                out[t] = n - lo
            return out
        for t in range(thresholds.size):
            x = thresholds[t]
            lo, hi = 0, n
            while lo < hi:
                mid = (lo + hi) // 2
                if sorted_scores[mid] <= x:
                    lo = mid + 1
                else:
                    hi = mid
            out[t] = n - lo
        return out


def knn_contributions_numba(queries: np.ndarray, reference: np.ndarray, k: int):
    if numba is None:  # pragma: no cover
        raise RuntimeError("numba is not available")
    return _knn_contributions_nb(
        np.ascontiguousarray(queries, dtype=np.float64),
        np.ascontiguousarray(reference, dtype=np.float64),
        int(k),
    )


def count_above_numba(sorted_scores: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    if numba is None:  # pragma: no cover
        raise RuntimeError("numba is not available")
    return _count_above_nb(
        np.ascontiguousarray(sorted_scores, dtype=np.float64),
        np.ascontiguousarray(thresholds, dtype=np.float64),
    )


def backend() -> str:
    return "numba" if _want_numba() else "numpy"


def knn_contributions(queries: np.ndarray, reference: np.ndarray, k: int):
    queries = np.asarray(queries, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if queries.ndim != 2 or reference.ndim != 2 or queries.shape[1] != reference.shape[1]:
        raise ValueError(f"shape mismatch: queries {queries.shape}, reference {reference.shape}")
    if not 1 <= k <= reference.shape[0]:
        raise ValueError(f"k={k} outside [1, {reference.shape[0]}]")
    if queries.shape[0] == 0:
        return np.empty((0, queries.shape[1])), np.empty((0, k), dtype=np.int64)
    if _want_numba():
        return knn_contributions_numba(queries, reference, k)
    return knn_contributions_numpy(queries, reference, k)


def count_above(sorted_scores: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    sorted_scores = np.asarray(sorted_scores, dtype=np.float64)
    thresholds = np.asarray(thresholds, dtype=np.float64)
    if _want_numba():
        return count_above_numba(sorted_scores, thresholds)
    return count_above_numpy(sorted_scores, thresholds)
