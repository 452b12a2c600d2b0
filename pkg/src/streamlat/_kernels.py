"""Hot inner loops with a numba path and a pure-numpy path.

Set ``STREAMLAT_DISABLE_NUMBA=1`` (read at import time) to force the numpy
path. Both paths are always importable as ``*_py`` / ``*_jit`` so tests and
``benchmarks/bench_kernels.py`` can compare them directly.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("STREAMLAT_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional extra
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f


USE_NUMBA = HAVE_NUMBA and not _DISABLED


# --------------------------------------------------------------------------
# greedy center-distance matching


def greedy_match_py(dist, order, thresholds):
    """Greedy assignment for several thresholds at once.

    ``dist`` is (P, G); ``order`` lists prediction rows by descending score.
    Returns (T, P) int array with the matched ground-truth column or -1.
    Distance ties resolve to the lowest ground-truth index.
    """
    n_t = thresholds.shape[0]
    n_p, n_g = dist.shape
    out = np.full((n_t, n_p), -1, dtype=np.int64)
    if n_p == 0 or n_g == 0:
        return out
    for ti in range(n_t):
        taken = np.zeros(n_g, dtype=bool)
        thr = thresholds[ti]
        for p in order:
            row = np.where(taken, np.inf, dist[p])
            g = int(np.argmin(row))
            if row[g] <= thr:
                out[ti, p] = g
                taken[g] = True
    return out


@njit(cache=True)
def greedy_match_jit(dist, order, thresholds):
    n_t = thresholds.shape[0]
    n_p, n_g = dist.shape
    out = np.full((n_t, n_p), -1, dtype=np.int64)
    if n_p == 0 or n_g == 0:
        return out
    taken = np.zeros(n_g, dtype=np.bool_)
    for ti in range(n_t):
        taken[:] = False
        thr = thresholds[ti]
        for k in range(order.shape[0]):
            p = order[k]
            best = -1
            best_d = np.inf
            for g in range(n_g):
                if not taken[g] and dist[p, g] < best_d:
                    best_d = dist[p, g]
                    best = g
            if best >= 0 and best_d <= thr:
                out[ti, p] = best
                taken[best] = True
    return out


# --------------------------------------------------------------------------
# k-means assignment step


def kmeans_assign_py(points, centroids):
    """Nearest-centroid labels and total squared distance (ties -> lowest index)."""
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)
    sse = float(d2[np.arange(len(points)), labels].sum())
    return labels.astype(np.int64), sse


@njit(cache=True)
def kmeans_assign_jit(points, centroids):
    n = points.shape[0]
    k = centroids.shape[0]
    dim = points.shape[1]
    labels = np.empty(n, dtype=np.int64)
    sse = 0.0
    for i in range(n):
        best = 0
        best_d = np.inf
        for j in range(k):
            d = 0.0
            for a in range(dim):
                diff = points[i, a] - centroids[j, a]
                d += diff * diff
            if d < best_d:
                best_d = d
                best = j
        labels[i] = best
        sse += best_d
    return labels, sse


# --------------------------------------------------------------------------
# clipped area under the precision envelope


def clipped_pr_area_py(tp_flags, n_gt, min_recall, min_precision):
    """Exact area of ``max(0, envelope(r) - min_precision)/(1 - min_precision)``
    over recall in [min_recall, 1], divided by ``1 - min_recall``.

    ``tp_flags`` must already be sorted by descending score.
    """
    if n_gt == 0 or tp_flags.shape[0] == 0:
        return 0.0
    tp = np.cumsum(tp_flags)
    fp = np.cumsum(1.0 - tp_flags)
    rec = tp / n_gt
    prec = tp / (tp + fp)
    env = np.maximum.accumulate(prec[::-1])[::-1]
    lo = np.concatenate(([0.0], rec[:-1]))
    a = np.clip(lo, min_recall, 1.0)
    b = np.clip(rec, min_recall, 1.0)
    height = np.maximum(env - min_precision, 0.0) / (1.0 - min_precision)
    return float(((b - a) * height).sum() / (1.0 - min_recall))


@njit(cache=True)
def clipped_pr_area_jit(tp_flags, n_gt, min_recall, min_precision):
    n = tp_flags.shape[0]
    if n_gt == 0 or n == 0:
        return 0.0
    rec = np.empty(n)
    prec = np.empty(n)
    tp = 0.0
    fp = 0.0
    for i in range(n):
        if tp_flags[i] > 0.5:
            tp += 1.0
        else:
            fp += 1.0
        rec[i] = tp / n_gt
        prec[i] = tp / (tp + fp)
    env = np.empty(n)
    run = 0.0
    for i in range(n - 1, -1, -1):
        if prec[i] > run:
            run = prec[i]
        env[i] = run
    area = 0.0
    prev = 0.0
    for i in range(n):
        a = min(max(prev, min_recall), 1.0)
        b = min(max(rec[i], min_recall), 1.0)
        h = env[i] - min_precision
        if h > 0.0:
            area += (b - a) * h / (1.0 - min_precision)
        prev = rec[i]
    return area / (1.0 - min_recall)


if USE_NUMBA:
    greedy_match = greedy_match_jit
    kmeans_assign = kmeans_assign_jit
    clipped_pr_area = clipped_pr_area_jit
else:
    greedy_match = greedy_match_py
    kmeans_assign = kmeans_assign_py
    clipped_pr_area = clipped_pr_area_py


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
