"""CART regression trees compiled with numba.

Splits scan every threshold of every feature and keep the one with the
smallest summed child SSE (equivalently the weighted child variance).
Thresholds are midpoints between consecutive distinct values; rows with
``x <= threshold`` go left.  Ties (within round-off) keep the first
candidate in (feature, threshold) order.  Leaves hold the mean target of their rows.
"""

import numpy as np
from numba import njit

LEAF = -1


@njit(cache=True)
def _node_sse(y, idx, start, end):
    n = end - start
    mean = 0.0
    for i in range(start, end):
        mean += y[idx[i]]
    mean /= n
    sse = 0.0
    for i in range(start, end):
        d = y[idx[i]] - mean
        sse += d * d
    return mean, sse


@njit(cache=True)
def _best_split(X, y, idx, start, end):
    n = end - start
    n_features = X.shape[1]
    best_feature = -1
    best_threshold = 0.0
    best_cost = np.inf
    xs = np.empty(n)
    ys = np.empty(n)
    # a later candidate must beat the best by more than round-off to win a tie
    scale = 0.0
    for i in range(start, end):
        scale += y[idx[i]] * y[idx[i]]
    tol = 1e-10 * scale
    for f in range(n_features):
        for i in range(n):
            xs[i] = X[idx[start + i], f]
        order = np.argsort(xs, kind="mergesort")
        total = 0.0
        total_sq = 0.0
        for i in range(n):
            v = y[idx[start + order[i]]]
            ys[i] = v
            total += v
            total_sq += v * v
        left = 0.0
        left_sq = 0.0
        for i in range(n - 1):
            left += ys[i]
            left_sq += ys[i] * ys[i]
            lo = xs[order[i]]
            hi = xs[order[i + 1]]
            if not lo < hi:
                continue
            nl = i + 1
            nr = n - nl
            right = total - left
            right_sq = total_sq - left_sq
            cost = (left_sq - left * left / nl) + (right_sq - right * right / nr)
            if cost < best_cost - tol:
                best_cost = cost
                best_feature = f
                mid = 0.5 * (lo + hi)
                best_threshold = mid if mid < hi else lo
    return best_feature, best_threshold


@njit(cache=True)
def build_tree(X, y, sample_idx, max_depth):
    """Grow a tree on rows ``sample_idx`` (repeats allowed); ``max_depth < 0`` means unlimited."""
    n = sample_idx.shape[0]
    cap = 2 * n + 1
    feature = np.full(cap, LEAF, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, LEAF, dtype=np.int64)
    right = np.full(cap, LEAF, dtype=np.int64)
    value = np.zeros(cap)

    idx = sample_idx.copy()
    tmp = np.empty(n, dtype=np.int64)
    # stack of (node, start, end, depth)
    stack = np.empty((cap, 4), dtype=np.int64)
    top = 0
    stack[top, 0] = 0
    stack[top, 1] = 0
    stack[top, 2] = n
    stack[top, 3] = 0
    top += 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]

        mean, sse = _node_sse(y, idx, start, end)
        value[node] = mean
        if end - start < 2 or sse <= 0.0 or (max_depth >= 0 and depth >= max_depth):
            continue
        f, thr = _best_split(X, y, idx, start, end)
        if f < 0:
            continue

        # stable partition of idx[start:end]
        nl = 0
        for i in range(start, end):
            if X[idx[i], f] <= thr:
                tmp[nl] = idx[i]
                nl += 1
        k = nl
        for i in range(start, end):
            if not X[idx[i], f] <= thr:
                tmp[k] = idx[i]
                k += 1
        for i in range(end - start):
            idx[start + i] = tmp[i]

        feature[node] = f
        threshold[node] = thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        # push right first so the left subtree is numbered depth-first
        stack[top, 0] = n_nodes + 1
        stack[top, 1] = start + nl
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = n_nodes
        stack[top, 1] = start
        stack[top, 2] = start + nl
        stack[top, 3] = depth + 1
        top += 1
        n_nodes += 2

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy())


@njit(cache=True)
def predict_tree(feature, threshold, left, right, value, X):
    out = np.empty(X.shape[0])
    for r in range(X.shape[0]):
        node = 0
        while feature[node] != LEAF:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = value[node]
    return out


@njit(cache=True)
def predict_forest(features, thresholds, lefts, rights, values, offsets, X):
    """Mean over trees stored back to back; tree t spans offsets[t]:offsets[t+1]."""
    n_trees = offsets.shape[0] - 1
    out = np.zeros(X.shape[0])
    for t in range(n_trees):
        o = offsets[t]
        for r in range(X.shape[0]):
            node = 0
            while features[o + node] != LEAF:
                if X[r, features[o + node]] <= thresholds[o + node]:
                    node = lefts[o + node]
                else:
                    node = rights[o + node]
            out[r] += values[o + node]
    return out / n_trees


class RegressionTree:
    """One fitted CART tree."""

    def __init__(self, max_depth=None):
        self.max_depth = max_depth
        self.nodes = None

    def fit(self, X, y, sample_idx=None):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.float64)
        if sample_idx is None:
            sample_idx = np.arange(X.shape[0], dtype=np.int64)
        depth = -1 if self.max_depth is None else int(self.max_depth)
        self.nodes = build_tree(X, y, np.asarray(sample_idx, dtype=np.int64), depth)
        return self

    @property
    def node_count(self):
        return len(self.nodes[0])

    def predict(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        return predict_tree(*self.nodes, X)


def stack_trees(trees):
    """Concatenate node arrays of several trees for :func:`predict_forest`."""
    parts = list(zip(*(t.nodes for t in trees)))
    offsets = np.zeros(len(trees) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([t.node_count for t in trees])
    return tuple(np.concatenate(p) for p in parts) + (offsets,)
