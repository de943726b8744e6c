"""Compiled inner loops for the SVM solver and the random forest.

Everything here must be bit-deterministic: fixed iteration order, an explicit
integer PRNG (splitmix64) instead of library RNGs, no parallel reductions.
Arrays come in as float64 / int64 and results go back as plain ndarrays so the
Python-level model classes stay numba-free.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True)
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _next_u64(state):
    # splitmix64: state advances by the golden-ratio increment, output is the
    # finalizer mix. Returns (new_state, value).
    state = state + _GOLDEN
    return state, _mix64(state)


@njit(cache=True)
def _rand_below(state, n):
    # Modulo bias is < 2**-50 for our n (< 10**4); determinism matters here,
    # statistical perfection does not.
    state, v = _next_u64(state)
    return state, np.int64(v % np.uint64(n))


@njit(cache=True)
def dual_cd_solve(Q, y, C, tol, max_sweeps):
    """One-vs-rest binary SVM subproblem by dual coordinate descent.

    Q is the Gram matrix of the training rows (bias feature included), y is
    +/-1. Sweeps run in fixed index order 0..n-1. After each sweep the duality
    gap is checked against tol * max(1, |primal|). Returns (alpha, dual
    objective per sweep, gap per sweep).
    """
    n = Q.shape[0]
    alpha = np.zeros(n, dtype=np.float64)
    s = np.zeros(n, dtype=np.float64)  # s[j] = sum_i alpha_i y_i Q_ij
    duals = np.empty(max_sweeps, dtype=np.float64)
    gaps = np.empty(max_sweeps, dtype=np.float64)
    n_sweeps = 0
    for sweep in range(max_sweeps):
        for i in range(n):
            qii = Q[i, i]
            if qii <= 0.0:
                continue
            grad = y[i] * s[i] - 1.0
            updated = alpha[i] - grad / qii
            if updated < 0.0:
                updated = 0.0
            elif updated > C:
                updated = C
            delta = updated - alpha[i]
            if delta != 0.0:
                alpha[i] = updated
                step = delta * y[i]
                for j in range(n):
                    s[j] += step * Q[i, j]
        wtw = 0.0
        asum = 0.0
        hinge = 0.0
        for i in range(n):
            wtw += alpha[i] * y[i] * s[i]
            asum += alpha[i]
            margin = 1.0 - y[i] * s[i]
            if margin > 0.0:
                hinge += margin
        dual = asum - 0.5 * wtw
        primal = 0.5 * wtw + C * hinge
        gap = primal - dual
        duals[sweep] = dual
        gaps[sweep] = gap
        n_sweeps = sweep + 1
        bound = abs(primal)
        if bound < 1.0:
            bound = 1.0
        if gap <= tol * bound:
            break
    return alpha, duals[:n_sweeps].copy(), gaps[:n_sweeps].copy()


@njit(cache=True)
def _majority(counts):
    # argmax with ties resolved to the lowest class index
    best = 0
    best_count = counts[0]
    for c in range(1, counts.shape[0]):
        if counts[c] > best_count:
            best = c
            best_count = counts[c]
    return best


@njit(cache=True)
def _build_tree(X, y, rows, n_classes, max_depth, max_features, state,
                feature, threshold, left, right, leaf_class):
    """Grow one CART tree on the given row multiset (bootstrap indices).

    Nodes are stored into the preallocated arrays; returns (n_nodes, state).
    Splits minimise the Gini-weighted child impurity over `max_features`
    features sampled without replacement per node; ties keep the first
    candidate in draw order. Leaf labels are majority votes, ties to the
    lowest class.
    """
    n = rows.shape[0]
    d = X.shape[1]
    idx = rows.copy()
    perm = np.arange(d)
    swaps = np.empty(max_features, dtype=np.int64)
    vals = np.empty(n, dtype=np.float64)
    counts = np.empty(n_classes, dtype=np.int64)
    left_counts = np.empty(n_classes, dtype=np.int64)
    scratch = np.empty(n, dtype=np.int64)

    max_nodes = feature.shape[0]
    # stack entries: (node_id, lo, hi, depth)
    stack = np.empty((max_nodes, 4), dtype=np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    stack[0, 3] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = stack[top, 0]
        lo = stack[top, 1]
        hi = stack[top, 2]
        depth = stack[top, 3]
        node_n = hi - lo

        counts[:] = 0
        for p in range(lo, hi):
            counts[y[idx[p]]] += 1
        majority = _majority(counts)
        pure = counts[majority] == node_n

        if depth >= max_depth or pure or node_n < 2:
            feature[node] = -1
            leaf_class[node] = majority
            continue

        best_score = np.inf
        best_feature = -1
        best_threshold = 0.0
        m = max_features
        if m > d:
            m = d
        for t in range(m):
            state, j = _rand_below(state, d - t)
            j = j + t
            swaps[t] = j
            tmp = perm[t]
            perm[t] = perm[j]
            perm[j] = tmp
            f = perm[t]
            for p in range(node_n):
                vals[p] = X[idx[lo + p], f]
            order = np.argsort(vals[:node_n], kind="mergesort")
            left_counts[:] = 0
            for pos in range(node_n - 1):
                c = y[idx[lo + order[pos]]]
                left_counts[c] += 1
                if vals[order[pos]] == vals[order[pos + 1]]:
                    continue
                nl = pos + 1
                nr = node_n - nl
                sl = 0.0
                sr = 0.0
                for cc in range(n_classes):
                    lc = left_counts[cc]
                    rc = counts[cc] - lc
                    sl += lc * lc
                    sr += rc * rc
                score = (nl - sl / nl) + (nr - sr / nr)
                if score < best_score:
                    best_score = score
                    best_feature = f
                    best_threshold = 0.5 * (vals[order[pos]] + vals[order[pos + 1]])
        # undo the partial Fisher-Yates so every node samples from an
        # identity permutation (node draws depend only on its own randoms)
        for t in range(m - 1, -1, -1):
            j = swaps[t]
            tmp = perm[t]
            perm[t] = perm[j]
            perm[j] = tmp

        if best_feature < 0:
            feature[node] = -1
            leaf_class[node] = majority
            continue

        # stable partition: left block then right block, original order kept
        n_left = 0
        for p in range(lo, hi):
            if X[idx[p], best_feature] <= best_threshold:
                scratch[n_left] = idx[p]
                n_left += 1
        n_right = 0
        for p in range(lo, hi):
            if not (X[idx[p], best_feature] <= best_threshold):
                scratch[n_left + n_right] = idx[p]
                n_right += 1
        for p in range(node_n):
            idx[lo + p] = scratch[p]

        left_id = n_nodes
        right_id = n_nodes + 1
        n_nodes += 2
        feature[node] = best_feature
        threshold[node] = best_threshold
        left[node] = left_id
        right[node] = right_id

        stack[top, 0] = right_id
        stack[top, 1] = lo + n_left
        stack[top, 2] = hi
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = left_id
        stack[top, 1] = lo
        stack[top, 2] = lo + n_left
        stack[top, 3] = depth + 1
        top += 1

    return n_nodes, state


@njit(cache=True)
def fit_forest(X, y, n_classes, n_trees, max_depth, max_features, seed):
    """Bootstrap + build every tree. Tree t's stream depends only on
    (seed, t), so the first k trees of an n-tree forest equal a k-tree forest
    with the same seed."""
    n = X.shape[0]
    max_nodes = 2 * n + 1
    feature = np.full((n_trees, max_nodes), -1, dtype=np.int64)
    threshold = np.zeros((n_trees, max_nodes), dtype=np.float64)
    left = np.zeros((n_trees, max_nodes), dtype=np.int64)
    right = np.zeros((n_trees, max_nodes), dtype=np.int64)
    leaf_class = np.zeros((n_trees, max_nodes), dtype=np.int64)
    n_nodes = np.zeros(n_trees, dtype=np.int64)
    rows = np.empty(n, dtype=np.int64)

    for t in range(n_trees):
        state = _mix64(np.uint64(seed) ^ (_GOLDEN * np.uint64(t + 1)))
        for i in range(n):
            state, r = _rand_below(state, n)
            rows[i] = r
        cnt, state = _build_tree(
            X, y, rows, n_classes, max_depth, max_features, state,
            feature[t], threshold[t], left[t], right[t], leaf_class[t],
        )
        n_nodes[t] = cnt
    return feature, threshold, left, right, leaf_class, n_nodes


@njit(cache=True)
def forest_tree_votes(X, feature, threshold, left, right, leaf_class):
    """Per-tree predicted class for each sample: (n_samples, n_trees) int64."""
    n = X.shape[0]
    n_trees = feature.shape[0]
    out = np.empty((n, n_trees), dtype=np.int64)
    for i in range(n):
        for t in range(n_trees):
            node = 0
            while feature[t, node] >= 0:
                if X[i, feature[t, node]] <= threshold[t, node]:
                    node = left[t, node]
                else:
                    node = right[t, node]
            out[i, t] = leaf_class[t, node]
    return out


@njit(cache=True)
def majority_vote(votes, n_classes, n_trees):
    """Majority over the first n_trees columns; ties to the lowest class."""
    n = votes.shape[0]
    out = np.empty(n, dtype=np.int64)
    counts = np.empty(n_classes, dtype=np.int64)
    for i in range(n):
        counts[:] = 0
        for t in range(n_trees):
            counts[votes[i, t]] += 1
        out[i] = _majority(counts)
    return out
