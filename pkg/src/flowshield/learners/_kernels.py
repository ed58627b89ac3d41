"""Compiled inner loops: exact greedy tree growth, ensemble traversal, KNN scan.

Everything here is nopython numba and releases the GIL, so callers may run
independent trees or stream shards on worker threads. Reductions run in a
fixed order; results do not depend on how work is scheduled.
"""
import numpy as np
from numba import njit

GINI = 0
NEWTON = 1

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True, nogil=True)
def splitmix64(x):
    z = x + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def presort(Xt, active):
    """Per-feature stable ordering of the ``active`` rows by value."""
    m = Xt.shape[0]
    n = active.shape[0]
    out = np.empty((m, n), dtype=np.int64)
    vals = np.empty(n, dtype=np.float64)
    for f in range(m):
        for i in range(n):
            vals[i] = Xt[f, active[i]]
        order = np.argsort(vals, kind="mergesort")
        for i in range(n):
            out[f, i] = active[order[i]]
    return out


@njit(cache=True, nogil=True)
def _midpoint(a, b):
    t = a * 0.5 + b * 0.5
    if t >= b or t < a:
        t = a
    return t


@njit(cache=True, nogil=True)
def build_tree(Xt, sorted_idx, cnt, s1, s2, criterion, max_depth, min_leaf,
               min_child_weight, lam, gamma, max_features, feat_ids, seed, capacity):
    """Grow one binary tree by exhaustive greedy search over midpoint thresholds.

    ``sorted_idx`` (features x active rows) is consumed: its segments are
    stably partitioned as nodes split. Row statistics:

    * GINI: ``s1`` = sample weight, ``s2`` = weight * label. Gain is the
      weighted Gini decrease; leaf value is the weighted class-1 fraction.
    * NEWTON: ``s1`` = hessian, ``s2`` = gradient. Gain is
      1/2 [GL^2/(HL+lam) + GR^2/(HR+lam) - G^2/(H+lam)] - gamma; leaf value
      is -G/(H+lam).

    ``cnt`` holds row multiplicities used for ``min_leaf``. Candidate
    features at a node are visited in order of a hash of (seed, node,
    feature id) and the search stops after ``max_features`` non-constant
    ones. Ties in gain go to the candidate visited first, then the lower
    threshold: with ``max_features >= m`` that is the lower feature index;
    under sampling it is the hash order, which depends on feature ids only,
    so permuting columns permutes the tree. Rows with ``x > threshold`` go
    right.
    """
    m = Xt.shape[0]
    n_active = sorted_idx.shape[1]
    n_rows = Xt.shape[1]

    feature = np.full(capacity, -1, dtype=np.int64)
    threshold = np.zeros(capacity, dtype=np.float64)
    left = np.full(capacity, -1, dtype=np.int64)
    right = np.full(capacity, -1, dtype=np.int64)
    value = np.zeros(capacity, dtype=np.float64)
    weight = np.zeros(capacity, dtype=np.float64)
    count = np.zeros(capacity, dtype=np.float64)
    impurity = np.zeros(capacity, dtype=np.float64)

    st_node = np.empty(capacity, dtype=np.int64)
    st_start = np.empty(capacity, dtype=np.int64)
    st_end = np.empty(capacity, dtype=np.int64)
    st_depth = np.empty(capacity, dtype=np.int64)
    goleft = np.zeros(n_rows, dtype=np.uint8)
    buf = np.empty(n_active, dtype=np.int64)
    keys = np.empty(m, dtype=np.uint64)

    n_nodes = 1
    sp = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n_active
    st_depth[0] = 0
    sp = 1

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        start = st_start[sp]
        end = st_end[sp]
        depth = st_depth[sp]

        C = 0.0
        S1 = 0.0
        S2 = 0.0
        for i in range(start, end):
            r = sorted_idx[0, i]
            C += cnt[r]
            S1 += s1[r]
            S2 += s2[r]
        count[node] = C
        weight[node] = S1
        if criterion == GINI:
            p = S2 / S1 if S1 > 0.0 else 0.0
            value[node] = p
            impurity[node] = 1.0 - p * p - (1.0 - p) * (1.0 - p)
            if S2 <= 0.0 or S2 >= S1:
                continue
        else:
            value[node] = -S2 / (S1 + lam)
        if depth >= max_depth or C < 2.0 * min_leaf or end - start < 2:
            continue
        if n_nodes + 2 > capacity:
            continue

        if max_features < m:
            for f in range(m):
                keys[f] = splitmix64(seed ^ splitmix64(np.uint64(node) ^ feat_ids[f]))
            order = np.argsort(keys, kind="mergesort")
        else:
            order = np.arange(m)

        if criterion == GINI:
            parent_score = (S2 * S2 + (S1 - S2) * (S1 - S2)) / S1
        else:
            parent_score = S2 * S2 / (S1 + lam)

        best_gain = -np.inf
        best_f = -1
        best_thr = 0.0
        evaluated = 0
        for t in range(m):
            f = order[t]
            lo = Xt[f, sorted_idx[f, start]]
            hi = Xt[f, sorted_idx[f, end - 1]]
            if not (hi > lo):
                continue
            evaluated += 1
            cL = 0.0
            aL = 0.0
            bL = 0.0
            for i in range(start, end - 1):
                r = sorted_idx[f, i]
                cL += cnt[r]
                aL += s1[r]
                bL += s2[r]
                x = Xt[f, r]
                xn = Xt[f, sorted_idx[f, i + 1]]
                if not (xn > x):
                    continue
                cR = C - cL
                if cR < min_leaf:
                    break
                if cL < min_leaf:
                    continue
                aR = S1 - aL
                bR = S2 - bL
                if criterion == GINI:
                    if aL <= 0.0 or aR <= 0.0:
                        continue
                    gain = ((bL * bL + (aL - bL) * (aL - bL)) / aL
                            + (bR * bR + (aR - bR) * (aR - bR)) / aR - parent_score)
                else:
                    if aL < min_child_weight or aR < min_child_weight:
                        continue
                    gain = 0.5 * (bL * bL / (aL + lam) + bR * bR / (aR + lam) - parent_score) - gamma
                if gain > best_gain:
                    best_gain = gain
                    best_f = f
                    best_thr = _midpoint(x, xn)
            if evaluated >= max_features:
                break

        if best_f < 0:
            continue
        if criterion == NEWTON and not (best_gain > 0.0):
            continue

        n_left = 0
        for i in range(start, end):
            r = sorted_idx[best_f, i]
            if Xt[best_f, r] <= best_thr:
                goleft[r] = 1
                n_left += 1
            else:
                goleft[r] = 0
        for f in range(m):
            a = 0
            b = 0
            for i in range(start, end):
                r = sorted_idx[f, i]
                if goleft[r] == 1:
                    sorted_idx[f, start + a] = r
                    a += 1
                else:
                    buf[b] = r
                    b += 1
            for i in range(b):
                sorted_idx[f, start + a + i] = buf[i]

        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lid
        right[node] = rid
        mid = start + n_left
        st_node[sp] = rid
        st_start[sp] = mid
        st_end[sp] = end
        st_depth[sp] = depth + 1
        sp += 1
        st_node[sp] = lid
        st_start[sp] = start
        st_end[sp] = mid
        st_depth[sp] = depth + 1
        sp += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), weight[:n_nodes].copy(),
            count[:n_nodes].copy(), impurity[:n_nodes].copy())


@njit(cache=True, nogil=True)
def ensemble_sum(feature, threshold, left, right, value, roots, X, out):
    """out[i] = sum over trees (in order) of the leaf value reached by row i."""
    n = X.shape[0]
    n_trees = roots.shape[0]
    for i in range(n):
        acc = 0.0
        for t in range(n_trees):
            node = roots[t]
            while feature[node] >= 0:
                if X[i, feature[node]] > threshold[node]:
                    node = right[node]
                else:
                    node = left[node]
            acc += value[node]
        out[i] = acc


@njit(cache=True, nogil=True)
def leaf_ids(feature, threshold, left, right, root, X, out):
    for i in range(X.shape[0]):
        node = root
        while feature[node] >= 0:
            if X[i, feature[node]] > threshold[node]:
                node = right[node]
            else:
                node = left[node]
        out[i] = node


@njit(cache=True, nogil=True)
def linear_margin(X, slots, means, stds, beta, out):
    """out[i] = beta[0] + sum_j beta[j+1] * (X[i, slots[j]] - means[j]) / stds[j]."""
    p = means.shape[0]
    for i in range(X.shape[0]):
        acc = beta[0]
        for j in range(p):
            acc += beta[j + 1] * ((X[i, slots[j]] - means[j]) / stds[j])
        out[i] = acc


@njit(cache=True, nogil=True)
def knn_scan(train, queries, k, nn_index, nn_dist2):
    """Exact k nearest training rows per query by squared Euclidean distance.

    Neighbors are kept sorted by distance; an equal distance never displaces
    an earlier (lower-index) training row.
    """
    n_train, d = train.shape
    for q in range(queries.shape[0]):
        filled = 0
        for i in range(n_train):
            acc = 0.0
            for j in range(d):
                diff = queries[q, j] - train[i, j]
                acc += diff * diff
            if filled < k:
                pos = filled
                filled += 1
            elif acc < nn_dist2[q, k - 1]:
                pos = k - 1
            else:
                continue
            while pos > 0 and nn_dist2[q, pos - 1] > acc:
                nn_dist2[q, pos] = nn_dist2[q, pos - 1]
                nn_index[q, pos] = nn_index[q, pos - 1]
                pos -= 1
            nn_dist2[q, pos] = acc
            nn_index[q, pos] = i
