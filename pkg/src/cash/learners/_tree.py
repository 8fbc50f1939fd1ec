"""Compiled growing loop for weighted classification trees.

Splits minimize the summed (weight-scaled) impurity of the two children.
Numeric features split at midpoints between distinct sorted values;
categorical features split one level against the rest.  Ties go to the
earlier numeric feature, then the smaller threshold, then categorical
features in order.
"""

import numba
import numpy as np

GINI, ENTROPY = 0, 1


@numba.njit(cache=True)
def _impurity(c, criterion):
    tot = 0.0
    for v in c:
        tot += v
    if tot <= 0.0:
        return 0.0
    s = 0.0
    if criterion == GINI:
        for v in c:
            p = v / tot
            s += p * p
        return tot * (1.0 - s)
    for v in c:
        if v > 0.0:
            p = v / tot
            s -= p * np.log2(p)
    return tot * s


def dense_ranks(X):
    """Per-column dense ranks of ``X`` and the number of distinct values."""
    R = np.empty(X.shape, np.int64)
    n_ranks = np.zeros(X.shape[1], np.int64)
    for f in range(X.shape[1]):
        uniq, R[:, f] = np.unique(X[:, f], return_inverse=True)
        n_ranks[f] = len(uniq)
    return R, n_ranks


@numba.njit(cache=True)
def _stable_partition(seg, X, f, t, cat, buf):
    """Reorder ``seg`` in place, rows going left first; returns the left count."""
    nl = 0
    for r in seg:
        x = X[r, f]
        if (x == t) if cat else (x <= t):
            buf[nl] = r
            nl += 1
    nr = nl
    for r in seg:
        x = X[r, f]
        if not ((x == t) if cat else (x <= t)):
            buf[nr] = r
            nr += 1
    seg[:] = buf[: seg.shape[0]]
    return nl


@numba.njit(cache=True)
def _counting_order(ranks, n_ranks):
    """Rows sorted by integer rank; equal ranks keep row order."""
    counts = np.zeros(n_ranks + 1, np.int64)
    for r in ranks:
        counts[r + 1] += 1
    for i in range(n_ranks):
        counts[i + 1] += counts[i]
    out = np.empty(ranks.shape[0], np.int64)
    for i in range(ranks.shape[0]):
        r = ranks[i]
        out[counts[r]] = i
        counts[r] += 1
    return out


@numba.njit(cache=True)
def grow(X, y, W, R, n_ranks, is_cat, n_levels, criterion, max_depth, min_leaf, max_features,
         seed, cap):
    """Grow one tree over all rows of ``X``.

    ``W[r, y[r]]`` is the weight of row r; other entries are ignored.
    ``R[:, f]`` ranks the rows by feature f (ties share a rank, all below
    ``n_ranks[f]``), which orders numeric columns without comparison sorts.  ``cap`` is the
    number of instance visits allowed (negative for no cap); growth stops as
    soon as it is exceeded and ``used`` reports how far it got.

    Every node owns the segment [lo, hi) of ``rows`` (original row order)
    and of each numeric feature's presorted row list; stable partitioning
    keeps those segments sorted, so nodes never sort.

    Returns ``(feature, threshold, is_cat, left, right, value, used)`` with
    node arrays trimmed to the number of nodes grown.
    """
    n, d = X.shape
    C = W.shape[1]
    max_nodes = 2 * n + 1
    feature = np.full(max_nodes, -1, np.int64)
    threshold = np.zeros(max_nodes)
    node_cat = np.zeros(max_nodes, np.bool_)
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    value = np.zeros((max_nodes, C))
    if max_features < d:
        np.random.seed(seed)

    rows = np.arange(n)
    order = np.empty((d, n), np.int64)
    for f in range(d):
        if not is_cat[f]:
            order[f] = _counting_order(R[:, f], n_ranks[f])
    buf = np.empty(n, np.int64)
    st_node = np.empty(max_nodes, np.int64)
    st_lo = np.empty(max_nodes, np.int64)
    st_hi = np.empty(max_nodes, np.int64)
    st_depth = np.empty(max_nodes, np.int64)
    st_node[0], st_lo[0], st_hi[0], st_depth[0] = 0, 0, n, 0
    sp = 1
    n_nodes = 1
    used = 0
    tot = np.zeros(C)
    cw = np.zeros(C)
    rest = np.zeros(C)
    while sp > 0:
        sp -= 1
        node, lo, hi, depth = st_node[sp], st_lo[sp], st_hi[sp], st_depth[sp]
        m = hi - lo
        used += m
        if cap >= 0 and used > cap:
            break
        tot[:] = 0.0
        for i in range(lo, hi):
            r = rows[i]
            tot[y[r]] += W[r, y[r]]
        s = tot.sum()
        if s > 0:
            value[node] = tot / s
        else:
            for i in range(lo, hi):
                value[node, y[rows[i]]] += 1.0
            value[node] /= max(value[node].sum(), 1e-300)
        parent = _impurity(tot, criterion)
        if depth >= max_depth or parent <= 1e-12 or m < 2 * min_leaf:
            continue
        if max_features < d:
            feats = np.sort(np.random.permutation(d)[:max_features])
        else:
            feats = np.arange(d)

        best = np.inf
        best_f = -1
        best_t = 0.0
        best_c = False
        for f in feats:
            if is_cat[f]:
                continue
            seg = order[f, lo:hi]
            cw[:] = 0.0
            for i in range(m - 1):
                r = seg[i]
                cw[y[r]] += W[r, y[r]]
                pos = i + 1
                a, b = X[r, f], X[seg[i + 1], f]
                if a < b and pos >= min_leaf and m - pos >= min_leaf:
                    for c in range(C):
                        rest[c] = tot[c] - cw[c]
                    score = _impurity(cw, criterion) + _impurity(rest, criterion)
                    if score < best:
                        best, best_f, best_t, best_c = score, f, 0.5 * (a + b), False
        for f in feats:
            if not is_cat[f]:
                continue
            L = n_levels[f]
            lev = np.zeros((L, C))
            cnt = np.zeros(L, np.int64)
            for i in range(lo, hi):
                r = rows[i]
                v = int(X[r, f])
                lev[v, y[r]] += W[r, y[r]]
                cnt[v] += 1
            for v in range(L):
                if cnt[v] >= min_leaf and m - cnt[v] >= min_leaf:
                    for c in range(C):
                        rest[c] = tot[c] - lev[v, c]
                    score = _impurity(lev[v], criterion) + _impurity(rest, criterion)
                    if score < best:
                        best, best_f, best_t, best_c = score, f, float(v), True
        if best_f < 0 or best >= parent - 1e-12 * max(1.0, parent):
            continue

        nl = _stable_partition(rows[lo:hi], X, best_f, best_t, best_c, buf)
        for f in range(d):
            if not is_cat[f]:
                _stable_partition(order[f, lo:hi], X, best_f, best_t, best_c, buf)
        li, ri = n_nodes, n_nodes + 1
        n_nodes += 2
        feature[node], threshold[node], node_cat[node] = best_f, best_t, best_c
        left[node], right[node] = li, ri
        st_node[sp], st_lo[sp], st_hi[sp], st_depth[sp] = ri, lo + nl, hi, depth + 1
        sp += 1
        st_node[sp], st_lo[sp], st_hi[sp], st_depth[sp] = li, lo, lo + nl, depth + 1
        sp += 1
    return (feature[:n_nodes], threshold[:n_nodes], node_cat[:n_nodes], left[:n_nodes],
            right[:n_nodes], value[:n_nodes], used)
