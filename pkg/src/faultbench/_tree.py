"""Compiled CART kernels (Gini splits, random feature subsets)."""
import numpy as np
from numba import njit


@njit(cache=True)
def _sort_pairs(v, c, lo, hi):
    """In-place ascending sort of v[lo:hi], carrying c along (quicksort + insertion).

    Iterative: the cached-compilation path does not support recursion.
    """
    stack = np.empty(128, np.int64)
    top = 0
    stack[0] = lo
    stack[1] = hi
    top = 2
    while top > 0:
        top -= 2
        lo = stack[top]
        hi = stack[top + 1]
        while hi - lo > 16:
            mid = (lo + hi) // 2
            a, b, d = v[lo], v[mid], v[hi - 1]
            if a < b:
                pivot = b if b < d else (d if a < d else a)
            else:
                pivot = a if a < d else (d if b < d else b)
            i, j = lo, hi - 1
            while i <= j:
                while v[i] < pivot:
                    i += 1
                while v[j] > pivot:
                    j -= 1
                if i <= j:
                    tv = v[i]; v[i] = v[j]; v[j] = tv
                    tc = c[i]; c[i] = c[j]; c[j] = tc
                    i += 1
                    j -= 1
            # defer the larger side, keep working on the smaller: stack depth <= log2(n)
            if j + 1 - lo < hi - i:
                stack[top] = i
                stack[top + 1] = hi
                hi = j + 1
            else:
                stack[top] = lo
                stack[top + 1] = j + 1
                lo = i
            top += 2
        for i in range(lo + 1, hi):
            tv = v[i]
            tc = c[i]
            j = i - 1
            while j >= lo and v[j] > tv:
                v[j + 1] = v[j]
                c[j + 1] = c[j]
                j -= 1
            v[j + 1] = tv
            c[j + 1] = tc


@njit(cache=True)
def build_tree(XT, y, rows, n_classes, mtry, max_depth, min_leaf, seed):
    """Grow one tree on ``rows`` (bootstrap indices may repeat).

    ``XT`` is the feature-major (transposed, contiguous) training matrix.

    Returns (feature, threshold, left, right, leaf_class, n_nodes); internal
    nodes send ``x[feature] <= threshold`` left. ``max_depth < 0`` means
    unlimited.
    """
    np.random.seed(seed)
    n_rows = rows.shape[0]
    p = XT.shape[0]
    cap = 2 * n_rows + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    leaf_class = np.zeros(cap, np.int64)

    idx = rows.copy()
    buf = np.empty(n_rows, np.int64)
    vals = np.empty(n_rows)
    labs = np.empty(n_rows, np.int64)
    feats = np.arange(p)
    total = np.zeros(n_classes, np.int64)
    lcount = np.zeros(n_classes, np.int64)
    rcount = np.zeros(n_classes, np.int64)

    st_node = np.empty(cap, np.int64)
    st_lo = np.empty(cap, np.int64)
    st_hi = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    top = 0
    st_node[0], st_lo[0], st_hi[0], st_depth[0] = 0, 0, n_rows, 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node, lo, hi, depth = st_node[top], st_lo[top], st_hi[top], st_depth[top]
        m = hi - lo
        total[:] = 0
        for i in range(lo, hi):
            total[y[idx[i]]] += 1
        best_c = 0
        for c in range(n_classes):
            if total[c] > total[best_c]:
                best_c = c
        leaf_class[node] = best_c
        if total[best_c] == m or m < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth):
            continue

        sumsq_total = 0.0
        for c in range(n_classes):
            sumsq_total += total[c] * total[c]
        best_crit = -1.0
        best_f = -1
        best_thr = 0.0
        seen = 0
        # partial Fisher-Yates over all features; stop after mtry usable ones
        for j in range(p):
            if seen >= mtry and best_f >= 0:
                break
            r = j + np.random.randint(p - j)
            tmp = feats[j]
            feats[j] = feats[r]
            feats[r] = tmp
            f = feats[j]
            vmin = np.inf
            vmax = -np.inf
            for i in range(m):
                v = XT[f, idx[lo + i]]
                vals[i] = v
                labs[i] = y[idx[lo + i]]
                if v < vmin:
                    vmin = v
                if v > vmax:
                    vmax = v
            if vmin == vmax:
                continue
            _sort_pairs(vals, labs, 0, m)
            seen += 1
            lcount[:] = 0
            for c in range(n_classes):
                rcount[c] = total[c]
            sl = 0.0
            sr = sumsq_total
            for i in range(m - 1):
                c = labs[i]
                sl += 2.0 * lcount[c] + 1.0
                lcount[c] += 1
                sr -= 2.0 * rcount[c] - 1.0
                rcount[c] -= 1
                nl = i + 1
                nr = m - nl
                v0 = vals[i]
                v1 = vals[i + 1]
                if v0 == v1 or nl < min_leaf or nr < min_leaf:
                    continue
                crit = sl / nl + sr / nr
                if crit > best_crit:
                    best_crit = crit
                    best_f = f
                    thr = v0 + (v1 - v0) / 2.0
                    if thr >= v1:
                        thr = v0
                    best_thr = thr
        if best_f < 0:
            continue

        nl = 0
        nr = 0
        for i in range(lo, hi):
            if XT[best_f, idx[i]] <= best_thr:
                idx[lo + nl] = idx[i]
                nl += 1
            else:
                buf[nr] = idx[i]
                nr += 1
        for i in range(nr):
            idx[lo + nl + i] = buf[i]

        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        st_node[top], st_lo[top], st_hi[top], st_depth[top] = n_nodes + 1, lo + nl, hi, depth + 1
        top += 1
        st_node[top], st_lo[top], st_hi[top], st_depth[top] = n_nodes, lo, lo + nl, depth + 1
        top += 1
        n_nodes += 2

    return feature, threshold, left, right, leaf_class, n_nodes


@njit(cache=True)
def apply_tree(X, feature, threshold, left, right, leaf_class):
    out = np.empty(X.shape[0], np.int64)
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = leaf_class[node]
    return out
