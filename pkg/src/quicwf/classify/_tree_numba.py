"""Compiled CART kernels. Must stay in lock-step with ``_tree_numpy``."""
import numpy as np

from .._accel import njit

_G1 = np.uint64(0x9E3779B97F4A7C15)
_G2 = np.uint64(0xD1B54A32D192ED03)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_ONE = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0


@njit
def mix64(key, node, j):
    z = key + (np.uint64(node) + _ONE) * _G1 + (np.uint64(j) + _ONE) * _G2
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit
def build_tree(XT, y, w, samples, n_classes, max_features, random_split,
               min_samples_split, max_depth, key):
    samples = samples.copy()
    ns = samples.shape[0]
    m = XT.shape[0]
    cap = 2 * ns + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap, np.float64)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros((cap, n_classes), np.int64)

    st_start = np.empty(ns + 2, np.int64)
    st_end = np.empty(ns + 2, np.int64)
    st_parent = np.empty(ns + 2, np.int64)
    st_isleft = np.empty(ns + 2, np.int64)
    st_depth = np.empty(ns + 2, np.int64)
    sp = 0
    st_start[0] = 0
    st_end[0] = ns
    st_parent[0] = -1
    st_isleft[0] = 0
    st_depth[0] = 0
    sp = 1

    feats = np.empty(m, np.int64)
    vals = np.empty(ns, np.float64)
    left_c = np.zeros(n_classes, np.int64)
    right_c = np.zeros(n_classes, np.int64)
    n_nodes = 0

    while sp > 0:
        sp -= 1
        start = st_start[sp]
        end = st_end[sp]
        parent = st_parent[sp]
        depth = st_depth[sp]
        node = n_nodes
        n_nodes += 1
        if parent >= 0:
            if st_isleft[sp] == 1:
                left[parent] = node
            else:
                right[parent] = node

        wtot = 0
        for i in range(start, end):
            s = samples[i]
            value[node, y[s]] += w[s]
            wtot += w[s]
        sq_tot = 0
        nonzero = 0
        for c in range(n_classes):
            sq_tot += value[node, c] * value[node, c]
            if value[node, c] > 0:
                nonzero += 1
        n_node = end - start
        if n_node < min_samples_split or nonzero <= 1 or (max_depth >= 0 and depth >= max_depth):
            continue

        best_proxy = -np.inf
        best_f = -1
        best_thr = 0.0
        for j in range(m):
            feats[j] = j
        visited = 0
        for j in range(m):
            r = np.int64(mix64(key, node, j) % np.uint64(m - j))
            f = feats[j + r]
            feats[j + r] = feats[j]
            feats[j] = f

            mn = np.inf
            mx = -np.inf
            row = XT[f]
            for i in range(n_node):
                v = row[samples[start + i]]
                vals[i] = v
                if v < mn:
                    mn = v
                if v > mx:
                    mx = v
            if mx <= mn:
                continue
            visited += 1

            if random_split:
                u = np.float64(mix64(key, node, m + f) >> np.uint64(11)) * _INV53
                thr = mn + u * (mx - mn)
                if thr >= mx:
                    thr = mn
                for c in range(n_classes):
                    left_c[c] = 0
                for i in range(n_node):
                    if vals[i] <= thr:
                        s = samples[start + i]
                        left_c[y[s]] += w[s]
                wl = 0
                sql = 0
                sqr = 0
                for c in range(n_classes):
                    lc = left_c[c]
                    rc = value[node, c] - lc
                    wl += lc
                    sql += lc * lc
                    sqr += rc * rc
                wr = wtot - wl
                proxy = sql / wl + sqr / wr
                if proxy > best_proxy:
                    best_proxy = proxy
                    best_f = f
                    best_thr = thr
            else:
                order = np.argsort(vals[:n_node])
                for c in range(n_classes):
                    left_c[c] = 0
                    right_c[c] = value[node, c]
                sql = 0
                sqr = sq_tot
                wl = 0
                wr = wtot
                for i in range(n_node - 1):
                    s = samples[start + order[i]]
                    c = y[s]
                    wi = w[s]
                    sql += 2 * left_c[c] * wi + wi * wi
                    left_c[c] += wi
                    wl += wi
                    sqr += wi * wi - 2 * right_c[c] * wi
                    right_c[c] -= wi
                    wr -= wi
                    v0 = vals[order[i]]
                    v1 = vals[order[i + 1]]
                    if v1 > v0:
                        proxy = sql / wl + sqr / wr
                        if proxy > best_proxy:
                            best_proxy = proxy
                            best_f = f
                            thr = (v0 + v1) / 2.0
                            if thr == v1 or not np.isfinite(thr):
                                thr = v0
                            best_thr = thr
            if visited >= max_features:
                break

        if best_f < 0:
            continue
        feature[node] = best_f
        threshold[node] = best_thr
        i = start
        k = end - 1
        while i <= k:
            if XT[best_f, samples[i]] <= best_thr:
                i += 1
            else:
                t = samples[i]
                samples[i] = samples[k]
                samples[k] = t
                k -= 1
        mid = i
        st_start[sp] = mid
        st_end[sp] = end
        st_parent[sp] = node
        st_isleft[sp] = 0
        st_depth[sp] = depth + 1
        sp += 1
        st_start[sp] = start
        st_end[sp] = mid
        st_parent[sp] = node
        st_isleft[sp] = 1
        st_depth[sp] = depth + 1
        sp += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy())


@njit
def forest_leaves(X, feature, threshold, left, right, roots):
    n = X.shape[0]
    out = np.empty((n, roots.shape[0]), np.int64)
    for i in range(n):
        for t in range(roots.shape[0]):
            node = roots[t]
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[i, t] = node
    return out
