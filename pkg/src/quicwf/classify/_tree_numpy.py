"""Pure-numpy CART kernels; produce the same trees as ``_tree_numba``.

Per-node work is vectorised over samples; the feature draw loop stays scalar
because it must replay the exact draw sequence of the compiled kernel.
"""
import numpy as np

_MASK = (1 << 64) - 1
_G1 = 0x9E3779B97F4A7C15
_G2 = 0xD1B54A32D192ED03
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV53 = 1.0 / 9007199254740992.0


def mix64(key, node, j):
    z = (int(key) + (int(node) + 1) * _G1 + (int(j) + 1) * _G2) & _MASK
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def _best_split_sorted(vals, yc, wc, n_classes, tot, wtot):
    order = np.argsort(vals, kind="stable")
    sv = vals[order]
    valid = sv[1:] > sv[:-1]
    if not valid.any():
        return -np.inf, 0.0
    onehot = np.zeros((len(vals), n_classes), np.int64)
    onehot[np.arange(len(vals)), yc[order]] = wc[order]
    cl = np.cumsum(onehot, axis=0)[:-1]
    cr = tot[None, :] - cl
    wl = cl.sum(axis=1)
    wr = wtot - wl
    proxy = (cl * cl).sum(axis=1) / wl + (cr * cr).sum(axis=1) / wr
    proxy = np.where(valid, proxy, -np.inf)
    i = int(np.argmax(proxy))
    v0, v1 = sv[i], sv[i + 1]
    thr = (v0 + v1) / 2.0
    if thr == v1 or not np.isfinite(thr):
        thr = v0
    return float(proxy[i]), float(thr)


def build_tree(XT, y, w, samples, n_classes, max_features, random_split,
               min_samples_split, max_depth, key):
    m = XT.shape[0]
    key = int(key)
    feature, threshold, left, right, value = [], [], [], [], []
    stack = [(np.asarray(samples, np.int64), -1, False, 0)]
    while stack:
        idx, parent, is_left, depth = stack.pop()
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        if parent >= 0:
            (left if is_left else right)[parent] = node
        yc, wc = y[idx], w[idx]
        tot = np.bincount(yc, weights=wc, minlength=n_classes).astype(np.int64)
        value.append(tot)
        wtot = int(tot.sum())
        n_node = len(idx)
        if (n_node < min_samples_split or np.count_nonzero(tot) <= 1
                or (max_depth >= 0 and depth >= max_depth)):
            continue

        Xn = XT[:, idx].T
        mins = Xn.min(axis=0)
        maxs = Xn.max(axis=0)
        varying = maxs > mins
        feats = np.arange(m)
        best_proxy, best_f, best_thr = -np.inf, -1, 0.0
        visited = 0
        for j in range(m):
            r = mix64(key, node, j) % (m - j)
            f = int(feats[j + r])
            feats[j + r] = feats[j]
            feats[j] = f
            if not varying[f]:
                continue
            visited += 1
            vals = Xn[:, f]
            if random_split:
                u = (mix64(key, node, m + f) >> 11) * _INV53
                thr = mins[f] + u * (maxs[f] - mins[f])
                if thr >= maxs[f]:
                    thr = mins[f]
                lc = np.bincount(yc[vals <= thr], weights=wc[vals <= thr],
                                 minlength=n_classes).astype(np.int64)
                rc = tot - lc
                wl = int(lc.sum())
                proxy = int((lc * lc).sum()) / wl + int((rc * rc).sum()) / (wtot - wl)
            else:
                proxy, thr = _best_split_sorted(vals, yc, wc, n_classes, tot, wtot)
            if proxy > best_proxy:
                best_proxy, best_f, best_thr = proxy, f, float(thr)
            if visited >= max_features:
                break

        if best_f < 0:
            continue
        feature[node] = best_f
        threshold[node] = best_thr
        go_left = Xn[:, best_f] <= best_thr
        stack.append((idx[~go_left], node, False, depth + 1))
        stack.append((idx[go_left], node, True, depth + 1))

    n = len(feature)
    return (np.array(feature, np.int64), np.array(threshold, np.float64),
            np.array(left, np.int64), np.array(right, np.int64),
            np.vstack(value).reshape(n, n_classes))


def forest_leaves(X, feature, threshold, left, right, roots):
    n = X.shape[0]
    out = np.empty((n, len(roots)), np.int64)
    rows = np.arange(n)
    for t, root in enumerate(roots):
        node = np.full(n, root, np.int64)
        active = feature[node] >= 0
        while active.any():
            a = rows[active]
            cur = node[a]
            go_left = X[a, feature[cur]] <= threshold[cur]
            node[a] = np.where(go_left, left[cur], right[cur])
            active = feature[node] >= 0
        out[:, t] = node
    return out
