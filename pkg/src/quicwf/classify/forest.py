"""Random Forest and Extra Trees built on the CART kernels."""
from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import _accel
from . import _tree_numpy

MASK64 = (1 << 64) - 1


def _kernels(backend: str):
    if backend == "numba":
        from . import _tree_numba
        return _tree_numba
    return _tree_numpy


def canonical_order(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row order determined by content alone (blake2b of features and label)."""
    keys = [hashlib.blake2b(X[i].tobytes() + int(y[i]).to_bytes(8, "little"),
                            digest_size=16).digest() for i in range(X.shape[0])]
    return np.array(sorted(range(len(keys)), key=keys.__getitem__), dtype=np.int64)


def tree_key(seed: int, tree: int) -> np.uint64:
    return np.random.SeedSequence([seed & MASK64, tree, 1]).generate_state(1, np.uint64)[0]


def bootstrap_weights(seed: int, tree: int, n: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed & MASK64, tree])))
    return np.bincount(rng.integers(0, n, n), minlength=n).astype(np.int64)


def resolve_max_features(max_features, m: int) -> int:
    if max_features in (None, "all"):
        return m
    if max_features == "sqrt":
        return max(1, int(np.sqrt(m)))
    if max_features == "log2":
        return max(1, int(np.log2(m)))
    if isinstance(max_features, float):
        return max(1, int(max_features * m))
    return max(1, min(m, int(max_features)))


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray       # (n_nodes, n_classes) weighted class counts

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def leaf_class(self) -> np.ndarray:
        return np.argmax(self.value, axis=1)

    def apply(self, X: np.ndarray) -> np.ndarray:
        return _tree_numpy.forest_leaves(X, self.feature, self.threshold, self.left,
                                         self.right, np.zeros(1, np.int64))[:, 0]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.leaf_class[self.apply(X)]

    def importance(self, n_features: int) -> np.ndarray:
        """Weighted Gini decrease per feature, normalised to sum 1 within the tree."""
        w = self.value.sum(axis=1).astype(np.float64)
        gini = 1.0 - (self.value.astype(np.float64) ** 2).sum(axis=1) / np.maximum(w, 1) ** 2
        internal = np.flatnonzero(self.feature >= 0)
        out = np.zeros(n_features)
        if internal.size == 0:
            return out
        l, r = self.left[internal], self.right[internal]
        dec = w[internal] * gini[internal] - w[l] * gini[l] - w[r] * gini[r]
        np.add.at(out, self.feature[internal], dec)
        out /= w[0]
        total = out.sum()
        return out / total if total > 0 else out


@dataclass
class Forest:
    trees: list[Tree]
    n_classes: int
    n_features: int
    backend: str = "numba"

    @classmethod
    def fit(cls, X, y, n_classes, *, n_estimators=100, bootstrap=True, random_split=False,
            max_features="sqrt", min_samples_split=2, max_depth=None, seed=0, threads=1,
            backend=None) -> "Forest":
        backend = _accel.resolve(backend)
        kern = _kernels(backend)
        order = canonical_order(X, y)
        Xc = np.asarray(X, dtype=np.float64)[order]
        yc = np.ascontiguousarray(y[order], dtype=np.int64)
        n, m = Xc.shape
        mf = resolve_max_features(max_features, m)
        # columns constant over the whole training set can never split
        active = np.flatnonzero(Xc.max(axis=0) > Xc.min(axis=0)) if n else np.arange(0)
        XT = np.ascontiguousarray(Xc[:, active].T)
        depth = -1 if max_depth is None else int(max_depth)

        def one(t):
            w = bootstrap_weights(seed, t, n) if bootstrap else np.ones(n, np.int64)
            samples = np.flatnonzero(w).astype(np.int64)
            feature, threshold, left, right, value = kern.build_tree(
                XT, yc, w, samples, n_classes, mf, bool(random_split), int(min_samples_split),
                depth, tree_key(seed, t))
            feature = np.where(feature >= 0, active[np.maximum(feature, 0)], -1)
            return Tree(feature, threshold, left, right, value)

        if threads and threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                trees = list(ex.map(one, range(n_estimators)))
        else:
            trees = [one(t) for t in range(n_estimators)]
        return cls(trees, n_classes, m, backend)

    def _flat(self):
        offs = np.cumsum([0] + [t.n_nodes for t in self.trees])
        feature = np.concatenate([t.feature for t in self.trees])
        threshold = np.concatenate([t.threshold for t in self.trees])
        left = np.concatenate([np.where(t.left >= 0, t.left + o, -1)
                               for t, o in zip(self.trees, offs)])
        right = np.concatenate([np.where(t.right >= 0, t.right + o, -1)
                                for t, o in zip(self.trees, offs)])
        leaf_class = np.concatenate([t.leaf_class for t in self.trees])
        return feature, threshold, left, right, leaf_class, offs[:-1].astype(np.int64)

    def votes(self, X: np.ndarray) -> np.ndarray:
        """Per-class count of trees voting for each row."""
        feature, threshold, left, right, leaf_class, roots = self._flat()
        X = np.ascontiguousarray(X, dtype=np.float64)
        leaves = _kernels(self.backend).forest_leaves(X, feature, threshold, left, right, roots)
        picks = leaf_class[leaves]
        out = np.zeros((X.shape[0], self.n_classes), np.int64)
        for c in range(self.n_classes):
            out[:, c] = (picks == c).sum(axis=1)
        return out

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.votes(X) / len(self.trees)

    def feature_importance(self) -> np.ndarray:
        imp = np.mean([t.importance(self.n_features) for t in self.trees], axis=0)
        total = imp.sum()
        return imp / total if total > 0 else imp

    def to_arrays(self) -> dict:
        out = {"n_nodes": np.array([t.n_nodes for t in self.trees], np.int64)}
        for name in ("feature", "threshold", "left", "right"):
            out[name] = np.concatenate([getattr(t, name) for t in self.trees])
        out["value"] = np.vstack([t.value for t in self.trees])
        return out

    @classmethod
    def from_arrays(cls, a: dict, n_classes: int, n_features: int, backend=None) -> "Forest":
        trees, pos = [], 0
        for n in a["n_nodes"].tolist():
            sl = slice(pos, pos + n)
            trees.append(Tree(a["feature"][sl], a["threshold"][sl], a["left"][sl],
                              a["right"][sl], a["value"][sl]))
            pos += n
        return cls(trees, n_classes, n_features, _accel.resolve(backend))
