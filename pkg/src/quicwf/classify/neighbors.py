from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forest import canonical_order


@dataclass
class KNearest:
    """Euclidean k-nearest-neighbour vote; distance ties go to the earlier stored row."""

    X: np.ndarray
    y: np.ndarray
    n_classes: int
    n_neighbors: int = 5

    @classmethod
    def fit(cls, X, y, n_classes, n_neighbors=5) -> "KNearest":
        if n_neighbors < 1:
            raise ValueError(f"n_neighbors must be >= 1, got {n_neighbors}")
        order = canonical_order(X, y)
        return cls(np.ascontiguousarray(X[order], dtype=np.float64), y[order].astype(np.int64),
                   n_classes, int(n_neighbors))

    def predict_proba(self, Q: np.ndarray) -> np.ndarray:
        k = min(self.n_neighbors, self.X.shape[0])
        # bound the (chunk, n_train, m) temporary to ~16M doubles
        chunk = max(1, 16_000_000 // max(1, self.X.size))
        out = np.zeros((Q.shape[0], self.n_classes))
        for lo in range(0, Q.shape[0], chunk):
            q = Q[lo:lo + chunk]
            d = ((self.X[None, :, :] - q[:, None, :]) ** 2).sum(axis=2)
            nn = np.argsort(d, axis=1, kind="stable")[:, :k]
            for i, row in enumerate(self.y[nn]):
                out[lo + i] = np.bincount(row, minlength=self.n_classes) / k
        return out

    def to_arrays(self) -> dict:
        return {"X": self.X, "y": self.y, "n_neighbors": np.array([self.n_neighbors])}

    @classmethod
    def from_arrays(cls, a: dict, n_classes: int) -> "KNearest":
        return cls(a["X"], a["y"], n_classes, int(a["n_neighbors"][0]))
