from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .forest import canonical_order


@dataclass
class GaussianNB:
    theta: np.ndarray       # (n_classes, m) means
    var: np.ndarray         # (n_classes, m) variances incl. the floor
    log_prior: np.ndarray

    @classmethod
    def fit(cls, X, y, n_classes, var_smoothing=1e-9) -> "GaussianNB":
        order = canonical_order(X, y)
        X, y = X[order], y[order]
        floor = var_smoothing * float(np.var(X, axis=0).max()) if X.size else 0.0
        if floor <= 0:
            floor = var_smoothing
        m = X.shape[1]
        theta = np.zeros((n_classes, m))
        var = np.zeros((n_classes, m))
        counts = np.bincount(y, minlength=n_classes).astype(np.float64)
        for c in range(n_classes):
            Xc = X[y == c]
            if len(Xc):
                theta[c] = Xc.mean(axis=0)
                var[c] = Xc.var(axis=0)
        var += floor
        with np.errstate(divide="ignore"):
            log_prior = np.log(counts / counts.sum())
        return cls(theta, var, log_prior)

    def joint_log_likelihood(self, X: np.ndarray) -> np.ndarray:
        norm = -0.5 * np.log(2.0 * np.pi * self.var).sum(axis=1)
        out = np.empty((X.shape[0], len(self.log_prior)))
        for c in range(len(self.log_prior)):
            out[:, c] = (self.log_prior[c] + norm[c]
                         - 0.5 * (((X - self.theta[c]) ** 2) / self.var[c]).sum(axis=1))
        return out

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        jll = self.joint_log_likelihood(X)
        return np.exp(jll - logsumexp(jll, axis=1, keepdims=True))

    def to_arrays(self) -> dict:
        return {"theta": self.theta, "var": self.var, "log_prior": self.log_prior}

    @classmethod
    def from_arrays(cls, a: dict, n_classes: int) -> "GaussianNB":
        return cls(a["theta"], a["var"], a["log_prior"])
