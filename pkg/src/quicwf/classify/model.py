"""Attack-model façade: fit, predict, importance and binary serialisation."""
from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from ..dataset import Dataset, FeatureSchema
from .bayes import GaussianNB
from .forest import MASK64, Forest
from .neighbors import KNearest

ALGORITHMS = ("RF", "ET", "KNN", "NB")

DEFAULTS = {
    "RF": {"n_estimators": 100, "max_features": "sqrt", "min_samples_split": 2,
           "max_depth": None},
    "ET": {"n_estimators": 100, "max_features": "sqrt", "min_samples_split": 2,
           "max_depth": None},
    "KNN": {"n_neighbors": 5},
    "NB": {"var_smoothing": 1e-9},
}

MAGIC = b"QWFMODEL"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sHB16sQ")


class FitError(ValueError):
    pass


class SchemaMismatch(ValueError):
    pass


class UnsupportedOperation(TypeError):
    pass


class Prediction(NamedTuple):
    distribution: np.ndarray
    top: str


@dataclass
class Model:
    algorithm: str
    classes: tuple[str, ...]
    schema: FeatureSchema
    seed: int
    hyperparams: dict
    estimator: object = field(repr=False)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.schema.dim:
            raise SchemaMismatch(f"expected feature dimension {self.schema.dim}, got {X.shape[1]}")
        return X

    def proba(self, X: np.ndarray) -> np.ndarray:
        """Class-probability matrix (n_samples, n_classes) in ``classes`` order."""
        return self.estimator.predict_proba(self._check(X))

    def predict_indices(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.proba(X), axis=1)


def _validate_training(train: Dataset) -> None:
    if train.n_classes < 2:
        raise FitError(f"need at least 2 classes, got {train.n_classes}")
    bad = np.argwhere(~np.isfinite(train.X))
    if bad.size:
        r, c = bad[0]
        raise FitError(f"non-finite feature value at row {r}, column {c}")


def fit(algorithm: str, train: Dataset, hyperparams: Optional[dict] = None, seed: int = 0,
        threads: int = 1, backend: Optional[str] = None) -> Model:
    algorithm = algorithm.upper()
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")
    _validate_training(train)
    hp = dict(DEFAULTS[algorithm])
    hp.update(hyperparams or {})
    X, y, C = train.X, train.y, train.n_classes
    if algorithm in ("RF", "ET"):
        est = Forest.fit(X, y, C, bootstrap=algorithm == "RF", random_split=algorithm == "ET",
                         seed=seed, threads=threads, backend=backend, **hp)
    elif algorithm == "KNN":
        est = KNearest.fit(X, y, C, **hp)
    else:
        est = GaussianNB.fit(X, y, C, **hp)
    return Model(algorithm, train.classes, train.schema, int(seed), hp, est)


def predict_proba(model: Model, x) -> Prediction:
    dist = model.proba(x)[0]
    return Prediction(dist, model.classes[int(np.argmax(dist))])


def predict(model: Model, x) -> str:
    return predict_proba(model, x).top


def feature_importance(model: Model) -> np.ndarray:
    if model.algorithm not in ("RF", "ET"):
        raise UnsupportedOperation(f"feature importance is only defined for RF/ET, "
                                   f"not {model.algorithm}")
    return model.estimator.feature_importance()


def dumps(model: Model) -> bytes:
    meta = {"algorithm": model.algorithm, "classes": list(model.classes),
            "schema": model.schema.to_json(), "seed": model.seed,
            "hyperparams": model.hyperparams}
    arrays = dict(model.estimator.to_arrays())
    arrays["__meta__"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), np.uint8)
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    head = _HEADER.pack(MAGIC, FORMAT_VERSION, ALGORITHMS.index(model.algorithm),
                        model.schema.fingerprint.encode(), model.seed & MASK64)
    return head + buf.getvalue()


def loads(blob: bytes, expect_schema: Optional[FeatureSchema] = None,
          backend: Optional[str] = None) -> Model:
    if len(blob) < _HEADER.size:
        raise ValueError("model blob too short")
    magic, version, algo, schema_hash, seed = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ValueError("not a quicwf model (bad magic)")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version}")
    schema_hash = schema_hash.decode()
    if expect_schema is not None and expect_schema.fingerprint != schema_hash:
        raise SchemaMismatch(f"model schema {schema_hash} does not match expected "
                             f"{expect_schema.fingerprint}")
    with np.load(io.BytesIO(blob[_HEADER.size:]), allow_pickle=False) as z:
        arrays = {k: z[k] for k in z.files}
    meta = json.loads(arrays.pop("__meta__").tobytes())
    schema = FeatureSchema.from_json(meta["schema"])
    if schema.fingerprint != schema_hash:
        raise SchemaMismatch("model payload schema disagrees with its header")
    algorithm = ALGORITHMS[algo]
    C = len(meta["classes"])
    if algorithm in ("RF", "ET"):
        est = Forest.from_arrays(arrays, C, schema.dim, backend)
    elif algorithm == "KNN":
        est = KNearest.from_arrays(arrays, C)
    else:
        est = GaussianNB.from_arrays(arrays, C)
    return Model(algorithm, tuple(meta["classes"]), schema, meta["seed"], meta["hyperparams"], est)


def save_model(model: Model, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(model))


def load_model(path, expect_schema: Optional[FeatureSchema] = None) -> Model:
    with open(path, "rb") as fh:
        return loads(fh.read(), expect_schema)
