"""Cross-validated attack evaluation: k sweeps, Top-a attacks, importance stability."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from . import classify
from .dataset import Dataset, FeatureSchema
from .features import featurize_dataset
from .trace import Trace

log = logging.getLogger(__name__)

EARLY_K_MAX = 40
DEFAULT_KS = tuple(range(5, 201, 5))


class EvaluationError(RuntimeError):
    pass


def kfold_split(y: np.ndarray | Dataset, folds: int = 10, seed: int = 0,
                classes: Optional[Sequence[str]] = None) -> np.ndarray:
    """Stratified fold id per row; per-class fold counts differ by at most one."""
    if isinstance(y, Dataset):
        classes = y.classes
        y = y.y
    y = np.asarray(y)
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed & (2**64 - 1), 0x0F])))
    assign = np.empty(len(y), np.int64)
    offset = 0
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        if len(idx) < folds:
            name = classes[c] if classes is not None else c
            raise ValueError(f"class {name!r} has {len(idx)} samples, fewer than {folds} folds")
        idx = idx[rng.permutation(len(idx))]
        assign[idx] = (offset + np.arange(len(idx))) % folds
        offset = (offset + len(idx)) % folds
    return assign


def top_a_hits(proba: np.ndarray, y: np.ndarray, a: int) -> np.ndarray:
    """Whether each true class is among the ``a`` most probable (ties -> lower index)."""
    n_classes = proba.shape[1]
    if not 1 <= a <= n_classes:
        raise ValueError(f"a must be in [1, {n_classes}], got {a}")
    ranked = np.argsort(-proba, axis=1, kind="stable")[:, :a]
    return (ranked == np.asarray(y)[:, None]).any(axis=1)


def _label_indices(model: classify.Model, labels: Sequence[str]) -> np.ndarray:
    index = {c: i for i, c in enumerate(model.classes)}
    try:
        return np.array([index[l] for l in labels], dtype=np.int64)
    except KeyError as e:
        raise EvaluationError(f"test label {e.args[0]!r} unknown to the model") from None


def top_a_accuracy(model: classify.Model, test: Dataset, a: int) -> float:
    if a > model.n_classes:
        raise ValueError(f"a={a} exceeds the number of classes N={model.n_classes}")
    y = _label_indices(model, test.labels)
    return float(top_a_hits(model.proba(test.X), y, a).mean())


@dataclass
class CVResult:
    fold_accuracies: tuple[float, ...]
    topa: dict[int, tuple[float, ...]] = field(default_factory=dict)
    importance: Optional[np.ndarray] = None

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_accuracies))

    def topa_mean(self, a: int) -> float:
        return float(np.mean(self.topa[a]))


def cross_validate(dataset: Dataset, algorithm: str, seed: int = 0, folds: int = 10,
                   a_values: Iterable[int] = (), hyperparams: Optional[dict] = None,
                   threads: int = 1, backend: Optional[str] = None) -> CVResult:
    """Stratified k-fold accuracy; also Top-a accuracies per fold and mean tree importance."""
    a_values = sorted(set(a_values))
    assign = kfold_split(dataset, folds, seed)
    accs, imps = [], []
    topa = {a: [] for a in a_values}
    for f in range(folds):
        test = assign == f
        train = dataset.subset(np.flatnonzero(~test))
        if train.n_classes != dataset.n_classes:
            raise EvaluationError(f"fold {f}: training split lost a class")
        try:
            model = classify.fit(algorithm, train, hyperparams, seed, threads, backend)
        except classify.FitError as e:
            raise EvaluationError(f"fold {f}: {e}") from e
        proba = model.proba(dataset.X[test])
        y = dataset.y[test]
        accs.append(float(top_a_hits(proba, y, 1).mean()))
        for a in a_values:
            topa[a].append(float(top_a_hits(proba, y, a).mean()))
        if model.algorithm in ("RF", "ET"):
            imps.append(classify.feature_importance(model))
    importance = None
    if imps:
        importance = np.mean(imps, axis=0)
        s = importance.sum()
        importance = importance / s if s > 0 else importance
    return CVResult(tuple(accs), {a: tuple(v) for a, v in topa.items()}, importance)


@dataclass(frozen=True)
class SweepRow:
    k: int
    algorithm: str
    feature_set: str
    mean_accuracy: float
    fold_accuracies: tuple[float, ...]
    topa: Mapping[int, float] = field(default_factory=dict)
    importance: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    schema: Optional[FeatureSchema] = field(default=None, compare=False, repr=False)

    @property
    def early(self) -> bool:
        return self.k <= EARLY_K_MAX


@dataclass
class SweepResult:
    rows: list[SweepRow]
    seed: int
    folds: int
    n_classes: int

    def accuracy(self, k: int, algorithm: str) -> float:
        for r in self.rows:
            if r.k == k and r.algorithm == algorithm:
                return r.mean_accuracy
        raise KeyError((k, algorithm))

    def curve(self, algorithm: str) -> list[tuple[int, float]]:
        return [(r.k, r.mean_accuracy) for r in self.rows if r.algorithm == algorithm]


def k_sweep(traces: Sequence[Trace], feature_set: str, algorithms: Sequence[str],
            ks: Iterable[int] = DEFAULT_KS, seed: int = 0, folds: int = 10,
            a_max: int = 1, hyperparams: Optional[Mapping[str, dict]] = None,
            threads: int = 1, backend: Optional[str] = None,
            progress: Optional[Callable[[int, str], None]] = None) -> SweepResult:
    """Featurize at each k and cross-validate every algorithm; rows in (k, algorithm) order."""
    rows = []
    n_classes = 0
    a_values = range(1, a_max + 1)
    for k in ks:
        ds = featurize_dataset(traces, feature_set, k)
        n_classes = ds.n_classes
        for algo in algorithms:
            if progress:
                progress(k, algo)
            try:
                cv = cross_validate(ds, algo, seed, folds, a_values,
                                    (hyperparams or {}).get(algo), threads, backend)
            except Exception as e:
                raise EvaluationError(f"k={k}, algorithm={algo}: {e}") from e
            rows.append(SweepRow(k, algo, feature_set, cv.mean, cv.fold_accuracies,
                                 {a: cv.topa_mean(a) for a in a_values}, cv.importance,
                                 ds.schema))
    return SweepResult(rows, seed, folds, n_classes)


@dataclass
class TopAResult:
    table: dict[tuple[int, int], float]
    ks: tuple[int, ...]
    a_max: int

    def improve(self, k: int) -> float:
        return self.table[k, self.a_max] - self.table[k, 1]


def top_a_table(traces: Sequence[Trace], feature_set: str, ks: Iterable[int], a_max: int = 5,
                seed: int = 0, folds: int = 10, algorithm: str = "RF", threads: int = 1,
                backend: Optional[str] = None,
                hyperparams: Optional[Mapping[str, dict]] = None) -> TopAResult:
    """Per-fold Top-a accuracies averaged over folds, for a = 1..a_max at each k."""
    ks = tuple(ks)
    sweep = k_sweep(traces, feature_set, [algorithm], ks, seed, folds, a_max, hyperparams,
                    threads=threads, backend=backend)
    if a_max > sweep.n_classes:
        raise ValueError(f"a_max={a_max} exceeds N={sweep.n_classes}")
    table = {(r.k, a): acc for r in sweep.rows for a, acc in r.topa.items()}
    return TopAResult(table, ks, a_max)


def segment_importance(importance: np.ndarray, schema: FeatureSchema) -> dict[str, float]:
    return {s.name: float(importance[s.offset:s.offset + s.length].sum()) for s in schema}


def importance_stability(importances: Sequence[tuple[np.ndarray, FeatureSchema]] | SweepResult,
                         algorithm: Optional[str] = None) -> dict[str, float]:
    """Population variance across k of each named feature's (segment-summed) importance."""
    if isinstance(importances, SweepResult):
        rows = [r for r in importances.rows if algorithm is None or r.algorithm == algorithm]
        if any(r.importance is None for r in rows):
            raise EvaluationError("importance stability needs tree-based (RF/ET) models")
        importances = [(r.importance, r.schema) for r in rows]
    if not importances:
        return {}
    per_k = [segment_importance(imp, schema) for imp, schema in importances]
    names = list(per_k[0])
    out = {}
    for n in names:
        vals = np.array([d[n] for d in per_k])
        # shifting by the first value keeps constant sequences at exactly zero
        out[n] = float(np.var(vals - vals[0]))
    return out
