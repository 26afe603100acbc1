import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

import oracles
from quicwf import classify
from quicwf.dataset import Dataset, FeatureSchema
from quicwf.evaluate import (EvaluationError, cross_validate, importance_stability, k_sweep,
                             kfold_split, segment_importance, top_a_accuracy, top_a_hits)
from quicwf.features import transfer_schema
from quicwf.synth import generate_dataset
from quicwf.trace import Trace


def make_ds(X, labels):
    X = np.asarray(X, dtype=np.float64)
    schema = FeatureSchema.from_lengths([(f"f{i}", 1) for i in range(X.shape[1])])
    return Dataset(X, tuple(labels), schema, k=1)


def test_kfold_92_by_100():
    y = np.repeat(np.arange(92), 100)
    assign = kfold_split(y, 10, seed=3)
    for f in range(10):
        counts = np.bincount(y[assign == f], minlength=92)
        assert (counts == 10).all()
    assert np.array_equal(assign, kfold_split(y, 10, seed=3))
    assert not np.array_equal(assign, kfold_split(y, 10, seed=4))


@given(st.lists(st.integers(0, 4), min_size=20, max_size=120), st.integers(2, 4),
       st.integers(0, 1000))
def test_kfold_partition(labels, folds, seed):
    y = np.array(labels)
    if np.bincount(y)[np.unique(y)].min() < folds:
        with pytest.raises(ValueError):
            kfold_split(y, folds, seed)
        return
    assign = kfold_split(y, folds, seed)
    assert set(assign.tolist()) <= set(range(folds))
    for c in np.unique(y):
        per = np.bincount(assign[y == c], minlength=folds)
        assert per.max() - per.min() <= 1
    sizes = np.bincount(assign, minlength=folds)
    assert sizes.max() - sizes.min() <= 1


def test_separable_cv_is_perfect(rng):
    x = np.concatenate([rng.uniform(0, 1, 50), rng.uniform(5, 6, 50)])
    ds = make_ds(x[:, None], ["a"] * 50 + ["b"] * 50)
    assert cross_validate(ds, "RF", folds=10, hyperparams={"n_estimators": 10}).mean == 1.0


def test_random_labels_near_chance():
    accs = []
    for seed in range(10):
        r = np.random.default_rng(seed)
        X = r.normal(0, 1, (200, 5))
        labels = [f"c{i}" for i in r.permutation(np.repeat(np.arange(10), 20))]
        accs.append(cross_validate(make_ds(X, labels), "RF", seed=seed, folds=5,
                                   hyperparams={"n_estimators": 20}).mean)
    assert 0.05 <= np.mean(accs) <= 0.20


@given(hnp.arrays(np.float64, (12, 5), elements=st.sampled_from([0.0, 0.1, 0.2, 0.5, 1.0])),
       hnp.arrays(np.int64, 12, elements=st.integers(0, 4)))
def test_top_a_against_rank_oracle(proba, y):
    prev = None
    for a in range(1, 6):
        hits = top_a_hits(proba, y, a)
        want = [oracles.top_a_hit(proba[i].tolist(), int(y[i]), a) for i in range(12)]
        assert hits.tolist() == want
        if prev is not None:
            assert (hits >= prev).all()
        prev = hits
    assert prev.all()


def test_top_a_bounds():
    with pytest.raises(ValueError):
        top_a_hits(np.ones((2, 3)) / 3, np.array([0, 1]), 4)


def test_top_a_accuracy_collapses_to_accuracy(rng):
    x = rng.normal(0, 1, (90, 3)) + np.repeat(np.eye(3) * 2, 30, axis=0)
    labels = [f"c{i // 30}" for i in range(90)]
    ds = make_ds(x, labels)
    m = classify.fit("NB", ds.subset(np.arange(0, 90, 2)))
    test = ds.subset(np.arange(1, 90, 2))
    plain = float(np.mean(np.array(m.classes)[m.predict_indices(test.X)] == np.array(test.labels)))
    assert top_a_accuracy(m, test, 1) == plain
    assert top_a_accuracy(m, test, 3) == 1.0


def test_unknown_test_label(rng):
    ds = make_ds(rng.normal(0, 1, (10, 2)), ["a", "b"] * 5)
    m = classify.fit("NB", ds)
    with pytest.raises(EvaluationError):
        top_a_accuracy(m, make_ds(np.zeros((1, 2)), ["zzz"]), 1)


def test_importance_stability_arithmetic():
    schema = FeatureSchema.from_lengths([("a", 1), ("b", 1)])
    pairs = [(np.array([0.4, 0.6]), schema), (np.array([0.6, 0.4]), schema)]
    var = importance_stability(pairs)
    assert var["a"] == pytest.approx(0.01) and var["b"] == pytest.approx(0.01)
    const = [(np.array([0.3, 0.7]), schema)] * 5
    assert importance_stability(const) == {"a": 0.0, "b": 0.0}


def test_segment_importance_brute_force(rng):
    schema = transfer_schema(7)
    imp = rng.dirichlet(np.ones(schema.dim))
    got = segment_importance(imp, schema)
    pos = 0
    for seg in schema:
        total = 0.0
        for j in range(seg.length):
            total += imp[pos + j]
        pos += seg.length
        assert got[seg.name] == pytest.approx(total, abs=1e-12)
    assert sum(got.values()) == pytest.approx(1.0)


@pytest.fixture(scope="module")
def small_corpus():
    return generate_dataset(4, 10, seed=11)


def test_sweep_grid_and_determinism(small_corpus):
    ks = list(range(5, 201, 5))
    res = k_sweep(small_corpus, "simple", ["KNN", "NB"], ks, seed=2, folds=5)
    assert len(res.rows) == 80
    assert [(r.k, r.algorithm) for r in res.rows[:3]] == [(5, "KNN"), (5, "NB"), (10, "KNN")]
    again = k_sweep(small_corpus, "simple", ["KNN", "NB"], ks, seed=2, folds=5)
    assert [r.fold_accuracies for r in res.rows] == [r.fold_accuracies for r in again.rows]
    assert all(0 <= r.mean_accuracy <= 1 for r in res.rows)
    assert res.rows[0].early and not res.rows[-1].early


def test_sweep_k200_not_worse_than_k5(small_corpus):
    res = k_sweep(small_corpus, "simple", ["RF"], [5, 200], seed=0, folds=5,
                  hyperparams={"RF": {"n_estimators": 30}})
    assert res.accuracy(200, "RF") >= res.accuracy(5, "RF")


def test_sweep_reports_failing_cell():
    ts = [Trace.from_packets([(0, 1, 100)], label=l) for l in ["a", "b"] * 3]
    with pytest.raises(EvaluationError, match="k=5, algorithm=RF"):
        k_sweep(ts, "simple", ["RF"], [5], folds=5)


def test_stability_from_sweep(small_corpus):
    res = k_sweep(small_corpus, "transfer", ["RF"], [5, 10], seed=0, folds=5,
                  hyperparams={"RF": {"n_estimators": 10}})
    var = importance_stability(res, "RF")
    assert set(var) == set(transfer_schema(5).names)
    assert all(v >= 0 for v in var.values())
