import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from quicwf import features as F
from quicwf.features import PacketCategory as C
from quicwf.trace import Trace, early
from strategies import packets_of, random_trace, traces


def tr(rows):
    return Trace.from_packets(rows)


def test_categorize_boundaries():
    assert F.categorize(1, 100) == C.POSITIVE_SMALL
    assert F.categorize(-1, 1280) == C.NEGATIVE_LARGE
    assert F.categorize(1, 79) == C.POSITIVE_TINY
    assert F.categorize(1, 80) == C.POSITIVE_SMALL
    assert F.categorize(-1, 159) == C.NEGATIVE_SMALL
    assert F.categorize(-1, 160) == C.NEGATIVE_MEDIUM
    assert F.categorize(1, 1279) == C.POSITIVE_MEDIUM


def test_categorize_exhaustive_axis():
    for d in (1, -1):
        for s in range(1, 2001):
            assert int(F.categorize(d, s)) == oracles.category(d, s)


def test_simple_example():
    t = tr([(0, 1, 100), (0.1, -1, 1400), (0.2, -1, 1400)])
    assert F.simple_features(t).tolist() == [0, 0, 1, 0, 0, 0, 0, 2]


def test_unique_and_count_examples():
    t = tr([(0, 1, 54), (0.1, -1, 1514)])
    u = F.unique_packet_size(t)
    assert u[0] == 1 and u[1460] == 1 and u.sum() == 2
    c = F.packet_size_count(tr([(0, 1, 60), (0.1, 1, 60), (0.2, -1, 70)]))
    assert c[6] == 2 and c[16] == 1 and c.sum() == 3


def test_size_clamping():
    idx, clamped = F.size_axis_index(np.array([10, 54, 1514, 9000]))
    assert idx.tolist() == [0, 0, 1460, 1460] and clamped == 2


def test_unique_ignores_duplicates():
    a = tr([(0, 1, 60), (0.1, 1, 60), (0.2, -1, 70)])
    b = tr([(0, 1, 60), (0.2, -1, 70)])
    assert np.array_equal(F.unique_packet_size(a), F.unique_packet_size(b))


def test_order_padding():
    t = tr([(0, 1, 100), (0.1, -1, 200)])
    assert F.packet_order(t, 4).tolist() == [100, 200, 0, 0]
    assert F.packet_order(t, 2).tolist() == [100, 200]


def test_inter_arrival_example():
    t = tr([(0.1, 1, 100), (0.3, -1, 200)])
    assert np.allclose(F.inter_arrival(t, 4), [0.1, 0.2, 0, 0], atol=1e-12)


def test_inter_arrival_negative_gap_error():
    t = Trace(np.array([0.5, 0.2]), np.array([1, 1]), np.array([60, 60]))
    with pytest.raises(F.FeaturizationError, match="index 1"):
        F.inter_arrival(t, 2)


def test_bursts_examples():
    t = tr([(0, 1, 60), (0, 1, 60), (0, -1, 60), (0, 1, 60)])
    b = F.bursts(t)
    assert (b.count, b.max_len) == (3, 2) and abs(b.mean_len - 4 / 3) < 1e-12
    one = tr([(0, -1, 60)] * 5)
    assert tuple(F.bursts(one)) == (1, 5, 5.0)
    alt = tr([(0, (-1) ** i, 60) for i in range(6)])
    assert tuple(F.bursts(alt)) == (6, 1, 1.0)


def test_empty_trace_errors():
    with pytest.raises(F.FeaturizationError):
        F.simple_features(Trace.empty())
    with pytest.raises(F.FeaturizationError):
        F.bursts(Trace.empty())


def test_transfer_dimension_and_names():
    for k in (1, 5, 40):
        s = F.transfer_schema(k)
        assert s.dim == 1461 * 2 + 2 * k + 7
        assert s.names[:4] == ["unique_size", "size_count", "order", "inter_arrival"]
    assert F.simple_schema().dim == 8


def test_transfer_segments_match_components(rng):
    for _ in range(20):
        t = random_trace(rng)
        k = int(rng.integers(1, 80))
        v = F.transfer_features(t, k)
        s = F.transfer_schema(k)
        e = early(t, k)
        assert np.array_equal(v[s.slice("unique_size")], F.unique_packet_size(e))
        assert np.array_equal(v[s.slice("size_count")], F.packet_size_count(e))
        assert np.array_equal(v[s.slice("order")], F.packet_order(e, k))
        assert np.array_equal(v[s.slice("inter_arrival")], F.inter_arrival(e, k))
        assert v[s.slice("burst_count")][0] == F.bursts(e).count
        assert v[s.slice("total_time")][0] == F.total_time(e)


def test_transfer_matches_oracle(rng):
    for _ in range(50):
        t = random_trace(rng)
        k = int(rng.integers(1, 320))
        got = F.transfer_features(t, k)
        want = np.array(oracles.transfer(packets_of(t), k), dtype=np.float64)
        assert np.allclose(got, want, rtol=0, atol=1e-9)


def test_featurize_dataset_skips_empty_and_needs_labels():
    ts = [tr([(0, 1, 100)]).with_label("a"), Trace.empty(label="a"),
          tr([(0, -1, 1500)]).with_label("b")]
    ds = F.featurize_dataset(ts, "simple", 20)
    assert len(ds) == 2 and ds.skipped == 1 and ds.k == 20
    with pytest.raises(F.FeaturizationError, match="trace 1"):
        F.featurize_dataset([ts[0], tr([(0, 1, 60)])], "simple", 5)


def test_featurize_dataset_rows_match_direct(rng):
    ts = [random_trace(rng, label=f"s{i % 3}") for i in range(10)]
    ds = F.featurize_dataset(ts, "transfer", 20)
    assert ds.X.shape == (10, F.transfer_schema(20).dim)
    for i, t in enumerate(ts):
        assert np.array_equal(ds.X[i], F.featurize(t, "transfer", 20))


@given(traces(), st.integers(1, 80))
def test_simple_partition(t, k):
    v = F.simple_features(early(t, k))
    assert v.sum() == min(k, len(t))


@given(traces())
def test_burst_conservation(t):
    b = F.bursts(t)
    assert abs(b.count * b.mean_len - len(t)) < 1e-9


@given(traces())
def test_unique_is_sign_of_count(t):
    assert np.array_equal(F.unique_packet_size(t), np.sign(F.packet_size_count(t)))
    assert F.packet_size_count(t).sum() == len(t)


@given(traces())
def test_directed_identity(t):
    pos = int(t.sizes[t.dirs > 0].sum())
    assert F.cumulative_size_directed(t) == 2 * pos - F.cumulative_size(t)


@given(traces(), st.integers(1, 40), st.integers(0, 40))
def test_order_prefix(t, k1, extra):
    k2 = k1 + extra
    assert np.array_equal(F.packet_order(t, k2)[:k1], F.packet_order(t, k1))


@given(traces(), st.integers(1, 80))
def test_truncation_consistency(t, k):
    assert np.array_equal(F.transfer_features(t, k), F.transfer_features(early(t, k), k))


@given(traces())
def test_inter_arrival_telescopes(t):
    gaps = F.inter_arrival(t, len(t))
    assert (gaps >= 0).all()
    assert abs(gaps.sum() - t.times[-1]) < 1e-9
