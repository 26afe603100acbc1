import numpy as np
import pytest
from hypothesis import given, strategies as st

from quicwf.trace import Direction, Packet, Protocol, Trace, early, validate
from strategies import traces


def three():
    return Trace.from_packets([(0.0, 1, 100), (0.1, -1, 1400), (0.2, -1, 60)])


def test_early_prefix():
    t = three()
    assert early(t, 2).packets == t.packets[:2]
    assert early(t, 10) == t
    assert early(t, 1).packets == [t[0]]


def test_early_rejects_bad_k():
    with pytest.raises(ValueError):
        early(three(), 0)


def test_columns_read_only():
    t = three()
    with pytest.raises(ValueError):
        t.sizes[0] = 5


def test_packet_access_and_symbols():
    t = three()
    assert t[1] == Packet(0.1, Direction.NEGATIVE, 1400)
    assert Direction.from_symbol("+") is Direction.POSITIVE
    assert Direction.NEGATIVE.symbol == "-"
    assert Protocol.parse("gquic") is Protocol.GQUIC


def test_validate_clean():
    assert validate(three()) == []


def test_validate_order_violation():
    t = Trace.from_packets([(0.0, 1, 100), (0.5, -1, 100), (0.2, 1, 100)])
    v = validate(t)
    assert [(x.index, x.rule) for x in v] == [(2, "timestamp order")]


def test_validate_size_zero():
    t = Trace.from_packets([(0.0, 1, 0), (0.1, 1, 100)])
    assert [(x.index, x.rule) for x in validate(t)] == [(0, "size")]


def test_validate_direction_and_negative_time():
    t = Trace(np.array([-1.0, 0.5]), np.array([1, 0]), np.array([60, 60]))
    rules = {(x.index, x.rule) for x in validate(t)}
    assert (0, "timestamp") in rules and (1, "direction") in rules


def test_mismatched_columns():
    with pytest.raises(ValueError):
        Trace(np.zeros(2), np.ones(3), np.ones(2))


@given(traces(), st.integers(1, 80), st.integers(0, 80))
def test_prefix_coherence(t, k1, extra):
    k2 = k1 + extra
    a, b = early(t, k1), early(t, k2)
    n = min(k1, len(t))
    assert a.packets == b.packets[:n]


@given(traces(), st.integers(1, 80))
def test_idempotent_and_length(t, k):
    e = early(t, k)
    assert early(e, k) == e
    assert len(e) == min(k, len(t))
