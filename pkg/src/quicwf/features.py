"""Simple and Transfer feature extraction.

Every function takes a :class:`~quicwf.trace.Trace` and makes one vectorised
pass over its columns.
"""
from __future__ import annotations

import enum
import logging
from typing import NamedTuple, Sequence

import numpy as np

from .dataset import Dataset, FeatureSchema
from .trace import Direction, Trace, early

log = logging.getLogger(__name__)

SIZE_MIN = 54
SIZE_MAX = 1514
SIZE_DIM = SIZE_MAX - SIZE_MIN + 1  # 1461

# upper bounds (inclusive) of Tiny, Small, Medium; Large is everything above
TINY_MAX = 79
SMALL_MAX = 159
MEDIUM_MAX = 1279

SIMPLE_NAMES = ("n_pt", "n_nt", "n_ps", "n_ns", "n_pm", "n_nm", "n_pl", "n_nl")
SCALAR_SEGMENTS = ("negative", "cum_size", "cum_size_dir", "burst_count", "burst_max",
                   "burst_mean", "total_time")
FEATURE_SETS = ("simple", "transfer")


class FeaturizationError(ValueError):
    pass


class PacketCategory(enum.IntEnum):
    POSITIVE_TINY = 0
    NEGATIVE_TINY = 1
    POSITIVE_SMALL = 2
    NEGATIVE_SMALL = 3
    POSITIVE_MEDIUM = 4
    NEGATIVE_MEDIUM = 5
    POSITIVE_LARGE = 6
    NEGATIVE_LARGE = 7


class BurstStats(NamedTuple):
    count: int
    max_len: int
    mean_len: float


def _size_class(sizes: np.ndarray) -> np.ndarray:
    return np.searchsorted(np.array([TINY_MAX, SMALL_MAX, MEDIUM_MAX]), sizes, side="left")


def categorize(direction: Direction | int, size: int) -> PacketCategory:
    if size < 1:
        raise ValueError(f"size must be >= 1, got {size}")
    cls = int(_size_class(np.array([size]))[0])
    return PacketCategory(2 * cls + (1 if int(direction) < 0 else 0))


def _require_packets(trace: Trace) -> None:
    if len(trace) == 0:
        raise FeaturizationError("cannot featurize an empty trace")


def simple_features(trace: Trace) -> np.ndarray:
    """Counts per direction x size category, ordered as ``SIMPLE_NAMES``."""
    _require_packets(trace)
    cat = 2 * _size_class(trace.sizes) + (trace.dirs < 0)
    return np.bincount(cat, minlength=8).astype(np.float64)


def size_axis_index(sizes: np.ndarray) -> tuple[np.ndarray, int]:
    """Map sizes onto the [54, 1514] axis; returns indices and the clamp count."""
    clamped = int(np.count_nonzero((sizes < SIZE_MIN) | (sizes > SIZE_MAX)))
    return np.clip(sizes, SIZE_MIN, SIZE_MAX) - SIZE_MIN, clamped


def packet_size_count(trace: Trace) -> np.ndarray:
    _require_packets(trace)
    idx, _ = size_axis_index(trace.sizes)
    return np.bincount(idx, minlength=SIZE_DIM).astype(np.float64)


def unique_packet_size(trace: Trace) -> np.ndarray:
    return np.sign(packet_size_count(trace))


def packet_order(trace: Trace, k: int) -> np.ndarray:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    out = np.zeros(k)
    n = min(k, len(trace))
    out[:n] = trace.sizes[:n]
    return out


def inter_arrival(trace: Trace, k: int) -> np.ndarray:
    """Gaps between consecutive packets; the first gap is measured from t=0 (the anchor)."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    n = min(k, len(trace))
    gaps = np.diff(trace.times[:n], prepend=0.0)
    bad = np.flatnonzero(gaps < 0)
    if bad.size:
        i = int(bad[0])
        raise FeaturizationError(f"negative inter-arrival time at packet index {i}")
    out = np.zeros(k)
    out[:n] = gaps
    return out


def negative_count(trace: Trace) -> int:
    return int(np.count_nonzero(trace.dirs < 0))


def cumulative_size(trace: Trace) -> int:
    return int(trace.sizes.sum())


def cumulative_size_directed(trace: Trace) -> int:
    return int((trace.sizes * trace.dirs).sum())


def bursts(trace: Trace) -> BurstStats:
    """Maximal same-direction runs."""
    _require_packets(trace)
    starts = np.flatnonzero(np.diff(trace.dirs) != 0) + 1
    bounds = np.concatenate(([0], starts, [len(trace)]))
    lengths = np.diff(bounds)
    count = len(lengths)
    return BurstStats(count, int(lengths.max()), len(trace) / count)


def total_time(trace: Trace) -> float:
    if len(trace) == 0:
        return 0.0
    return float(trace.times[-1] - trace.times[0])


def simple_schema() -> FeatureSchema:
    return FeatureSchema.from_lengths([(n, 1) for n in SIMPLE_NAMES])


def transfer_schema(k: int) -> FeatureSchema:
    return FeatureSchema.from_lengths(
        [("unique_size", SIZE_DIM), ("size_count", SIZE_DIM), ("order", k),
         ("inter_arrival", k)] + [(n, 1) for n in SCALAR_SEGMENTS])


def schema_for(feature_set: str, k: int) -> FeatureSchema:
    if feature_set == "simple":
        return simple_schema()
    if feature_set == "transfer":
        return transfer_schema(k)
    raise ValueError(f"unknown feature set {feature_set!r}")


def transfer_features(trace: Trace, k: int) -> np.ndarray:
    trace = early(trace, k)
    _require_packets(trace)
    counts = packet_size_count(trace)
    b = bursts(trace)
    tail = [negative_count(trace), cumulative_size(trace), cumulative_size_directed(trace),
            b.count, b.max_len, b.mean_len, total_time(trace)]
    return np.concatenate([np.sign(counts), counts, packet_order(trace, k),
                           inter_arrival(trace, k), np.array(tail, dtype=np.float64)])


def featurize(trace: Trace, feature_set: str, k: int) -> np.ndarray:
    if feature_set == "simple":
        return simple_features(early(trace, k))
    if feature_set == "transfer":
        return transfer_features(trace, k)
    raise ValueError(f"unknown feature set {feature_set!r}")


def featurize_dataset(traces: Sequence[Trace], feature_set: str, k: int) -> Dataset:
    """Truncate each trace to ``k`` packets and featurize it.

    Empty traces are skipped and counted in ``Dataset.skipped``.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    schema = schema_for(feature_set, k)
    rows, labels, skipped = [], [], 0
    for i, tr in enumerate(traces):
        if tr.label is None:
            raise FeaturizationError(f"trace {i} has no label")
        if len(tr) == 0:
            skipped += 1
            continue
        try:
            rows.append(featurize(tr, feature_set, k))
        except FeaturizationError as e:
            raise FeaturizationError(f"trace {i}: {e}") from None
        labels.append(tr.label)
    if skipped:
        log.warning("skipped %d empty trace(s)", skipped)
    if len(set(labels)) < 2:
        raise FeaturizationError(f"need at least 2 classes, got {len(set(labels))}")
    X = np.vstack(rows) if rows else np.zeros((0, schema.dim))
    return Dataset(X, tuple(labels), schema, k, feature_set, skipped)
