"""Packet and trace types plus early-traffic truncation.

A trace is stored column-wise (times, directions, sizes) as read-only numpy
arrays; :class:`Packet` objects are materialised on demand.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Optional

import numpy as np


class Direction(enum.IntEnum):
    POSITIVE = 1    # client -> server
    NEGATIVE = -1   # server -> client

    @property
    def symbol(self) -> str:
        return "+" if self is Direction.POSITIVE else "-"

    @classmethod
    def from_symbol(cls, s: str) -> "Direction":
        if s == "+":
            return cls.POSITIVE
        if s == "-":
            return cls.NEGATIVE
        raise ValueError(f"bad direction symbol {s!r}")


class Protocol(str, enum.Enum):
    GQUIC = "GQUIC"
    IQUIC = "IQUIC"
    HTTPS = "HTTPS"

    @classmethod
    def parse(cls, value: "str | Protocol") -> "Protocol":
        if isinstance(value, Protocol):
            return value
        try:
            return cls(value.upper())
        except ValueError:
            raise ValueError(f"unknown protocol {value!r}") from None


class Packet(NamedTuple):
    timestamp: float
    direction: Direction
    size: int


class Violation(NamedTuple):
    index: int
    rule: str
    detail: str

    def __str__(self) -> str:
        return f"violation at index {self.index}: {self.rule} ({self.detail})"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    if a.flags.writeable:
        a = a.copy()
        a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Trace:
    """Ordered packet sequence of one visit.

    ``times`` are seconds relative to the tailoring anchor, ``dirs`` holds
    +1/-1 and ``sizes`` wire bytes. Construction does not validate; call
    :func:`validate` for that.
    """

    times: np.ndarray
    dirs: np.ndarray
    sizes: np.ndarray
    protocol: Protocol = Protocol.IQUIC
    label: Optional[str] = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64).reshape(-1)
        dirs = np.asarray(self.dirs, dtype=np.int8).reshape(-1)
        sizes = np.asarray(self.sizes, dtype=np.int64).reshape(-1)
        if not (len(times) == len(dirs) == len(sizes)):
            raise ValueError(
                f"column lengths differ: times={len(times)} dirs={len(dirs)} sizes={len(sizes)}")
        object.__setattr__(self, "times", _frozen(times))
        object.__setattr__(self, "dirs", _frozen(dirs))
        object.__setattr__(self, "sizes", _frozen(sizes))
        object.__setattr__(self, "protocol", Protocol.parse(self.protocol))

    @classmethod
    def from_packets(cls, packets: Iterable[Packet | tuple], protocol=Protocol.IQUIC,
                     label: Optional[str] = None) -> "Trace":
        rows = [tuple(p) for p in packets]
        if not rows:
            return cls.empty(protocol, label)
        times, dirs, sizes = zip(*rows)
        return cls(np.array(times, dtype=np.float64), np.array([int(d) for d in dirs]),
                   np.array(sizes, dtype=np.int64), protocol, label)

    @classmethod
    def empty(cls, protocol=Protocol.IQUIC, label: Optional[str] = None) -> "Trace":
        return cls(np.zeros(0), np.zeros(0, dtype=np.int8), np.zeros(0, dtype=np.int64),
                   protocol, label)

    def __len__(self) -> int:
        return len(self.sizes)

    def __iter__(self) -> Iterator[Packet]:
        for t, d, s in zip(self.times.tolist(), self.dirs.tolist(), self.sizes.tolist()):
            yield Packet(t, Direction(d), s)

    def __getitem__(self, i: int) -> Packet:
        return Packet(float(self.times[i]), Direction(int(self.dirs[i])), int(self.sizes[i]))

    @property
    def packets(self) -> list[Packet]:
        return list(self)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return (self.protocol == other.protocol and self.label == other.label
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.dirs, other.dirs)
                and np.array_equal(self.sizes, other.sizes))

    __hash__ = None

    def __repr__(self) -> str:
        return f"Trace(protocol={self.protocol.value}, label={self.label!r}, n={len(self)})"

    def with_label(self, label: Optional[str]) -> "Trace":
        return Trace(self.times, self.dirs, self.sizes, self.protocol, label)


def early(trace: Trace, k: int) -> Trace:
    """First ``min(k, len(trace))`` packets of ``trace``."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k >= len(trace):
        return trace
    return Trace(trace.times[:k], trace.dirs[:k], trace.sizes[:k], trace.protocol, trace.label)


def validate(trace: Trace) -> list[Violation]:
    out = []
    for i, (t, d, s) in enumerate(zip(trace.times.tolist(), trace.dirs.tolist(),
                                      trace.sizes.tolist())):
        if not np.isfinite(t) or t < 0:
            out.append(Violation(i, "timestamp", f"timestamp {t} must be finite and >= 0"))
        if i > 0 and t < trace.times[i - 1]:
            out.append(Violation(i, "timestamp order",
                                 f"{t} precedes previous timestamp {trace.times[i - 1]}"))
        if d not in (1, -1):
            out.append(Violation(i, "direction", f"direction {d} is not +1/-1"))
        if s < 1:
            out.append(Violation(i, "size", f"size {s} must be >= 1"))
    return out
