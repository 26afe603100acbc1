"""Newline-delimited JSON trace files.

Each trace is a header object ``{"protocol": ..., "label": ...}`` followed by
one ``{"ts": ..., "dir": "+"|"-", "size": ...}`` object per packet. A file may
open with a single ``{"manifest": {...}}`` line, which readers skip.
"""
from __future__ import annotations

import json
from typing import Iterable, Optional

import numpy as np

from ..trace import Protocol, Trace


class TraceFileError(ValueError):
    def __init__(self, path, lineno: int, msg: str):
        super().__init__(f"{path}: line {lineno}: {msg}")
        self.lineno = lineno


def dump_trace_lines(trace: Trace) -> Iterable[str]:
    yield json.dumps({"protocol": trace.protocol.value, "label": trace.label})
    for t, d, s in zip(trace.times.tolist(), trace.dirs.tolist(), trace.sizes.tolist()):
        yield json.dumps({"ts": float(t), "dir": "+" if d > 0 else "-", "size": int(s)})


def store_traces(traces: Iterable[Trace], path, manifest: Optional[dict] = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if manifest is not None:
            fh.write(json.dumps({"manifest": manifest}, sort_keys=True) + "\n")
        for tr in traces:
            for line in dump_trace_lines(tr):
                fh.write(line + "\n")


def read_manifest(path) -> Optional[dict]:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    if not first.strip():
        return None
    try:
        obj = json.loads(first)
    except json.JSONDecodeError:
        return None
    return obj.get("manifest") if isinstance(obj, dict) else None


def load_traces(path) -> list[Trace]:
    traces: list[Trace] = []
    header = None
    times: list[float] = []
    dirs: list[int] = []
    sizes: list[int] = []

    def flush():
        if header is not None:
            traces.append(Trace(np.array(times, dtype=np.float64), np.array(dirs, dtype=np.int8),
                                np.array(sizes, dtype=np.int64), header[0], header[1]))

    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise TraceFileError(path, lineno, f"invalid JSON ({e.msg})") from None
            if not isinstance(obj, dict):
                raise TraceFileError(path, lineno, "expected a JSON object")
            if "ts" in obj:
                if header is None:
                    raise TraceFileError(path, lineno, "packet line before any trace header")
                try:
                    ts, d, size = obj["ts"], obj["dir"], obj["size"]
                except KeyError as e:
                    raise TraceFileError(path, lineno, f"packet missing field {e}") from None
                if d not in ("+", "-"):
                    raise TraceFileError(path, lineno, f"bad direction {d!r}")
                if not isinstance(size, int) or isinstance(size, bool):
                    raise TraceFileError(path, lineno, f"size must be an integer, got {size!r}")
                if not isinstance(ts, (int, float)) or isinstance(ts, bool):
                    raise TraceFileError(path, lineno, f"ts must be a number, got {ts!r}")
                times.append(float(ts))
                dirs.append(1 if d == "+" else -1)
                sizes.append(size)
                continue
            if "manifest" in obj and lineno == 1:
                continue
            if "protocol" not in obj:
                raise TraceFileError(path, lineno, "trace header missing 'protocol'")
            try:
                proto = Protocol.parse(obj["protocol"])
            except (ValueError, AttributeError):
                raise TraceFileError(path, lineno, f"unknown protocol {obj['protocol']!r}") from None
            label = obj.get("label")
            if label is not None and not isinstance(label, str):
                raise TraceFileError(path, lineno, "label must be a string or null")
            flush()
            header = (proto, label)
            times, dirs, sizes = [], [], []
    flush()
    return traces
