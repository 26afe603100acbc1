"""Capture parsing, conversation splitting and traffic tailoring."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..trace import Protocol, Trace
from .conversations import (Conversation, SplitStats, TailoringError, split_conversations,
                            tailor)
from .jsonl import TraceFileError, load_traces, read_manifest, store_traces
from .pcap import CaptureError, ParseStats, RawPacket, parse_capture, read_capture

__all__ = [
    "CaptureError", "Conversation", "IngestSummary", "ParseStats", "RawPacket", "SplitStats",
    "TailoringError", "TraceFileError", "ingest_capture", "load_traces", "parse_capture",
    "read_capture", "read_manifest", "split_conversations", "store_traces", "tailor",
]


@dataclass
class IngestSummary:
    parse: ParseStats
    split: SplitStats
    tailored: int = 0
    failed: list[str] = field(default_factory=list)

    def line(self) -> str:
        return (f"records={self.parse.records} packets={self.parse.packets} "
                f"skipped={self.parse.skipped} truncated={int(self.parse.truncated)} "
                f"conversations={self.split.conversations} tailored={self.tailored} "
                f"untailored={len(self.failed)} cid_warnings={self.split.unreadable_cid}")


def ingest_capture(data: bytes, protocol: Protocol | str, label: Optional[str] = None,
                   whole_conversation: bool = False) -> tuple[list[Trace], IngestSummary]:
    """Parse, split and tailor one capture; conversations without a marker are reported, not fatal."""
    packets, pstats = parse_capture(data)
    convs, sstats = split_conversations(packets, protocol)
    summary = IngestSummary(pstats, sstats)
    traces = []
    for conv in convs:
        try:
            traces.append(tailor(conv, whole_conversation, label))
        except TailoringError as e:
            summary.failed.append(str(e))
    summary.tailored = len(traces)
    return traces, summary
