"""Split captures into per-visit conversations and tailor them to the encrypted data region."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..trace import Protocol, Trace
from . import headers
from .headers import HeaderError
from .pcap import TCP_ACK, TCP_RST, TCP_SYN, RawPacket

log = logging.getLogger(__name__)

TRANSPORT = {Protocol.GQUIC: "UDP", Protocol.IQUIC: "UDP", Protocol.HTTPS: "TCP"}


class TailoringError(ValueError):
    pass


@dataclass(frozen=True)
class Conversation:
    raw_packets: tuple[RawPacket, ...]
    protocol: Protocol
    handshake_end: Optional[int]
    end: int

    @property
    def client(self) -> tuple[str, int]:
        return self.raw_packets[0].src

    @property
    def client_port(self) -> int:
        return self.raw_packets[0].src_port

    def __len__(self) -> int:
        return len(self.raw_packets)


@dataclass
class SplitStats:
    groups: int = 0
    conversations: int = 0
    ignored_transport: int = 0
    unreadable_cid: int = 0


def _gquic_marker(pkts: Sequence[RawPacket]) -> Optional[int]:
    client = pkts[0].src
    seen = 0
    for i, p in enumerate(pkts):
        if p.src != client:
            continue
        try:
            if headers.parse_gquic(p.payload_view).client_hello:
                seen += 1
                if seen == 2:
                    return i
        except HeaderError:
            continue
    return None


def _iquic_marker(pkts: Sequence[RawPacket]) -> Optional[int]:
    last = None
    for i, p in enumerate(pkts):
        if not headers.is_long_header(p.payload_view):
            continue
        try:
            if headers.parse_iquic_long(p.payload_view).packet_type == headers.IQ_HANDSHAKE:
                last = i
        except HeaderError:
            continue
    return last


def _https_marker(pkts: Sequence[RawPacket]) -> Optional[int]:
    client = pkts[0].src
    for i, p in enumerate(pkts):
        if p.src == client and headers.has_change_cipher_spec(p.payload_view):
            return i
    return None


_MARKERS = {Protocol.GQUIC: _gquic_marker, Protocol.IQUIC: _iquic_marker,
            Protocol.HTTPS: _https_marker}


def _make(pkts: list[RawPacket], protocol: Protocol) -> Conversation:
    return Conversation(tuple(pkts), protocol, _MARKERS[protocol](pkts), len(pkts) - 1)


def _split_gquic(group: list[RawPacket], stats: SplitStats) -> list[list[RawPacket]]:
    convs: list[list[RawPacket]] = [[]]
    cid = None
    for p in group:
        try:
            pcid = headers.parse_gquic(p.payload_view).cid
        except HeaderError:
            stats.unreadable_cid += 1
            convs[-1].append(p)
            continue
        if pcid is not None:
            if cid is not None and pcid != cid and convs[-1]:
                convs.append([])
            cid = pcid
        convs[-1].append(p)
    return convs


def _split_iquic(group: list[RawPacket], stats: SplitStats) -> list[list[RawPacket]]:
    convs: list[list[RawPacket]] = [[]]
    cids: set[bytes] = set()
    for p in group:
        payload = p.payload_view
        if headers.is_long_header(payload):
            try:
                h = headers.parse_iquic_long(payload)
            except HeaderError:
                stats.unreadable_cid += 1
                convs[-1].append(p)
                continue
            ids = {c for c in (h.dcid, h.scid) if c}
            if cids and ids and not (ids & cids) and convs[-1]:
                convs.append([])
                cids = set()
            cids |= ids
        elif cids and headers.short_header_dcid(payload, cids) is None:
            stats.unreadable_cid += 1
        convs[-1].append(p)
    return convs


def _split_https(group: list[RawPacket], stats: SplitStats) -> list[list[RawPacket]]:
    convs: list[list[RawPacket]] = [[]]
    closed = False
    for p in group:
        flags = p.tcp_flags or 0
        if closed and flags & TCP_SYN and not flags & TCP_ACK:
            convs.append([])
            closed = False
        convs[-1].append(p)
        if flags & TCP_RST:
            closed = True
    return convs


_SPLITTERS = {Protocol.GQUIC: _split_gquic, Protocol.IQUIC: _split_iquic,
              Protocol.HTTPS: _split_https}


def split_conversations(packets: Sequence[RawPacket], protocol: Protocol | str
                        ) -> tuple[list[Conversation], SplitStats]:
    """Group packets by endpoint pair, then cut each group at protocol-specific boundaries.

    Groups are emitted in order of first appearance.
    """
    protocol = Protocol.parse(protocol)
    stats = SplitStats()
    groups: dict[frozenset, list[RawPacket]] = {}
    want = TRANSPORT[protocol]
    for p in packets:
        if p.transport != want:
            stats.ignored_transport += 1
            continue
        groups.setdefault(frozenset((p.src, p.dst)), []).append(p)
    stats.groups = len(groups)
    out = []
    for group in groups.values():
        for pkts in _SPLITTERS[protocol](group, stats):
            if pkts:
                out.append(_make(pkts, protocol))
    stats.conversations = len(out)
    if stats.unreadable_cid:
        log.warning("%d packet(s) with unreadable connection IDs", stats.unreadable_cid)
    return out, stats


def tailor(conv: Conversation, whole_conversation: bool = False,
           label: Optional[str] = None) -> Trace:
    """Encrypted data traffic of ``conv`` as a trace rebased to the handshake-end packet.

    With ``whole_conversation`` every packet is kept and the first packet is the anchor.
    """
    if len(conv) == 0:
        raise TailoringError("empty conversation")
    if whole_conversation:
        anchor, first = 0, 0
    else:
        if conv.handshake_end is None:
            p = conv.raw_packets[0]
            raise TailoringError(
                f"{conv.protocol.value}: no handshake-end marker in conversation "
                f"{p.src_ip}:{p.src_port} -> {p.dst_ip}:{p.dst_port}")
        anchor, first = conv.handshake_end, conv.handshake_end + 1
    pkts = conv.raw_packets[first:conv.end + 1]
    t0 = conv.raw_packets[anchor].ts_us
    client = conv.client
    times = np.array([(p.ts_us - t0) / 1_000_000 for p in pkts], dtype=np.float64)
    dirs = np.array([1 if p.src == client else -1 for p in pkts], dtype=np.int8)
    sizes = np.array([p.wire_size for p in pkts], dtype=np.int64)
    return Trace(times, dirs, sizes, conv.protocol, label)
