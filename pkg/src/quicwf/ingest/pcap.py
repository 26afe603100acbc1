"""Classic libpcap reader (Ethernet, IPv4, TCP/UDP)."""
from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

log = logging.getLogger(__name__)

MAGIC_NATIVE = 0xA1B2C3D4
LINKTYPE_ETHERNET = 1
GLOBAL_HEADER_LEN = 24
RECORD_HEADER_LEN = 16
PAYLOAD_VIEW_LEN = 64

ETH_IPV4 = 0x0800
ETH_VLAN = 0x8100
IPPROTO_TCP = 6
IPPROTO_UDP = 17

TCP_FIN = 0x01
TCP_SYN = 0x02
TCP_RST = 0x04
TCP_ACK = 0x10


class CaptureError(ValueError):
    pass


class RawPacket(NamedTuple):
    ts_us: int                 # microseconds since the epoch
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    transport: str             # "TCP" | "UDP"
    wire_size: int
    payload_view: bytes        # first PAYLOAD_VIEW_LEN bytes of transport payload
    tcp_flags: Optional[int] = None

    @property
    def timestamp(self) -> float:
        return self.ts_us / 1_000_000

    @property
    def src(self) -> tuple[str, int]:
        return self.src_ip, self.src_port

    @property
    def dst(self) -> tuple[str, int]:
        return self.dst_ip, self.dst_port


@dataclass
class ParseStats:
    records: int = 0
    packets: int = 0
    skipped_non_ip: int = 0
    skipped_fragment: int = 0
    skipped_other: int = 0
    truncated: bool = False
    warnings: list[str] = field(default_factory=list)

    @property
    def skipped(self) -> int:
        return self.skipped_non_ip + self.skipped_fragment + self.skipped_other


def _ip(b: bytes) -> str:
    return ".".join(str(x) for x in b)


def _decode_frame(ts_us: int, wire_size: int, frame: bytes, stats: ParseStats
                  ) -> Optional[RawPacket]:
    if len(frame) < 14:
        stats.skipped_other += 1
        return None
    off = 12
    ethertype = struct.unpack_from("!H", frame, off)[0]
    off += 2
    while ethertype == ETH_VLAN and len(frame) >= off + 4:
        ethertype = struct.unpack_from("!H", frame, off + 2)[0]
        off += 4
    if ethertype != ETH_IPV4:
        stats.skipped_non_ip += 1
        return None
    ip = frame[off:]
    if len(ip) < 20 or ip[0] >> 4 != 4:
        stats.skipped_non_ip += 1
        return None
    ihl = (ip[0] & 0x0F) * 4
    frag = struct.unpack_from("!H", ip, 6)[0]
    if frag & 0x2000 or frag & 0x1FFF:
        stats.skipped_fragment += 1
        return None
    proto = ip[9]
    src_ip, dst_ip = _ip(ip[12:16]), _ip(ip[16:20])
    total_len = struct.unpack_from("!H", ip, 2)[0]
    seg = ip[ihl:min(len(ip), total_len) if total_len >= ihl else len(ip)]
    if proto == IPPROTO_UDP:
        if len(seg) < 8:
            stats.skipped_other += 1
            return None
        sport, dport = struct.unpack_from("!HH", seg, 0)
        return RawPacket(ts_us, src_ip, dst_ip, sport, dport, "UDP", wire_size,
                         bytes(seg[8:8 + PAYLOAD_VIEW_LEN]))
    if proto == IPPROTO_TCP:
        if len(seg) < 20:
            stats.skipped_other += 1
            return None
        sport, dport = struct.unpack_from("!HH", seg, 0)
        doff = (seg[12] >> 4) * 4
        return RawPacket(ts_us, src_ip, dst_ip, sport, dport, "TCP", wire_size,
                         bytes(seg[doff:doff + PAYLOAD_VIEW_LEN]), seg[13])
    stats.skipped_other += 1
    return None


def parse_capture(data: bytes) -> tuple[list[RawPacket], ParseStats]:
    """Decode every IPv4 TCP/UDP frame of a classic pcap byte string, in file order.

    Raises :class:`CaptureError` for a missing or malformed global header.
    A truncated final record is reported in ``stats`` and dropped.
    """
    if len(data) < GLOBAL_HEADER_LEN:
        raise CaptureError(f"capture too short for a pcap global header ({len(data)} bytes)")
    magic_le = struct.unpack_from("<I", data, 0)[0]
    if magic_le == MAGIC_NATIVE:
        endian = "<"
    elif struct.unpack_from(">I", data, 0)[0] == MAGIC_NATIVE:
        endian = ">"
    else:
        raise CaptureError(f"bad pcap magic 0x{data[:4].hex()}")
    _, _, _, _, _, linktype = struct.unpack_from(endian + "HHiIII", data, 4)
    if linktype != LINKTYPE_ETHERNET:
        raise CaptureError(f"unsupported link type {linktype} (only Ethernet)")

    stats = ParseStats()
    packets = []
    pos = GLOBAL_HEADER_LEN
    rec_fmt = endian + "IIII"
    while pos < len(data):
        if len(data) - pos < RECORD_HEADER_LEN:
            stats.truncated = True
            break
        sec, usec, incl, orig = struct.unpack_from(rec_fmt, data, pos)
        pos += RECORD_HEADER_LEN
        if len(data) - pos < incl:
            stats.truncated = True
            break
        frame = data[pos:pos + incl]
        pos += incl
        stats.records += 1
        pkt = _decode_frame(sec * 1_000_000 + usec, orig, frame, stats)
        if pkt is not None:
            packets.append(pkt)
    stats.packets = len(packets)
    if stats.truncated:
        msg = f"truncated final record after {stats.records} complete record(s)"
        stats.warnings.append(msg)
        log.warning(msg)
    return packets, stats


def read_capture(path) -> tuple[list[RawPacket], ParseStats]:
    with open(path, "rb") as fh:
        return parse_capture(fh.read())
