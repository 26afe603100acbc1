"""Public-header probes for GQUIC (Q043), IETF QUIC (h3-29) and TLS records.

Only cleartext header fields are read; protected payloads are never touched.
"""
from __future__ import annotations

from typing import NamedTuple, Optional

# GQUIC public flags
GQ_VERSION = 0x01
GQ_NONCE = 0x04
GQ_CID = 0x08
GQ_PN_LEN = {0x00: 1, 0x10: 2, 0x20: 4, 0x30: 6}
CHLO_TAG = b"CHLO"

# IETF QUIC long-header packet types (draft-29 / v1 layout)
IQ_INITIAL = 0
IQ_ZERO_RTT = 1
IQ_HANDSHAKE = 2
IQ_RETRY = 3

TLS_CHANGE_CIPHER_SPEC = 0x14


class HeaderError(ValueError):
    pass


class GQuicHeader(NamedTuple):
    cid: Optional[bytes]
    version: Optional[bytes]
    client_hello: bool


def parse_gquic(payload: bytes) -> GQuicHeader:
    """Read the Q043 public header; ``cid`` is None when the flag omits it."""
    if not payload:
        raise HeaderError("empty GQUIC payload")
    flags = payload[0]
    pos = 1
    cid = None
    if flags & GQ_CID:
        if len(payload) < pos + 8:
            raise HeaderError("connection ID truncated")
        cid = bytes(payload[pos:pos + 8])
        pos += 8
    version = None
    if flags & GQ_VERSION:
        if len(payload) < pos + 4:
            raise HeaderError("version truncated")
        version = bytes(payload[pos:pos + 4])
        pos += 4
    # the CHLO tag sits after the packet number, message hash and stream frame header
    return GQuicHeader(cid, version, CHLO_TAG in payload[pos:])


class IQuicLongHeader(NamedTuple):
    packet_type: int
    version: int
    dcid: bytes
    scid: bytes


def is_long_header(payload: bytes) -> bool:
    return bool(payload) and bool(payload[0] & 0x80)


def parse_iquic_long(payload: bytes) -> IQuicLongHeader:
    if len(payload) < 7 or not payload[0] & 0x80:
        raise HeaderError("not an IETF QUIC long header")
    ptype = (payload[0] & 0x30) >> 4
    version = int.from_bytes(payload[1:5], "big")
    dlen = payload[5]
    pos = 6
    if len(payload) < pos + dlen + 1:
        raise HeaderError("DCID truncated")
    dcid = bytes(payload[pos:pos + dlen])
    pos += dlen
    slen = payload[pos]
    pos += 1
    if len(payload) < pos + slen:
        raise HeaderError("SCID truncated")
    return IQuicLongHeader(ptype, version, dcid, bytes(payload[pos:pos + slen]))


def short_header_dcid(payload: bytes, known: set[bytes]) -> Optional[bytes]:
    """DCID of a short-header packet, matched against connection IDs seen so far.

    Short headers do not encode the DCID length, so the longest known CID
    that prefixes the bytes after the first octet wins.
    """
    body = payload[1:]
    best = None
    for cid in known:
        if cid and body.startswith(cid) and (best is None or len(cid) > len(best)):
            best = cid
    return best


def has_change_cipher_spec(payload: bytes) -> bool:
    """Walk TLS records in the visible payload looking for a ChangeCipherSpec."""
    pos = 0
    while pos + 5 <= len(payload):
        ctype, major = payload[pos], payload[pos + 1]
        if major != 0x03 or ctype not in (0x14, 0x15, 0x16, 0x17):
            return False
        if ctype == TLS_CHANGE_CIPHER_SPEC:
            return True
        pos += 5 + int.from_bytes(payload[pos + 3:pos + 5], "big")
    return False
