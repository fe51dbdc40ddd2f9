"""Bit-exact transmitter -> receiver packet format.

Every record starts with a little-endian 64-bit word::

    bits  0-31  t (us)
    bits 32-45  x          (SendEnd: predict time in ms)
    bits 46-59  y
    bit     60  polarity
    bits 61-63  tag        0 plain, 1 flow, 6 SendStart, 7 SendEnd

A flow record is followed by a 24-bit little-endian field holding two 12-bit
two's-complement velocities (vx in bits 0-11, vy in bits 12-23, 1 px/s units).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Iterable, Iterator, Union

from .model import COORD_BITS, MAX_COORD, MAX_TIMESTAMP, US_PER_MS, Event, Polarity

TAG_PLAIN = 0
TAG_FLOW = 1
TAG_SEND_START = 6
TAG_SEND_END = 7

PLAIN_SIZE = 8
FLOW_SIZE = 11
MARKER_SIZE = 8

VEL_MIN = -2048
VEL_MAX = 2047

_WORD = struct.Struct("<Q")


class WireError(ValueError):
    """Malformed record; ``offset`` is the byte position of the record."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class TruncatedPacketError(WireError):
    pass


class UnknownTagError(WireError):
    pass


class FieldOverflowError(ValueError):
    pass


@dataclass(frozen=True)
class PlainEvent:
    event: Event


@dataclass(frozen=True)
class FlowEventPkt:
    event: Event
    vx: int  # quantized, px/s
    vy: int


@dataclass(frozen=True)
class SendStart:
    t: int


@dataclass(frozen=True)
class SendEnd:
    t: int
    predict_time_us: int


Packet = Union[PlainEvent, FlowEventPkt, SendStart, SendEnd]


def quantize_velocity(v: float) -> int:
    """Round to the nearest 1 px/s (halves away from zero), clamp to 12 bits."""
    q = int(math.copysign(math.floor(abs(v) + 0.5), v))
    return min(VEL_MAX, max(VEL_MIN, q))


def _event_word(e: Event, tag: int) -> int:
    x, y, t, p = e
    if not 0 <= x <= MAX_COORD or not 0 <= y <= MAX_COORD:
        raise FieldOverflowError(f"coordinates ({x}, {y}) exceed {COORD_BITS} bits")
    if not 0 <= t <= MAX_TIMESTAMP:
        raise FieldOverflowError(f"timestamp {t} exceeds 32 bits")
    if p not in (0, 1):
        raise FieldOverflowError(f"polarity {p!r} is not 0/1")
    return t | (x << 32) | (y << 46) | (int(p) << 60) | (tag << 61)


def _marker_word(t: int, tag: int, payload: int = 0) -> int:
    if not 0 <= t <= MAX_TIMESTAMP:
        raise FieldOverflowError(f"timestamp {t} exceeds 32 bits")
    return t | (payload << 32) | (tag << 61)


def encode_packet(pkt: Packet) -> bytes:
    if isinstance(pkt, PlainEvent):
        return _WORD.pack(_event_word(pkt.event, TAG_PLAIN))
    if isinstance(pkt, FlowEventPkt):
        for v in (pkt.vx, pkt.vy):
            if not VEL_MIN <= v <= VEL_MAX:
                raise FieldOverflowError(f"velocity {v} outside 12-bit range")
        vel = (pkt.vx & 0xFFF) | ((pkt.vy & 0xFFF) << 12)
        return _WORD.pack(_event_word(pkt.event, TAG_FLOW)) + vel.to_bytes(3, "little")
    if isinstance(pkt, SendStart):
        return _WORD.pack(_marker_word(pkt.t, TAG_SEND_START))
    if isinstance(pkt, SendEnd):
        ms, rem = divmod(pkt.predict_time_us, US_PER_MS)
        if rem or not 0 < ms <= MAX_COORD:
            raise FieldOverflowError(f"predict time {pkt.predict_time_us} us not encodable in whole ms")
        return _WORD.pack(_marker_word(pkt.t, TAG_SEND_END, ms))
    raise TypeError(f"not a packet: {pkt!r}")


def encode_packets(packets: Iterable[Packet]) -> bytes:
    return b"".join(encode_packet(p) for p in packets)


def _signed12(v: int) -> int:
    return v - 0x1000 if v & 0x800 else v


def iter_packets(data: bytes) -> Iterator[Packet]:
    """Decode records lazily; raises on the first malformed one."""
    view = memoryview(data)
    n = len(view)
    off = 0
    while off < n:
        if n - off < 8:
            raise TruncatedPacketError("truncated record", off)
        (w,) = _WORD.unpack_from(view, off)
        tag = w >> 61
        t = w & 0xFFFFFFFF
        if tag == TAG_PLAIN or tag == TAG_FLOW:
            e = Event((w >> 32) & MAX_COORD, (w >> 46) & MAX_COORD, t, Polarity((w >> 60) & 1))
            if tag == TAG_PLAIN:
                yield PlainEvent(e)
                off += PLAIN_SIZE
            else:
                if n - off < FLOW_SIZE:
                    raise TruncatedPacketError("truncated flow record", off)
                vel = int.from_bytes(view[off + 8 : off + 11], "little")
                yield FlowEventPkt(e, _signed12(vel & 0xFFF), _signed12(vel >> 12))
                off += FLOW_SIZE
        elif tag == TAG_SEND_START:
            yield SendStart(t)
            off += MARKER_SIZE
        elif tag == TAG_SEND_END:
            yield SendEnd(t, ((w >> 32) & MAX_COORD) * US_PER_MS)
            off += MARKER_SIZE
        else:
            raise UnknownTagError(f"unknown tag {tag}", off)


def decode_packets(data: bytes) -> list[Packet]:
    return list(iter_packets(data))


def packet_size(pkt: Packet) -> int:
    return FLOW_SIZE if isinstance(pkt, FlowEventPkt) else PLAIN_SIZE


def payload_byte_count(packets: Iterable[Packet]) -> tuple[int, int, int]:
    """Return ``(n_bytes, n_tx, n_nf)`` over event packets; markers are excluded."""
    n_tx = n_nf = 0
    for pkt in packets:
        if isinstance(pkt, PlainEvent):
            n_tx += 1
            n_nf += 1
        elif isinstance(pkt, FlowEventPkt):
            n_tx += 1
    return PLAIN_SIZE * n_nf + FLOW_SIZE * (n_tx - n_nf), n_tx, n_nf
