"""Event data model and codec configuration shared by every stage."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

US_PER_S = 1_000_000
US_PER_MS = 1_000

# field widths of the 8-byte event record; also bound the packed sort key
COORD_BITS = 14
MAX_COORD = (1 << COORD_BITS) - 1
MAX_TIMESTAMP = (1 << 32) - 1


class Polarity(IntEnum):
    OFF = 0
    ON = 1


class Event(NamedTuple):
    x: int
    y: int
    t: int
    p: Polarity


@dataclass(frozen=True)
class FlowEvent:
    event: Event
    vx: float
    vy: float

    @property
    def magnitude(self) -> float:
        return flow_magnitude(self)


def flow_magnitude(fe: FlowEvent) -> float:
    """Speed of a flow event in pixels/second."""
    return math.hypot(fe.vx, fe.vy)


@dataclass(frozen=True)
class CodecConfig:
    """Transmitter/receiver parameters.

    ``predict_time_us`` is carried on the wire in whole milliseconds, so it
    must be a multiple of 1000.
    """

    predict_time_us: int = 30 * US_PER_MS
    pixel_slack: float = 0.4
    calibration_count: int = 500
    initial_send_time_us: int = 10 * US_PER_MS
    sensor_width: int = 640
    sensor_height: int = 480
    v_min: float = 1.0
    v_max: float = 2047.0
    # sparse sending phases recalibrate from this many samples
    min_calibration_samples: int = 50
    time_tolerance_us: int = 0

    def __post_init__(self):
        if self.predict_time_us <= 0:
            raise ValueError("predict_time_us must be > 0")
        if self.predict_time_us % US_PER_MS:
            raise ValueError("predict_time_us must be a whole number of milliseconds")
        if not self.pixel_slack > 0:
            raise ValueError("pixel_slack must be > 0")
        if self.calibration_count <= 0:
            raise ValueError("calibration_count must be > 0")
        if self.initial_send_time_us <= 0:
            raise ValueError("initial_send_time_us must be > 0")
        if not 0 < self.sensor_width <= MAX_COORD + 1 or not 0 < self.sensor_height <= MAX_COORD + 1:
            raise ValueError("sensor size must be within 1..16384")
        if not 0 < self.v_min <= self.v_max:
            raise ValueError("need 0 < v_min <= v_max")


def _frozen(a, dtype) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=dtype)
    if a.ndim != 1:
        raise ValueError("event columns must be one-dimensional")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class EventStream:
    """Column store of events; columns are read-only int64 arrays."""

    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    p: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        for name in ("x", "y", "t", "p"):
            object.__setattr__(self, name, _frozen(getattr(self, name), np.int64))
        n = len(self.x)
        if not (len(self.y) == len(self.t) == len(self.p) == n):
            raise ValueError("event columns differ in length")

    @classmethod
    def empty(cls, width: int, height: int) -> EventStream:
        z = np.zeros(0, np.int64)
        return cls(z, z, z, z, width, height)

    @classmethod
    def from_events(cls, events: Iterable[Sequence[int]], width: int, height: int) -> EventStream:
        rows = np.asarray([tuple(e) for e in events], dtype=np.int64).reshape(-1, 4)
        return cls(rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3], width, height)

    @classmethod
    def from_keys(cls, keys: np.ndarray, width: int, height: int) -> EventStream:
        return cls(*unpack_keys(keys), width, height)

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i: int) -> Event:
        return Event(int(self.x[i]), int(self.y[i]), int(self.t[i]), Polarity(int(self.p[i])))

    def __iter__(self) -> Iterator[Event]:
        for x, y, t, p in zip(self.x.tolist(), self.y.tolist(), self.t.tolist(), self.p.tolist()):
            yield Event(x, y, t, Polarity(p))

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            (self.width, self.height) == (other.width, other.height)
            and len(self) == len(other)
            and all(np.array_equal(getattr(self, c), getattr(other, c)) for c in "xytp")
        )

    def take(self, idx) -> EventStream:
        return EventStream(self.x[idx], self.y[idx], self.t[idx], self.p[idx], self.width, self.height)

    def keys(self) -> np.ndarray:
        return pack_keys(self.x, self.y, self.t, self.p)

    def sorted(self) -> EventStream:
        """Events in canonical (t, x, y, p) order."""
        return EventStream.from_keys(np.sort(self.keys()), self.width, self.height)

    @property
    def events(self) -> list[Event]:
        return list(self)


@dataclass(frozen=True, eq=False)
class FlowEventArray:
    """Column store of flow events, the receiver's batch input."""

    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    p: np.ndarray
    vx: np.ndarray
    vy: np.ndarray

    def __post_init__(self):
        for name in ("x", "y", "t", "p"):
            object.__setattr__(self, name, _frozen(getattr(self, name), np.int64))
        for name in ("vx", "vy"):
            object.__setattr__(self, name, _frozen(getattr(self, name), np.float64))

    @classmethod
    def from_list(cls, flow_events: Sequence[FlowEvent]) -> FlowEventArray:
        n = len(flow_events)
        ints = np.empty((n, 4), np.int64)
        vel = np.empty((n, 2), np.float64)
        for i, fe in enumerate(flow_events):
            ints[i] = fe.event
            vel[i] = fe.vx, fe.vy
        return cls(ints[:, 0], ints[:, 1], ints[:, 2], ints[:, 3], vel[:, 0], vel[:, 1])

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i: int) -> FlowEvent:
        e = Event(int(self.x[i]), int(self.y[i]), int(self.t[i]), Polarity(int(self.p[i])))
        return FlowEvent(e, float(self.vx[i]), float(self.vy[i]))


# Packed 64-bit key: t in the high 32 bits, then x, y, p. Sorting keys orders
# events by time with a total tie-break, so sorted output never depends on
# arrival order.
_T_SHIFT = np.uint64(32)
_X_SHIFT = np.uint64(18)
_Y_SHIFT = np.uint64(4)
_COORD_MASK = np.uint64(MAX_COORD)


def pack_keys(x, y, t, p) -> np.ndarray:
    x = np.asarray(x, np.uint64)
    y = np.asarray(y, np.uint64)
    t = np.asarray(t, np.uint64)
    p = np.asarray(p, np.uint64)
    return (t << _T_SHIFT) | (x << _X_SHIFT) | (y << _Y_SHIFT) | p


def unpack_keys(keys: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    keys = np.asarray(keys, np.uint64)
    t = (keys >> _T_SHIFT).astype(np.int64)
    x = ((keys >> _X_SHIFT) & _COORD_MASK).astype(np.int64)
    y = ((keys >> _Y_SHIFT) & _COORD_MASK).astype(np.int64)
    p = (keys & np.uint64(1)).astype(np.int64)
    return x, y, t, p


@dataclass(frozen=True)
class Violation:
    index: int
    rule: str
    message: str = field(default="", compare=False)


def validate_stream(stream: EventStream) -> list[Violation]:
    """Check bounds, timestamp range, polarity and time ordering.

    Violations are returned, never raised.
    """
    out: list[Violation] = []
    x, y, t, p = stream.x, stream.y, stream.t, stream.p
    checks = [
        ("x-bounds", (x < 0) | (x >= stream.width), "x outside [0, width)"),
        ("y-bounds", (y < 0) | (y >= stream.height), "y outside [0, height)"),
        ("t-range", (t < 0) | (t > MAX_TIMESTAMP), "timestamp outside 32-bit range"),
        ("polarity", (p != 0) & (p != 1), "polarity not in {0, 1}"),
    ]
    for rule, bad, msg in checks:
        for i in np.flatnonzero(bad).tolist():
            out.append(Violation(i, rule, msg))
    if len(t) > 1:
        for i in (np.flatnonzero(np.diff(t) < 0) + 1).tolist():
            out.append(Violation(i, "ordering", f"t={int(t[i])} after t={int(t[i - 1])}"))
    out.sort(key=lambda v: (v.index, v.rule))
    return out
