"""Decompressor: closed-form event prediction along flow trajectories."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import _kernels
from .model import MAX_COORD, CodecConfig, Event, EventStream, FlowEvent, FlowEventArray, pack_keys
from .wire import FlowEventPkt, Packet, PlainEvent, SendEnd, SendStart

SUBPIXEL_SCALE = _kernels.SUBPIXEL_SCALE


class ProtocolError(ValueError):
    def __init__(self, message: str, index: int):
        super().__init__(f"{message} (packet {index})")
        self.index = index


@dataclass(frozen=True)
class PredictionWindow:
    send_end: int
    predict_time: int

    @property
    def stop(self) -> int:
        return self.send_end + self.predict_time


def modified_bresenham(x0: int, y0: int, x1: int, y1: int) -> list[tuple[int, int]]:
    """Thickened 4-connected line from (x0, y0) to (x1, y1), start excluded.

    Each step appends the new pixel and the opposite corner of the 2x2 block
    it completes. Duplicates are dropped, first occurrence kept.
    """
    x_dist = abs(x1 - x0)
    y_dist = -abs(y1 - y0)
    x_step = 1 if x0 < x1 else -1
    y_step = 1 if y0 < y1 else -1
    error = x_dist + y_dist
    coords: dict[tuple[int, int], None] = {}
    while x0 != x1 or y0 != y1:
        if 2 * error - y_dist > x_dist - 2 * error:
            error += y_dist
            x0 += x_step
            coords[(x0, y0)] = None
            coords[(x0 - x_step, y0 + y_step)] = None
        else:
            error += x_dist
            y0 += y_step
            coords[(x0, y0)] = None
            coords[(x0 + x_step, y0 - y_step)] = None
    return list(coords)


def subpixel_candidates(ex: float, ey: float) -> list[tuple[int, int]]:
    """Candidate pixels for a trajectory from the origin to (ex, ey).

    Same walk and thickening as :func:`modified_bresenham`, but the step
    decision uses the fractional end point in 1/65536 px fixed point, so the
    walk follows the true direction instead of the rounded one. The walk ends
    on the pixel block reached by rounding the end point away from zero. For
    integer end points the output equals ``modified_bresenham(0, 0, ex, ey)``.
    """
    kx = math.ceil(abs(ex))
    ky = math.ceil(abs(ey))
    dx = math.floor(abs(ex) * SUBPIXEL_SCALE + 0.5)
    dy = math.floor(abs(ey) * SUBPIXEL_SCALE + 0.5)
    sx = 1 if ex > 0 else -1
    sy = 1 if ey > 0 else -1
    k = m = 0
    out = []
    while k < kx or m < ky:
        if m >= ky or (k < kx and dx * (4 * m + 3) > dy * (4 * k + 3)):
            k += 1
            out.append((sx * k, sy * m))
            out.append((sx * k - sx, sy * m + sy))
        else:
            m += 1
            out.append((sx * k, sy * m))
            out.append((sx * k + sx, sy * m - sy))
    return out


def t_min(vx: float, vy: float, xp: float, yp: float) -> float:
    """Time (s) at which the trajectory from the origin passes closest to (xp, yp)."""
    den = 2 * vx * vx + 2 * vy * vy
    if den == 0:
        raise ZeroDivisionError("t_min undefined for zero velocity")
    return (2 * vy * yp + 2 * vx * xp) / den


def min_dist_sq(vx: float, vy: float, xp: float, yp: float, t: float) -> float:
    return (vx * t - xp) ** 2 + (vy * t - yp) ** 2


def predict_events(
    fe: FlowEvent,
    win: PredictionWindow,
    xi: float,
    width: int = MAX_COORD + 1,
    height: int = MAX_COORD + 1,
) -> list[Event]:
    """Events predicted from one flow event inside ``(send_end, send_end + PT]``."""
    e = fe.event
    vx, vy = float(fe.vx), float(fe.vy)
    den = vx * vx + vy * vy
    if den == 0.0:
        return []
    stop = win.stop
    dur = stop - e.t
    ex = vx * dur / 1e6
    ey = vy * dur / 1e6
    xi2 = xi * xi
    preds = []
    for xp, yp in subpixel_candidates(ex, ey):
        tm = (vx * xp + vy * yp) / den
        d2 = (vx * tm - xp) * (vx * tm - xp) + (vy * tm - yp) * (vy * tm - yp)
        if d2 < xi2:
            t = e.t + math.floor(tm * 1e6 + 0.5)
            px, py = e.x + xp, e.y + yp
            if win.send_end < t <= stop and 0 <= px < width and 0 <= py < height:
                preds.append(Event(px, py, t, e.p))
    return preds


def _as_array(flow_events) -> FlowEventArray:
    if isinstance(flow_events, FlowEventArray):
        return flow_events
    return FlowEventArray.from_list(list(flow_events))


def predict_keys(
    flow_events,
    win: PredictionWindow,
    xi: float,
    parallelism: int = 1,
    width: int = MAX_COORD + 1,
    height: int = MAX_COORD + 1,
) -> np.ndarray:
    """Unsorted packed keys of every prediction.

    Work is split into contiguous chunks, one per worker; the chunks are
    concatenated in input order, so the multiset of keys (and hence the sorted
    output) does not depend on ``parallelism``.
    """
    fa = _as_array(flow_events)
    n = len(fa)
    if n == 0:
        return np.zeros(0, np.uint64)
    stop = win.stop
    cap = _kernels.candidate_capacity(fa.t, fa.vx, fa.vy, stop)
    offs = np.zeros(n + 1, np.int64)
    np.cumsum(cap, out=offs[1:])
    out = np.empty(int(offs[-1]), np.uint64)
    args = (fa.x, fa.y, fa.t, fa.p, fa.vx, fa.vy)

    def run(lo, hi):
        end = _kernels.predict_range(
            *args, lo, hi, win.send_end, stop, xi * xi, width, height, out, offs[lo]
        )
        return out[offs[lo] : end]

    workers = max(1, min(int(parallelism), n))
    if workers == 1:
        return run(0, n).copy()
    bounds = np.linspace(0, n, workers + 1).astype(int)
    with ThreadPoolExecutor(workers) as pool:
        parts = list(pool.map(run, bounds[:-1], bounds[1:]))
    return np.concatenate(parts)


def sort_keys(keys: np.ndarray) -> np.ndarray:
    # numpy's default sort is introsort
    return np.sort(keys, kind="quicksort")


def rx_predict_batch(
    flow_events,
    win: PredictionWindow,
    xi: float,
    parallelism: int = 1,
    width: int = MAX_COORD + 1,
    height: int = MAX_COORD + 1,
) -> EventStream:
    keys = predict_keys(flow_events, win, xi, parallelism, width, height)
    return EventStream.from_keys(sort_keys(keys), width, height)


def _sort_batch(keys: np.ndarray, sort_interval_us: int | None) -> np.ndarray:
    if not sort_interval_us:
        return sort_keys(keys)
    # micro-batches: bucket by time interval, sort each bucket
    t = keys >> np.uint64(32)
    bucket = t // np.uint64(sort_interval_us)
    parts = []
    for b in np.unique(bucket):
        parts.append(sort_keys(keys[bucket == b]))
    return np.concatenate(parts) if parts else keys


class _Cycle:
    def __init__(self):
        self.sent: list[Event] = []
        self.flow: list[FlowEvent] = []
        self.plain_after: list[Event] = []
        self.predicted = np.zeros(0, np.uint64)


def iter_reconstruct(
    packets: Iterable[Packet],
    cfg: CodecConfig,
    parallelism: int = 1,
    sort_interval_us: int | None = None,
) -> Iterator[np.ndarray]:
    """Yield sorted packed-key batches, one per send/predict cycle."""
    w, h = cfg.sensor_width, cfg.sensor_height
    cycle: _Cycle | None = None
    predicting = False

    def flush(c: _Cycle) -> np.ndarray:
        ev = c.sent + c.plain_after
        if ev:
            x, y, t, p = (np.asarray(col, np.int64) for col in zip(*ev))
            own = pack_keys(x, y, t, p)
        else:
            own = np.zeros(0, np.uint64)
        return _sort_batch(np.concatenate([own, c.predicted]), sort_interval_us)

    for i, pkt in enumerate(packets):
        if isinstance(pkt, SendStart):
            if cycle is not None and not predicting:
                raise ProtocolError("SendStart inside a sending phase", i)
            if cycle is not None:
                yield flush(cycle)
            cycle = _Cycle()
            predicting = False
        elif cycle is None:
            raise ProtocolError(f"{type(pkt).__name__} before the first SendStart", i)
        elif isinstance(pkt, SendEnd):
            if predicting:
                raise ProtocolError("SendEnd outside a sending phase", i)
            predicting = True
            if cycle.flow:
                win = PredictionWindow(pkt.t, pkt.predict_time_us)
                cycle.predicted = predict_keys(cycle.flow, win, cfg.pixel_slack, parallelism, w, h)
        elif isinstance(pkt, FlowEventPkt):
            if predicting:
                raise ProtocolError("flow event during a predicting phase", i)
            cycle.sent.append(pkt.event)
            if pkt.vx or pkt.vy:
                cycle.flow.append(FlowEvent(pkt.event, pkt.vx, pkt.vy))
        elif isinstance(pkt, PlainEvent):
            (cycle.plain_after if predicting else cycle.sent).append(pkt.event)
        else:
            raise ProtocolError(f"not a packet: {pkt!r}", i)
    if cycle is not None:
        yield flush(cycle)


def reconstruct(
    packets: Sequence[Packet],
    cfg: CodecConfig,
    parallelism: int = 1,
    sort_interval_us: int | None = None,
) -> EventStream:
    parts = list(iter_reconstruct(packets, cfg, parallelism, sort_interval_us))
    keys = np.concatenate(parts) if parts else np.zeros(0, np.uint64)
    return EventStream.from_keys(keys, cfg.sensor_width, cfg.sensor_height)
