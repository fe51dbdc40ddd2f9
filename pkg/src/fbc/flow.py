"""Per-event optical flow with a validity gate.

Two providers are available: a local plane fit on a time surface (real
recordings) and a ground-truth passthrough for synthetic scenes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .model import US_PER_S, Event, EventStream

UNSET = -1


@dataclass(frozen=True)
class FlowEstimate:
    vx: float
    vy: float
    valid: bool
    residual: float = 0.0  # RMS plane misfit in pixels


INVALID = FlowEstimate(0.0, 0.0, False)


@dataclass(frozen=True, eq=False)
class FlowField:
    """Flow estimates aligned index-for-index with an event stream."""

    vx: np.ndarray
    vy: np.ndarray
    valid: np.ndarray

    def __len__(self) -> int:
        return len(self.vx)

    def __getitem__(self, i: int) -> FlowEstimate:
        return FlowEstimate(float(self.vx[i]), float(self.vy[i]), bool(self.valid[i]))

    @classmethod
    def none(cls, n: int) -> FlowField:
        return cls(np.zeros(n), np.zeros(n), np.zeros(n, bool))


class FlowProvider(Protocol):
    def estimate(self, stream: EventStream) -> FlowField: ...


def gate_speed(vx: float, vy: float, v_min: float, v_max: float) -> bool:
    speed = np.hypot(vx, vy)
    return bool(v_min <= speed <= v_max and abs(vx) <= v_max and abs(vy) <= v_max)


class TimeSurface:
    """Latest timestamp per polarity and pixel; ``UNSET`` where nothing fired."""

    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        self.last_ts = np.full((2, height, width), UNSET, dtype=np.int64)

    def update(self, e: Event) -> None:
        if not (0 <= e.x < self.width and 0 <= e.y < self.height):
            raise ValueError(f"event ({e.x}, {e.y}) outside {self.width}x{self.height} surface")
        self.last_ts[int(e.p), e.y, e.x] = e.t


def update_surface(surface: TimeSurface, e: Event) -> TimeSurface:
    surface.update(e)
    return surface


def plane_fit_flow(
    surface: TimeSurface,
    e: Event,
    window_radius: int = 3,
    dt_max: int = 50_000,
    min_support: int = 8,
    residual_max: float = 0.5,
    v_min: float = 1.0,
    v_max: float = 2047.0,
) -> FlowEstimate:
    """Fit ``t = a*x + b*y + c`` around ``e`` and invert the gradient.

    Uses pixels of the event's polarity within ``window_radius`` (Chebyshev)
    whose latest timestamp lies within ``dt_max`` of ``e.t``. The residual is
    the RMS time misfit scaled by the fitted speed, i.e. in pixels.
    """
    r = window_radius
    x0, x1 = max(e.x - r, 0), min(e.x + r + 1, surface.width)
    y0, y1 = max(e.y - r, 0), min(e.y + r + 1, surface.height)
    patch = surface.last_ts[int(e.p), y0:y1, x0:x1]
    mask = (patch != UNSET) & (e.t - patch <= dt_max) & (patch <= e.t)
    n = int(mask.sum())
    if n < min_support:
        return INVALID

    ys, xs = np.nonzero(mask)
    dx = (xs + x0 - e.x).astype(np.float64)
    dy = (ys + y0 - e.y).astype(np.float64)
    dt = (patch[mask] - e.t).astype(np.float64)
    A = np.column_stack([dx, dy, np.ones(n)])
    coef, _, rank, _ = np.linalg.lstsq(A, dt, rcond=None)
    if rank < 3:
        return INVALID
    a, b, _ = coef
    g2 = a * a + b * b
    if g2 == 0.0:
        return INVALID
    # gradient in us/px -> velocity in px/s
    vx = a / g2 * US_PER_S
    vy = b / g2 * US_PER_S
    rms_us = float(np.sqrt(np.mean((A @ coef - dt) ** 2)))
    residual = rms_us / np.sqrt(g2)
    valid = residual <= residual_max and gate_speed(vx, vy, v_min, v_max)
    return FlowEstimate(float(vx), float(vy), bool(valid), float(residual))


@dataclass
class PlaneFitFlow:
    window_radius: int = 3
    dt_max: int = 50_000
    min_support: int = 8
    residual_max: float = 0.5
    v_min: float = 1.0
    v_max: float = 2047.0

    def estimate(self, stream: EventStream) -> FlowField:
        n = len(stream)
        vx = np.zeros(n)
        vy = np.zeros(n)
        valid = np.zeros(n, bool)
        surface = TimeSurface(stream.width, stream.height)
        kw = dict(
            window_radius=self.window_radius,
            dt_max=self.dt_max,
            min_support=self.min_support,
            residual_max=self.residual_max,
            v_min=self.v_min,
            v_max=self.v_max,
        )
        for i, e in enumerate(stream):
            surface.update(e)
            est = plane_fit_flow(surface, e, **kw)
            vx[i], vy[i], valid[i] = est.vx, est.vy, est.valid
        return FlowField(vx, vy, valid)


def oracle_flow(truth, e: Event, v_min: float = 1.0, v_max: float = 2047.0) -> FlowEstimate:
    """Ground-truth velocity of a synthetic event; noise and unknown events are invalid."""
    hit = truth.lookup(e)
    if hit is None:
        return INVALID
    vx, vy, noise = hit
    if noise:
        return INVALID
    return FlowEstimate(vx, vy, gate_speed(vx, vy, v_min, v_max))


@dataclass
class OracleFlow:
    """Passes through the ground truth recorded by the scene generator.

    ``truth`` must be aligned with the stream being estimated.
    """

    truth: object
    v_min: float = 1.0
    v_max: float = 2047.0

    def estimate(self, stream: EventStream) -> FlowField:
        vx = np.asarray(self.truth.vx, np.float64)
        vy = np.asarray(self.truth.vy, np.float64)
        if len(vx) != len(stream):
            raise ValueError("ground truth is not aligned with the stream")
        speed = np.hypot(vx, vy)
        valid = (
            ~np.asarray(self.truth.noise, bool)
            & (speed >= self.v_min)
            & (speed <= self.v_max)
            & (np.abs(vx) <= self.v_max)
            & (np.abs(vy) <= self.v_max)
        )
        return FlowField(vx.copy(), vy.copy(), valid)
