"""Deterministic synthetic event scenes with ground-truth flow.

Objects are bright (or dark) rectangles over a uniform background, translated
by a linear or sinusoidal motion and optionally rotated by a fixed angle.
Pixel (i, j) has its center at (i, j); with angle 0 it is covered while
``X <= i < X + w`` and ``Y <= j < Y + h``. An event fires at the exact
instant an edge crosses a pixel center: ON when the pixel becomes covered by a
bright object, OFF when it is uncovered.

Grid-aligned edges fire a whole row of pixels at the same microsecond; a small
angle spreads those crossings in time the way real, unaligned edges do.
"""

from __future__ import annotations

import math
import shlex
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .model import US_PER_MS, US_PER_S, Event, EventStream, FlowEvent, FlowEventArray


@dataclass(frozen=True)
class Linear:
    vx: float
    vy: float

    def offset(self, t):
        return self.vx * t, self.vy * t

    def velocity(self, t):
        return self.vx + 0 * t, self.vy + 0 * t


@dataclass(frozen=True)
class Oscillation:
    """Sinusoidal position ``A * sin(2*pi*f*t + phase)`` along each axis."""

    amp_x: float
    amp_y: float
    freq_hz: float
    phase: float = 0.0

    def offset(self, t):
        s = np.sin(2 * np.pi * self.freq_hz * t + self.phase)
        return self.amp_x * s, self.amp_y * s

    def velocity(self, t):
        w = 2 * np.pi * self.freq_hz
        c = np.cos(w * t + self.phase)
        return self.amp_x * w * c, self.amp_y * w * c


Motion = Union[Linear, Oscillation]


@dataclass(frozen=True)
class RectObject:
    x: float
    y: float
    w: float
    h: float
    motion: Motion
    bright: bool = True
    angle: float = 0.0  # degrees, counter-clockwise about (x, y)

    def position(self, t):
        ox, oy = self.motion.offset(t)
        return self.x + ox, self.y + oy

    def max_speed(self) -> float:
        m = self.motion
        if isinstance(m, Linear):
            return math.hypot(m.vx, m.vy)
        return math.hypot(m.amp_x, m.amp_y) * 2 * math.pi * m.freq_hz


@dataclass(frozen=True)
class SceneSpec:
    width: int
    height: int
    objects: tuple[RectObject, ...]
    duration_us: int
    noise_rate: float = 0.0  # events/s, uniform over the frame
    seed: int = 0
    v_max: float = 2047.0


@dataclass(frozen=True, eq=False)
class GroundTruth:
    vx: np.ndarray
    vy: np.ndarray
    noise: np.ndarray
    _index: dict = field(default_factory=dict, repr=False)

    def lookup(self, e: Event):
        """(vx, vy, is_noise) of a generated event, or None."""
        i = self._index.get((int(e.x), int(e.y), int(e.t), int(e.p)))
        if i is None:
            return None
        return float(self.vx[i]), float(self.vy[i]), bool(self.noise[i])


def _project(motion: Motion, ex: float, ey: float):
    """Motion of the object along unit direction (ex, ey)."""
    if isinstance(motion, Linear):
        return ("lin", motion.vx * ex + motion.vy * ey)
    return ("osc", motion.amp_x * ex + motion.amp_y * ey, motion.freq_hz, motion.phase)


def _crossings(level: np.ndarray, pm, duration_s: float):
    """Solve ``offset(t) == level`` for every entry of ``level``.

    Returns (entry index, time in s, direction) for crossings in
    [0, duration); direction is the sign of d(offset)/dt. Tangential touches
    are skipped.
    """
    empty = (np.zeros(0, np.int64), np.zeros(0), np.zeros(0, np.int64))
    if pm[0] == "lin":
        v = pm[1]
        if v == 0:
            return empty
        t = level / v
        ok = (t >= 0) & (t < duration_s)
        idx = np.nonzero(ok)[0]
        return idx, t[idx], np.full(len(idx), 1 if v > 0 else -1, np.int64)
    _, amp, freq, phase = pm
    if amp == 0 or freq == 0:
        return empty
    w = 2 * math.pi * freq
    s = level / amp
    inside = np.nonzero(np.abs(s) < 1)[0]
    base = np.arcsin(s[inside])
    k_lo = math.floor((phase - 2 * math.pi) / (2 * math.pi)) - 1
    k_hi = math.ceil((w * duration_s + phase + math.pi) / (2 * math.pi)) + 1
    parts = []
    for theta in (base, math.pi - base):
        d = np.where(amp * np.cos(theta) > 0, 1, -1)
        for k in range(k_lo, k_hi + 1):
            t = (theta - phase + 2 * math.pi * k) / w
            ok = (t >= 0) & (t < duration_s)
            parts.append((inside[ok], t[ok], d[ok]))
    return tuple(np.concatenate(col) for col in zip(*parts))


def _sweep_box(obj: RectObject, width: int, height: int, duration_s: float):
    c, s = math.cos(math.radians(obj.angle)), math.sin(math.radians(obj.angle))
    corners = np.array([[0, 0], [obj.w, 0], [0, obj.h], [obj.w, obj.h]], float)
    pts = np.column_stack([obj.x + corners[:, 0] * c - corners[:, 1] * s, obj.y + corners[:, 0] * s + corners[:, 1] * c])
    m = obj.motion
    if isinstance(m, Linear):
        shifts = [(0.0, 0.0), (m.vx * duration_s, m.vy * duration_s)]
    else:
        shifts = [(-m.amp_x, -m.amp_y), (m.amp_x, m.amp_y)]
    allp = np.vstack([pts + sh for sh in shifts])
    x0 = max(math.floor(allp[:, 0].min()) - 1, 0)
    x1 = min(math.ceil(allp[:, 0].max()) + 1, width - 1)
    y0 = max(math.floor(allp[:, 1].min()) - 1, 0)
    y1 = min(math.ceil(allp[:, 1].max()) + 1, height - 1)
    return x0, x1, y0, y1


def _object_events(obj: RectObject, width: int, height: int, duration_s: float):
    """Events of one object as columns (x, y, t_us, p, vx, vy).

    In object coordinates ``a = u.(p - P)``, ``b = v.(p - P)`` a pixel is
    covered while ``0 <= a < w`` and ``0 <= b < h``. Each of the four edges is
    a level set of one coordinate; a pixel fires when that coordinate crosses
    the edge value while the other one is inside the object.
    """
    x0, x1, y0, y1 = _sweep_box(obj, width, height, duration_s)
    if x1 < x0 or y1 < y0:
        return np.zeros((0, 4), np.int64), np.zeros((0, 2))
    gy, gx = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
    px = gx.ravel().astype(float) - obj.x
    py = gy.ravel().astype(float) - obj.y
    c, s = math.cos(math.radians(obj.angle)), math.sin(math.radians(obj.angle))
    axes = ((c, s), (-s, c))
    extents = (obj.w, obj.h)
    ev_parts, vel_parts = [], []
    for axis in (0, 1):
        ex, ey = axes[axis]
        ox, oy = axes[1 - axis]
        pm = _project(obj.motion, ex, ey)
        coord = px * ex + py * ey
        other = px * ox + py * oy
        for edge, value in ((0, 0.0), (1, extents[axis])):
            idx, tc, d = _crossings(coord - value, pm, duration_s)
            offx, offy = obj.motion.offset(tc)
            b = other[idx] - (offx * ox + offy * oy)
            ok = (b >= 0) & (b < extents[1 - axis])
            idx, tc, d = idx[ok], tc[ok], d[ok]
            covers = (d > 0) == (edge == 1)
            pol = (covers == obj.bright).astype(np.int64)
            t_us = np.floor(tc * US_PER_S + 0.5).astype(np.int64)
            ev_parts.append(np.column_stack([gx.ravel()[idx], gy.ravel()[idx], t_us, pol]))
            vx, vy = obj.motion.velocity(tc)
            vel_parts.append(np.column_stack([vx, vy]).astype(float))
    return np.vstack(ev_parts).astype(np.int64), np.vstack(vel_parts)


def generate(scene: SceneSpec) -> tuple[EventStream, GroundTruth]:
    for obj in scene.objects:
        if obj.w <= 0 or obj.h <= 0:
            raise ValueError(f"degenerate object {obj}")
        if obj.max_speed() > scene.v_max:
            raise ValueError(f"object speed {obj.max_speed():.1f} px/s exceeds v_max")
    if scene.duration_us <= 0:
        raise ValueError("duration must be positive")
    duration_s = scene.duration_us / US_PER_S
    parts = [_object_events(obj, scene.width, scene.height, duration_s) for obj in scene.objects]
    ev = np.vstack([np.zeros((0, 4), np.int64)] + [p[0] for p in parts])
    vel = np.vstack([np.zeros((0, 2))] + [p[1] for p in parts])
    # crossings just before the end can round up to duration_us
    keep = ev[:, 2] < scene.duration_us
    ev, vel = ev[keep], vel[keep]
    noise = np.zeros(len(ev), bool)

    rng = np.random.default_rng(scene.seed)
    n_noise = round(scene.noise_rate * duration_s)
    if n_noise:
        nz = np.column_stack(
            [
                rng.integers(0, scene.width, n_noise),
                rng.integers(0, scene.height, n_noise),
                rng.integers(0, scene.duration_us, n_noise),
                rng.integers(0, 2, n_noise),
            ]
        )
        ev = np.vstack([ev, nz])
        vel = np.vstack([vel, np.zeros((n_noise, 2))])
        noise = np.concatenate([noise, np.ones(n_noise, bool)])

    order = np.lexsort((np.arange(len(ev)), ev[:, 3], ev[:, 1], ev[:, 0], ev[:, 2]))
    ev, vel, noise = ev[order], vel[order], noise[order]
    stream = EventStream(ev[:, 0], ev[:, 1], ev[:, 2], ev[:, 3], scene.width, scene.height)
    index = {}
    for i, key in enumerate(map(tuple, ev.tolist())):
        index.setdefault(key, i)
    truth = GroundTruth(vel[:, 0].copy(), vel[:, 1].copy(), noise, index)
    return stream, truth


def generate_random_events(
    n: int,
    vel_range: tuple[float, float] = (-1000.0, 1000.0),
    sensor: tuple[int, int] = (640, 480),
    seed: int | None = 0,
    t_range: tuple[int, int] = (0, 1000),
    v_min: float = 1.0,
) -> list[FlowEvent]:
    fa = random_flow_array(n, vel_range, sensor, seed, t_range, v_min)
    return [fa[i] for i in range(n)]


def random_flow_array(
    n: int,
    vel_range: tuple[float, float] = (-1000.0, 1000.0),
    sensor: tuple[int, int] = (640, 480),
    seed: int | None = 0,
    t_range: tuple[int, int] = (0, 1000),
    v_min: float = 1.0,
) -> FlowEventArray:
    """Uniform flow events; components uniform in ``vel_range``, speeds below
    ``v_min`` redrawn."""
    rng = np.random.default_rng(seed)
    x = rng.integers(0, sensor[0], n)
    y = rng.integers(0, sensor[1], n)
    t = rng.integers(t_range[0], t_range[1], n) if n else np.zeros(0, np.int64)
    p = rng.integers(0, 2, n)
    v = rng.uniform(vel_range[0], vel_range[1], (n, 2))
    slow = np.hypot(v[:, 0], v[:, 1]) < v_min
    while slow.any():
        v[slow] = rng.uniform(vel_range[0], vel_range[1], (int(slow.sum()), 2))
        slow = np.hypot(v[:, 0], v[:, 1]) < v_min
    return FlowEventArray(x, y, t, p, v[:, 0], v[:, 1])


PRESETS = {
    # bar and square oscillating vertically, qVGA; slightly off-grid edges
    "bar-square": lambda ms, seed: SceneSpec(
        320,
        240,
        (
            RectObject(80, 70, 20, 80, Oscillation(0, 50, 1.0), angle=3.0),
            RectObject(200, 95, 50, 50, Oscillation(0, 45, 0.8, math.pi / 3), angle=-3.0),
        ),
        ms * US_PER_MS,
        noise_rate=0.0,
        seed=seed,
    ),
    # axis-aligned constant velocity, one speed for every edge
    "constant": lambda ms, seed: SceneSpec(
        320,
        240,
        (
            RectObject(20.5, 40.5, 40, 40, Linear(100, 0)),
            RectObject(250.5, 10.5, 50, 12, Linear(0, 100)),
        ),
        ms * US_PER_MS,
        seed=seed,
    ),
    "bar": lambda ms, seed: SceneSpec(
        320, 240, (RectObject(10.5, 100.5, 8, 10, Linear(100, 0)),), ms * US_PER_MS, seed=seed
    ),
}


def preset(name: str, duration_ms: int = 2000, seed: int = 0) -> SceneSpec:
    try:
        return PRESETS[name](duration_ms, seed)
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def _kv(tokens) -> dict[str, str]:
    out = {}
    for tok in tokens:
        k, sep, v = tok.partition("=")
        if not sep:
            raise ValueError(f"expected key=value, got {tok!r}")
        out[k.strip()] = v.strip()
    return out


def parse_scene(text: str) -> SceneSpec:
    """Parse the key=value scene format (see docs/formats.md)."""
    top: dict[str, str] = {}
    objects = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if line.startswith("object"):
                kv = _kv(shlex.split(line)[1:])
                motion_kind = kv.pop("motion", "linear")
                if motion_kind == "linear":
                    motion = Linear(float(kv.pop("vx", 0)), float(kv.pop("vy", 0)))
                elif motion_kind == "osc":
                    motion = Oscillation(
                        float(kv.pop("ax", 0)), float(kv.pop("ay", 0)), float(kv.pop("freq")), float(kv.pop("phase", 0))
                    )
                else:
                    raise ValueError(f"unknown motion {motion_kind!r}")
                polarity = kv.pop("polarity", "bright")
                if polarity not in ("bright", "dark"):
                    raise ValueError(f"polarity must be bright or dark, got {polarity!r}")
                obj = RectObject(
                    float(kv.pop("x")),
                    float(kv.pop("y")),
                    float(kv.pop("w")),
                    float(kv.pop("h")),
                    motion,
                    polarity == "bright",
                    float(kv.pop("angle", 0)),
                )
                if kv:
                    raise ValueError(f"unknown object keys {sorted(kv)}")
                objects.append(obj)
            else:
                top.update(_kv([line]))
        except (KeyError, ValueError) as exc:
            raise ValueError(f"scene line {lineno}: {exc}") from None
    known = {"width", "height", "duration_ms", "noise_rate", "seed"}
    if set(top) - known:
        raise ValueError(f"unknown scene keys {sorted(set(top) - known)}")
    if "width" not in top or "height" not in top:
        raise ValueError("scene needs width and height")
    return SceneSpec(
        int(top["width"]),
        int(top["height"]),
        tuple(objects),
        int(float(top.get("duration_ms", 1000)) * US_PER_MS),
        noise_rate=float(top.get("noise_rate", 0)),
        seed=int(top.get("seed", 0)),
    )
