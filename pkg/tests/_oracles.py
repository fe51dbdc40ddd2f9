"""Independent reference computations shared by the test modules."""

import math

import numpy as np

from fbc.model import Event


def segment_distance(px, py, x1, y1):
    """Distance from (px, py) to the segment from the origin to (x1, y1)."""
    n = x1 * x1 + y1 * y1
    s = 0.0 if n == 0 else max(0.0, min(1.0, (px * x1 + py * y1) / n))
    return math.hypot(px - s * x1, py - s * y1)


def dense_t_min(vx, vy, xp, yp, lo, hi, step=1e-6):
    """Grid minimisation of the squared trajectory distance over [lo, hi] s."""
    t = np.arange(lo, hi + step / 2, step)
    d2 = (vx * t - xp) ** 2 + (vy * t - yp) ** 2
    i = int(np.argmin(d2))
    return float(t[i]), float(d2[i])


def brute_force_predictions(fe, send_end, stop, xi, width, height):
    """Every pixel in the trajectory bounding box that passes the prediction gates."""
    e = fe.event
    vx, vy = float(fe.vx), float(fe.vy)
    den = vx * vx + vy * vy
    if den == 0:
        return set()
    dur = (stop - e.t) / 1e6
    ex, ey = vx * dur, vy * dur
    out = set()
    for xp in range(math.floor(min(0, ex)) - 1, math.ceil(max(0, ex)) + 2):
        for yp in range(math.floor(min(0, ey)) - 1, math.ceil(max(0, ey)) + 2):
            if xp == 0 and yp == 0:
                continue
            tm = (vx * xp + vy * yp) / den
            d2 = (vx * tm - xp) ** 2 + (vy * tm - yp) ** 2
            if d2 >= xi * xi:
                continue
            t = e.t + math.floor(tm * 1e6 + 0.5)
            px, py = e.x + xp, e.y + yp
            if send_end < t <= stop and 0 <= px < width and 0 <= py < height:
                out.add(Event(px, py, t, e.p))
    return out


def direct_kernel_distance(a, b, sx, sy, st):
    """Kernel distance between two event lists by plain double summation."""

    def k(e, f):
        if e.p != f.p:
            return 0.0
        return math.exp(
            -((e.x - f.x) ** 2) / (2 * sx * sx) - (e.y - f.y) ** 2 / (2 * sy * sy) - (e.t - f.t) ** 2 / (2 * st * st)
        )

    aa = sum(k(e, f) for e in a for f in a)
    bb = sum(k(e, f) for e in b for f in b)
    ab = sum(k(e, f) for e in a for f in b)
    return math.sqrt(max(aa + bb - 2 * ab, 0.0))
