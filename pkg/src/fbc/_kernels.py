"""Compiled batch prediction kernel.

Arithmetic mirrors ``receiver.predict_events`` operation for operation (same
operand order, true division, no fast-math) so both paths emit bit-identical
timestamps.
"""

import math

import numba
import numpy as np

SUBPIXEL_SCALE = 1 << 16


@numba.njit(cache=True, nogil=True)
def _extent(v, dur):
    # trajectory length along one axis over dur microseconds
    e = v * dur / 1e6
    return e, np.int64(math.ceil(abs(e)))


@numba.njit(cache=True, nogil=True)
def candidate_capacity(t, vx, vy, stop):
    n = t.shape[0]
    out = np.empty(n, np.int64)
    for i in range(n):
        dur = stop - t[i]
        _, kx = _extent(vx[i], dur)
        _, ky = _extent(vy[i], dur)
        out[i] = 2 * (kx + ky)
    return out


@numba.njit(cache=True, nogil=True)
def predict_range(x, y, t, p, vx, vy, lo, hi, send_end, stop, xi2, width, height, out, start):
    """Predict events lo..hi-1, appending packed keys to out[start:].

    Returns the index one past the last key written.
    """
    j = start
    for i in range(lo, hi):
        vxi = vx[i]
        vyi = vy[i]
        den = vxi * vxi + vyi * vyi
        if den == 0.0:
            continue
        dur = stop - t[i]
        ex, kx = _extent(vxi, dur)
        ey, ky = _extent(vyi, dur)
        dx_fixed = np.int64(math.floor(abs(ex) * SUBPIXEL_SCALE + 0.5))
        dy_fixed = np.int64(math.floor(abs(ey) * SUBPIXEL_SCALE + 0.5))
        sx = 1 if ex > 0 else -1
        sy = 1 if ey > 0 else -1
        ti = t[i]
        x0 = x[i]
        y0 = y[i]
        pol = np.uint64(p[i])
        k = 0
        m = 0
        while k < kx or m < ky:
            if m >= ky or (k < kx and dx_fixed * (4 * m + 3) > dy_fixed * (4 * k + 3)):
                k += 1
                a = sx * k
                b = sy * m
                c = a - sx
                d = b + sy
            else:
                m += 1
                a = sx * k
                b = sy * m
                c = a + sx
                d = b - sy
            for q in range(2):
                if q == 0:
                    xp = a
                    yp = b
                else:
                    xp = c
                    yp = d
                tm = (vxi * xp + vyi * yp) / den
                ddx = vxi * tm - xp
                ddy = vyi * tm - yp
                if ddx * ddx + ddy * ddy < xi2:
                    tt = ti + np.int64(math.floor(tm * 1e6 + 0.5))
                    px = x0 + xp
                    py = y0 + yp
                    if send_end < tt <= stop and 0 <= px < width and 0 <= py < height:
                        out[j] = (
                            (np.uint64(tt) << np.uint64(32))
                            | (np.uint64(px) << np.uint64(18))
                            | (np.uint64(py) << np.uint64(4))
                            | pol
                        )
                        j += 1
    return j
