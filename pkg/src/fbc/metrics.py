"""Compression, stream-distance and temporal-error measures."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .model import EventStream


@dataclass(frozen=True)
class MetricParams:
    sigma_x: float = 5.0
    sigma_y: float = 5.0
    sigma_t: float = 5000.0
    cube_w: int | None = None  # None: whole sensor
    cube_h: int | None = None
    cube_len: int = 5000
    te_window: int = 1


class CubeDistance(NamedTuple):
    index: tuple[int, int, int]  # (column, row, time bin)
    t_start_us: int
    raw: float
    distance: float
    n_orig: int
    n_recon: int


@dataclass
class MetricsReport:
    er: float
    cr: float
    wire_cr: float
    per_cube_distance: list[CubeDistance] = field(default_factory=list)
    mean_distance: float = 0.0
    mean_te: float = 0.0
    median_te: float = 0.0
    unmatched: int = 0
    container_overhead_bytes: int = 0
    n_s: int = 0
    n_tx: int = 0
    n_nf: int = 0
    n_out: int = 0
    cascaded_cr: float | None = None

    def lines(self) -> list[str]:
        out = [
            f"events_in      {self.n_s}",
            f"events_sent    {self.n_tx}",
            f"events_noflow  {self.n_nf}",
            f"events_out     {self.n_out}",
            f"ER             {self.er:.4f}",
            f"CR             {self.cr:.4f}",
            f"wire_CR        {self.wire_cr:.4f}",
            f"overhead_bytes {self.container_overhead_bytes}",
            f"distance_mean  {self.mean_distance:.4f}",
            f"cubes          {len(self.per_cube_distance)}",
            f"TE_mean_us     {self.mean_te:.1f}",
            f"TE_median_us   {self.median_te:.1f}",
            f"TE_unmatched   {self.unmatched}",
        ]
        if self.cascaded_cr is not None:
            out.append(f"cascaded_CR    {self.cascaded_cr:.4f}")
        return out


def event_reduction(n_s: int, n_tx: int) -> float:
    if n_s <= 0:
        raise ValueError("event reduction undefined for an empty input stream")
    if not 0 <= n_tx <= n_s:
        raise ValueError("need 0 <= n_tx <= n_s")
    return (n_s - n_tx) / n_s


def compression_ratio(n_s: int, n_tx: int, n_nf: int) -> float:
    if n_tx <= 0:
        raise ValueError("compression ratio undefined when nothing was transmitted")
    if not 0 <= n_nf <= n_tx <= n_s:
        raise ValueError("need 0 <= n_nf <= n_tx <= n_s")
    return (n_s * 8) / ((n_tx - n_nf) * 11 + n_nf * 8)


def _gram_sum(a: np.ndarray, b: np.ndarray, inv2s: np.ndarray, chunk: int = 2048) -> float:
    """Sum of exp(-sum_k d_k^2 * inv2s_k) over all pairs of rows (x, y, t)."""
    if len(a) == 0 or len(b) == 0:
        return 0.0
    total = 0.0
    for i in range(0, len(a), chunk):
        d = a[i : i + chunk, None, :] - b[None, :, :]
        total += float(np.exp(-(d * d) @ inv2s).sum())
    return total


def _kernel_norms(a: np.ndarray, pa: np.ndarray, b: np.ndarray, pb: np.ndarray, inv2s) -> tuple[float, float, float]:
    aa = bb = ab = 0.0
    for pol in (0, 1):
        A = a[pa == pol]
        B = b[pb == pol]
        aa += _gram_sum(A, A, inv2s)
        bb += _gram_sum(B, B, inv2s)
        ab += _gram_sum(A, B, inv2s)
    return aa, bb, ab


def _cube_ids(s: EventStream, params: MetricParams) -> tuple[np.ndarray, int, int]:
    cw = params.cube_w or s.width
    ch = params.cube_h or s.height
    ncx = -(-s.width // cw)
    ncy = -(-s.height // ch)
    return ((s.t // params.cube_len) * ncy + s.y // ch) * ncx + s.x // cw, ncx, ncy


def astsm_distance(orig: EventStream, recon: EventStream, params: MetricParams = MetricParams()) -> list[CubeDistance]:
    """Per-cube kernel distance, normalized by the original events in the cube.

    The kernel is an unnormalized spatiotemporal Gaussian; opposite polarities
    do not interact. Cubes empty in both streams are skipped.
    """
    if (orig.width, orig.height) != (recon.width, recon.height):
        raise ValueError("streams have different sensor geometry")
    inv2s = np.array([1 / (2 * params.sigma_x**2), 1 / (2 * params.sigma_y**2), 1 / (2 * params.sigma_t**2)])
    ida, ncx, ncy = _cube_ids(orig, params)
    idb, _, _ = _cube_ids(recon, params)
    pts_a = np.column_stack([orig.x, orig.y, orig.t]).astype(np.float64)
    pts_b = np.column_stack([recon.x, recon.y, recon.t]).astype(np.float64)
    oa = np.argsort(ida, kind="stable")
    ob = np.argsort(idb, kind="stable")
    ida_s, idb_s = ida[oa], idb[ob]
    out = []
    for cid in np.union1d(ida, idb).tolist():
        sa = oa[np.searchsorted(ida_s, cid, "left") : np.searchsorted(ida_s, cid, "right")]
        sb = ob[np.searchsorted(idb_s, cid, "left") : np.searchsorted(idb_s, cid, "right")]
        # cube origin times are shared, so subtracting one keeps precision
        t0 = (cid // (ncx * ncy)) * params.cube_len
        a = pts_a[sa] - (0, 0, t0)
        b = pts_b[sb] - (0, 0, t0)
        aa, bb, ab = _kernel_norms(a, orig.p[sa], b, recon.p[sb], inv2s)
        raw = math.sqrt(max(aa + bb - 2 * ab, 0.0))
        kx = cid % ncx
        ky = (cid // ncx) % ncy
        kt = cid // (ncx * ncy)
        out.append(CubeDistance((kx, ky, kt), t0, raw, raw / max(1, len(sa)), len(sa), len(sb)))
    return out


def temporal_error(orig: EventStream, recon: EventStream, te_window: int = 1) -> tuple[float, float, int]:
    """Match each reconstructed event to the temporally closest original event
    in its (2w+1)^2 neighborhood; returns (mean, median, unmatched)."""
    if (orig.width, orig.height) != (recon.width, recon.height):
        raise ValueError("streams have different sensor geometry")
    if len(recon) == 0:
        return 0.0, 0.0, 0
    if len(orig) == 0:
        return 0.0, 0.0, len(recon)
    w = orig.width
    pid = orig.y * w + orig.x
    okeys = np.sort((pid << 32) | orig.t)
    best = np.full(len(recon), np.iinfo(np.int64).max, np.int64)
    for dy in range(-te_window, te_window + 1):
        for dx in range(-te_window, te_window + 1):
            nx = recon.x + dx
            ny = recon.y + dy
            inside = (nx >= 0) & (nx < w) & (ny >= 0) & (ny < orig.height)
            target = np.where(inside, ny * w + nx, -1)
            q = (target << 32) | recon.t
            pos = np.searchsorted(okeys, q)
            for cand in (pos - 1, pos):
                ok = inside & (cand >= 0) & (cand < len(okeys))
                c = np.clip(cand, 0, len(okeys) - 1)
                same = ok & ((okeys[c] >> 32) == target)
                dt = np.abs((okeys[c] & 0xFFFFFFFF) - recon.t)
                best = np.where(same & (dt < best), dt, best)
    matched = best != np.iinfo(np.int64).max
    unmatched = int((~matched).sum())
    if not matched.any():
        return 0.0, 0.0, unmatched
    te = best[matched].astype(np.float64)
    return float(te.mean()), float(np.median(te)), unmatched


def random_reduce(stream: EventStream, target_er: float, seed: int | None = None) -> EventStream:
    """Uniformly drop round(target_er * N) events, preserving order."""
    if not 0 <= target_er <= 1:
        raise ValueError("target_er must lie in [0, 1]")
    n = len(stream)
    keep = n - round(target_er * n)
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(n, size=keep, replace=False)) if keep else np.zeros(0, np.int64)
    return stream.take(idx)


def mean_distance(cubes: list[CubeDistance]) -> float:
    return float(np.mean([c.distance for c in cubes])) if cubes else 0.0
