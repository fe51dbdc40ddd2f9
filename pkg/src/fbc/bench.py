"""Receiver latency measurements: prediction plus sort."""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass

import numpy as np

from .model import US_PER_MS
from .receiver import PredictionWindow, predict_keys, sort_keys
from .synth import random_flow_array

# flow events are drawn in [0, SEND_END) and predicted after it
SEND_END = 1000


@dataclass(frozen=True)
class BenchRow:
    sweep: str
    n_events: int
    pt_ms: int
    predict_ms: float
    sort_ms: float
    n_predicted: int
    digest: str

    @property
    def total_ms(self) -> float:
        return self.predict_ms + self.sort_ms

    @property
    def realtime(self) -> bool:
        return self.total_ms < self.pt_ms

    CSV_HEADER = "sweep,n_events,pt_ms,predict_ms,sort_ms,total_ms,realtime,n_predicted,digest"

    def csv(self) -> str:
        return (
            f"{self.sweep},{self.n_events},{self.pt_ms},{self.predict_ms:.3f},{self.sort_ms:.3f},"
            f"{self.total_ms:.3f},{int(self.realtime)},{self.n_predicted},{self.digest}"
        )


def warm_up() -> None:
    """Compile the prediction kernel outside any timed region."""
    fa = random_flow_array(16, seed=0)
    sort_keys(predict_keys(fa, PredictionWindow(SEND_END, US_PER_MS), 0.4, 1, 640, 480))


def measure(
    n_events: int,
    pt_ms: int,
    parallelism: int = 1,
    seed: int = 0,
    repeats: int = 3,
    xi: float = 0.4,
    sensor: tuple[int, int] = (640, 480),
    vel_range: tuple[float, float] = (-1000.0, 1000.0),
    sweep: str = "",
) -> BenchRow:
    """Best-of-``repeats`` latency for one batch of random flow events."""
    fa = random_flow_array(n_events, vel_range, sensor, seed, (0, SEND_END))
    win = PredictionWindow(SEND_END, pt_ms * US_PER_MS)
    best_p = best_s = float("inf")
    out = None
    for _ in range(max(1, repeats)):
        t0 = time.perf_counter()
        keys = predict_keys(fa, win, xi, parallelism, *sensor)
        t1 = time.perf_counter()
        out = sort_keys(keys)
        t2 = time.perf_counter()
        best_p = min(best_p, t1 - t0)
        best_s = min(best_s, t2 - t1)
    digest = hashlib.sha256(out.astype("<u8").tobytes()).hexdigest()[:16]
    return BenchRow(sweep, n_events, pt_ms, best_p * 1e3, best_s * 1e3, len(out), digest)


def run_sweeps(
    pt_values_ms,
    count_values,
    fixed_events: int = 25_000,
    fixed_pt_ms: int = 60,
    parallelism: int = 1,
    seed: int = 0,
    repeats: int = 3,
) -> list[BenchRow]:
    warm_up()
    rows = [measure(fixed_events, pt, parallelism, seed, repeats, sweep="pt") for pt in pt_values_ms]
    rows += [measure(n, fixed_pt_ms, parallelism, seed, repeats, sweep="count") for n in count_values]
    return rows


def scaling_exponent(counts, latencies) -> float:
    """Slope of log(latency) against log(count)."""
    slope, _ = np.polyfit(np.log(np.asarray(counts, float)), np.log(np.asarray(latencies, float)), 1)
    return float(slope)
