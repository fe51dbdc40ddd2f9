"""Edge-side compressor: the sending/predicting state machine.

Phases are scheduled on a fixed clock. A sending phase covers
``(start, start + ST]`` and the following predicting phase
``(send_end, send_end + PT]``, the same half-open window the receiver
predicts into.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

from .flow import FlowEstimate, FlowField, gate_speed
from .model import US_PER_S, CodecConfig, Event, EventStream
from .wire import FlowEventPkt, Packet, PlainEvent, SendEnd, SendStart, quantize_velocity, VEL_MAX, VEL_MIN


class Phase(enum.Enum):
    IDLE = "idle"
    SENDING = "sending"
    PREDICTING = "predicting"


class TimeRegressionError(ValueError):
    pass


def compute_send_time(magnitudes: Sequence[float]) -> int:
    """Time in us to travel one pixel at the mean flow speed."""
    if len(magnitudes) == 0:
        raise ValueError("no flow magnitudes to calibrate from")
    mean = math.fsum(magnitudes) / len(magnitudes)
    if mean <= 0:
        raise ValueError("mean flow magnitude must be positive")
    return max(1, round(US_PER_S / mean))


@dataclass(frozen=True)
class TxStats:
    n_s: int
    n_tx: int
    n_nf: int
    n_cycles: int
    n_suppressed: int = 0
    n_markers: int = 0
    n_clamped: int = 0
    send_times_us: tuple[int, ...] = ()


@dataclass
class TxState:
    phase: Phase = Phase.IDLE
    phase_start_t: int = 0
    phase_end_t: int = 0
    current_st: int = 0
    calib_samples: list[float] = field(default_factory=list)
    calibrated: bool = False
    last_t: int = -1


class Transmitter:
    def __init__(self, cfg: CodecConfig):
        self.cfg = cfg
        self.state = TxState(current_st=cfg.initial_send_time_us)
        self._n_s = self._n_tx = self._n_nf = self._n_cycles = 0
        self._n_markers = self._n_clamped = 0
        self._send_times: list[int] = []

    def stats(self) -> TxStats:
        return TxStats(
            self._n_s,
            self._n_tx,
            self._n_nf,
            self._n_cycles,
            n_suppressed=self._n_s - self._n_tx,
            n_markers=self._n_markers,
            n_clamped=self._n_clamped,
            send_times_us=tuple(self._send_times),
        )

    def _start_sending(self, t: int, out: list[Packet]) -> None:
        s = self.state
        s.phase = Phase.SENDING
        s.phase_start_t = t
        s.phase_end_t = t + s.current_st
        s.calib_samples = []
        s.calibrated = False
        self._n_cycles += 1
        self._send_times.append(s.current_st)
        out.append(SendStart(t))

    def _advance(self, out: list[Packet]) -> None:
        s = self.state
        cfg = self.cfg
        if s.phase is Phase.SENDING:
            if not s.calibrated and len(s.calib_samples) >= cfg.min_calibration_samples:
                s.current_st = compute_send_time(s.calib_samples)
            s.phase = Phase.PREDICTING
            s.phase_start_t = s.phase_end_t
            s.phase_end_t += cfg.predict_time_us
            out.append(SendEnd(s.phase_start_t, cfg.predict_time_us))
        else:
            self._start_sending(s.phase_end_t, out)
        self._n_markers += 1

    def process(self, e: Event, flow: FlowEstimate) -> list[Packet]:
        """Feed one event and its flow estimate; return the packets to send."""
        s = self.state
        cfg = self.cfg
        out: list[Packet] = []
        if e.t < s.last_t - cfg.time_tolerance_us:
            raise TimeRegressionError(f"event at t={e.t} after t={s.last_t}")
        s.last_t = max(s.last_t, e.t)
        self._n_s += 1

        if s.phase is Phase.IDLE:
            self._start_sending(e.t, out)
            self._n_markers += 1
        while e.t > s.phase_end_t:
            self._advance(out)

        valid = flow.valid and gate_speed(flow.vx, flow.vy, cfg.v_min, cfg.v_max)
        if s.phase is Phase.SENDING:
            if valid:
                qvx, qvy = quantize_velocity(flow.vx), quantize_velocity(flow.vy)
                if _clamps(flow.vx) or _clamps(flow.vy):
                    self._n_clamped += 1
                out.append(FlowEventPkt(e, qvx, qvy))
                self._n_tx += 1
                if not s.calibrated:
                    s.calib_samples.append(math.hypot(flow.vx, flow.vy))
                    if len(s.calib_samples) >= cfg.calibration_count:
                        s.current_st = compute_send_time(s.calib_samples)
                        s.phase_end_t = max(s.phase_start_t + s.current_st, e.t)
                        s.calibrated = True
            else:
                out.append(PlainEvent(e))
                self._n_tx += 1
                self._n_nf += 1
        elif not valid:
            out.append(PlainEvent(e))
            self._n_tx += 1
            self._n_nf += 1
        return out


def _clamps(v: float) -> bool:
    return not VEL_MIN - 0.5 < v < VEL_MAX + 0.5


def tx_process_event(tx: Transmitter, e: Event, flow: FlowEstimate) -> list[Packet]:
    return tx.process(e, flow)


def tx_stats(tx: Transmitter) -> tuple[int, int, int, int]:
    st = tx.stats()
    return st.n_s, st.n_tx, st.n_nf, st.n_cycles


def compress_stream(stream: EventStream, flow: FlowField, cfg: CodecConfig) -> tuple[list[Packet], TxStats]:
    if len(flow) != len(stream):
        raise ValueError("flow field is not aligned with the stream")
    tx = Transmitter(cfg)
    packets: list[Packet] = []
    vx, vy, valid = flow.vx.tolist(), flow.vy.tolist(), flow.valid.tolist()
    for i, e in enumerate(stream):
        packets.extend(tx.process(e, FlowEstimate(vx[i], vy[i], valid[i])))
    return packets, tx.stats()
