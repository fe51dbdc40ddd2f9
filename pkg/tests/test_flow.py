import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fbc.flow import (
    UNSET,
    FlowField,
    OracleFlow,
    PlaneFitFlow,
    TimeSurface,
    oracle_flow,
    plane_fit_flow,
    update_surface,
)
from fbc.model import Event, Polarity
from fbc.synth import Linear, Oscillation, RectObject, SceneSpec, generate


def test_fresh_surface_single_update():
    s = update_surface(TimeSurface(8, 6), Event(2, 3, 77, Polarity.ON))
    assert (s.last_ts != UNSET).sum() == 1
    assert s.last_ts[1, 3, 2] == 77


def test_surface_last_writer_wins():
    s = TimeSurface(8, 6)
    s.update(Event(1, 1, 5, Polarity.ON))
    s.update(Event(1, 1, 9, Polarity.ON))
    assert s.last_ts[1, 1, 1] == 9


def test_off_event_leaves_on_plane_alone():
    s = TimeSurface(8, 6)
    s.update(Event(1, 1, 5, Polarity.OFF))
    assert (s.last_ts[1] == UNSET).all()
    assert s.last_ts[0, 1, 1] == 5


def test_surface_rejects_out_of_bounds():
    with pytest.raises(ValueError):
        TimeSurface(8, 6).update(Event(8, 0, 0, Polarity.ON))


def _edge_surface(vx, vy, t_now=1_000_000, size=21):
    """Analytic time surface of a straight edge moving at (vx, vy) px/s."""
    s = TimeSurface(size, size)
    c = size // 2
    speed = math.hypot(vx, vy)
    nx, ny = vx / speed, vy / speed
    for y in range(size):
        for x in range(size):
            # time at which the edge reached (x, y); the edge is at the center now
            d = (x - c) * nx + (y - c) * ny
            if d <= 0:
                s.last_ts[1, y, x] = t_now + math.floor(d / speed * 1e6 + 0.5)
    return s, Event(c, c, t_now, Polarity.ON)


def test_vertical_edge_sweeping_right():
    s, e = _edge_surface(100.0, 0.0)
    est = plane_fit_flow(s, e)
    assert est.valid
    assert abs(est.vx - 100) <= 1
    assert abs(est.vy) <= 1


def test_isolated_event_is_invalid():
    s = TimeSurface(16, 16)
    e = Event(8, 8, 100, Polarity.ON)
    s.update(e)
    assert not plane_fit_flow(s, e).valid


def test_flicker_is_invalid():
    s = TimeSurface(16, 16)
    s.last_ts[1, 4:13, 4:13] = 500
    assert not plane_fit_flow(s, Event(8, 8, 500, Polarity.ON)).valid


@given(st.integers(-40_000, 40_000))
def test_plane_fit_is_translation_equivariant(shift):
    s, e = _edge_surface(130.0, -40.0)
    a = plane_fit_flow(s, e)
    s.last_ts[s.last_ts != UNSET] += shift
    b = plane_fit_flow(s, Event(e.x, e.y, e.t + shift, e.p))
    assert b.valid == a.valid
    assert math.isclose(a.vx, b.vx, rel_tol=1e-9)
    assert math.isclose(a.vy, b.vy, rel_tol=1e-9)


@pytest.mark.parametrize("speed", [20, 50, 100, 300, 1000])
@pytest.mark.parametrize("angle", [0, 17, 45, 73, 150])
def test_plane_fit_accuracy_on_generated_edges(speed, angle):
    th = math.radians(angle)
    obj = RectObject(120, 90, 60, 60, Linear(speed * math.cos(th), speed * math.sin(th)), angle=angle)
    stream, truth = generate(SceneSpec(320, 240, (obj,), int(min(2.0, 40 / speed) * 1e6)))
    ff = PlaneFitFlow().estimate(stream)
    v = ff.valid
    assert v.mean() > 0.8
    est = np.column_stack([ff.vx, ff.vy])[v]
    mag_err = np.abs(np.hypot(est[:, 0], est[:, 1]) - speed) / speed
    dir_err = np.degrees(np.abs(np.angle(np.exp(1j * (np.arctan2(est[:, 1], est[:, 0]) - th)))))
    assert mag_err.max() <= 0.05
    assert dir_err.max() <= 5


def test_valid_plane_fit_respects_speed_gate():
    s, e = _edge_surface(100.0, 0.0)
    assert not plane_fit_flow(s, e, v_max=50).valid
    assert not plane_fit_flow(s, e, v_min=200).valid


class _Truth:
    def __init__(self, table):
        self.table = table

    def lookup(self, e):
        return self.table.get(tuple(e))


def test_oracle_passthrough():
    e = Event(1, 2, 3, Polarity.ON)
    est = oracle_flow(_Truth({(1, 2, 3, 1): (150.0, 0.0, False)}), e)
    assert (est.vx, est.vy, est.valid) == (150.0, 0.0, True)


def test_oracle_noise_and_unknown_are_invalid():
    e = Event(1, 2, 3, Polarity.ON)
    assert not oracle_flow(_Truth({(1, 2, 3, 1): (0.0, 0.0, True)}), e).valid
    assert not oracle_flow(_Truth({}), e).valid


def test_oracle_zero_speed_is_invalid():
    e = Event(1, 2, 3, Polarity.ON)
    assert not oracle_flow(_Truth({(1, 2, 3, 1): (0.0, 0.0, False)}), e).valid


def test_oracle_at_reversal_is_invalid():
    # sinusoid with 1 s period reverses at t = 0.25 s
    osc = Oscillation(0, 50, 1.0)
    vx, vy = osc.velocity(0.25)
    assert math.hypot(vx, vy) < 1e-9
    truth = _Truth({(5, 5, 250_000, 1): (float(vx), float(vy), False)})
    assert not oracle_flow(truth, Event(5, 5, 250_000, Polarity.ON)).valid


def test_oracle_provider_on_scene():
    scene = SceneSpec(64, 48, (RectObject(5.5, 10.5, 4, 6, Linear(150, 0)),), 100_000, noise_rate=200, seed=3)
    stream, truth = generate(scene)
    ff = OracleFlow(truth).estimate(stream)
    assert len(ff) == len(stream)
    assert (ff.valid == ~truth.noise).all()
    assert np.allclose(ff.vx[ff.valid], 150)
    for i in range(0, len(stream), 7):
        est = oracle_flow(truth, stream[i])
        assert est.valid == bool(ff.valid[i])


def test_flow_field_none():
    ff = FlowField.none(3)
    assert len(ff) == 3 and not ff.valid.any()
    assert not ff[1].valid
