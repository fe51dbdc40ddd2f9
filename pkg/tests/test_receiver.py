import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import brute_force_predictions, segment_distance
from fbc.model import CodecConfig, Event, EventStream, FlowEvent, Polarity, pack_keys
from fbc.receiver import (
    PredictionWindow,
    ProtocolError,
    iter_reconstruct,
    min_dist_sq,
    modified_bresenham,
    predict_events,
    predict_keys,
    reconstruct,
    rx_predict_batch,
    subpixel_candidates,
    t_min,
)
from fbc.synth import random_flow_array
from fbc.wire import FlowEventPkt, PlainEvent, SendEnd, SendStart

ON = Polarity.ON


def test_bresenham_zero_length():
    assert modified_bresenham(0, 0, 0, 0) == []


def test_bresenham_horizontal():
    assert set(modified_bresenham(0, 0, 3, 0)) == {(1, 0), (2, 0), (3, 0), (0, -1), (1, -1), (2, -1)}


def test_bresenham_diagonal():
    expected = {(0, 1), (1, 0), (1, 1), (0, 2), (1, 2), (2, 1), (2, 2), (1, 3)}
    assert set(modified_bresenham(0, 0, 2, 2)) == expected


def test_bresenham_has_no_duplicates():
    c = modified_bresenham(0, 0, 7, -3)
    assert len(c) == len(set(c))


@given(st.integers(-15, 15), st.integers(-15, 15))
def test_bresenham_covers_segment_neighbourhood(x1, y1):
    c = set(modified_bresenham(0, 0, x1, y1))
    for a in range(-17, 18):
        for b in range(-17, 18):
            if (a, b) != (0, 0) and segment_distance(a, b, x1, y1) < 0.5 * math.sqrt(2) - 1e-12:
                assert (a, b) in c


@given(st.integers(-20, 20), st.integers(-20, 20))
def test_subpixel_walk_matches_bresenham_on_integer_ends(x1, y1):
    assert set(subpixel_candidates(x1, y1)) == set(modified_bresenham(0, 0, x1, y1))


@pytest.mark.parametrize(
    "v,pix,tm,d2",
    [((2000, 0), (4, 0), 0.002, 0.0), ((0, 3000), (0, 7), 7 / 3000, 0.0), ((1000, 1000), (1, 0), 5e-4, 0.5)],
)
def test_t_min_examples(v, pix, tm, d2):
    t = t_min(*v, *pix)
    assert t == pytest.approx(tm, abs=1e-12)
    assert min_dist_sq(*v, *pix, t) == pytest.approx(d2, abs=1e-12)


def test_t_min_zero_velocity():
    with pytest.raises(ZeroDivisionError):
        t_min(0, 0, 1, 1)


def test_min_dist_sq_examples():
    assert min_dist_sq(123, -45, 0, 0, 0) == 0
    assert min_dist_sq(2000, 0, 3, 1, 0.0015) == pytest.approx(1.0)


def test_predict_along_x():
    fe = FlowEvent(Event(10, 10, 0, ON), 1000, 0)
    got = predict_events(fe, PredictionWindow(0, 5000), 0.4)
    assert got == [Event(10 + k, 10, 1000 * k, ON) for k in range(1, 6)]


def test_predict_diagonal():
    fe = FlowEvent(Event(50, 50, 0, ON), 1000, 1000)
    got = predict_events(fe, PredictionWindow(0, 5000), 0.4)
    assert {(e.x - 50, e.y - 50) for e in got} == {(k, k) for k in range(1, 6)}
    assert all(abs(e.x - e.y) == 0 for e in got)


def test_predict_zero_velocity():
    assert predict_events(FlowEvent(Event(1, 1, 0, ON), 0, 0), PredictionWindow(0, 5000), 0.4) == []


def test_predictions_respect_window_and_sensor():
    fe = FlowEvent(Event(2, 2, 0, Polarity.OFF), -1000, 0)
    got = predict_events(fe, PredictionWindow(1500, 5000), 0.4, width=10, height=10)
    assert [(e.x, e.t) for e in got] == [(0, 2000)]
    assert all(e.p == Polarity.OFF for e in got)


def test_prediction_timestamps_round_to_nearest_us():
    fe = FlowEvent(Event(0, 0, 0, ON), 3, 0)
    got = predict_events(fe, PredictionWindow(0, 1_000_000), 0.4)
    assert [e.t for e in got] == [333_333, 666_667, 1_000_000]


@settings(max_examples=200, deadline=None)
@given(
    st.integers(0, 639),
    st.integers(0, 479),
    st.integers(0, 900),
    st.integers(-1000, 1000),
    st.integers(-1000, 1000),
    st.sampled_from([0.2, 0.4, 0.5]),
)
def test_predictions_match_brute_force(x, y, t, vx, vy, xi):
    fe = FlowEvent(Event(x, y, t, ON), vx, vy)
    win = PredictionWindow(1000, 20_000)
    got = predict_events(fe, win, xi, 640, 480)
    assert len(got) == len(set(got))
    assert set(got) == brute_force_predictions(fe, 1000, 21_000, xi, 640, 480)


def test_kernel_matches_reference():
    fa = random_flow_array(400, (-1000, 1000), (640, 480), seed=5, t_range=(0, 1000))
    win = PredictionWindow(1000, 30_000)
    keys = np.sort(predict_keys(fa, win, 0.4, 1, 640, 480))
    ref = [e for i in range(len(fa)) for e in predict_events(fa[i], win, 0.4, 640, 480)]
    x, y, t, p = (np.array(c, np.int64) for c in zip(*ref))
    assert np.array_equal(keys, np.sort(pack_keys(x, y, t, p)))


def test_parallelism_does_not_change_output():
    fa = random_flow_array(10_000, seed=11, t_range=(0, 1000))
    win = PredictionWindow(1000, 30_000)
    a = rx_predict_batch(fa, win, 0.4, 1, 640, 480)
    b = rx_predict_batch(fa, win, 0.4, 8, 640, 480)
    assert a == b
    assert np.array_equal(a.keys(), np.sort(a.keys()))


def test_empty_batch():
    assert len(rx_predict_batch([], PredictionWindow(0, 1000), 0.4)) == 0


CFG = CodecConfig(sensor_width=64, sensor_height=48)


def test_reconstruct_without_flow_is_identity():
    evs = [Event(1, 2, 10, ON), Event(3, 4, 20, Polarity.OFF), Event(5, 6, 4000, ON)]
    pkts = [SendStart(0), PlainEvent(evs[0]), PlainEvent(evs[1]), SendEnd(1000, 30_000), PlainEvent(evs[2])]
    assert reconstruct(pkts, CFG).events == evs


def test_reconstruct_one_flow_event():
    e = Event(10, 10, 0, ON)
    pkts = [SendStart(0), FlowEventPkt(e, 1000, 0), SendEnd(0, 5000)]
    out = reconstruct(pkts, CFG).events
    assert out == [e] + [Event(10 + k, 10, 1000 * k, ON) for k in range(1, 6)]


def test_predictions_stay_inside_their_cycle():
    e = Event(5, 5, 0, ON)
    pkts = [SendStart(0), FlowEventPkt(e, 1000, 0), SendEnd(1000, 5000), SendStart(6000), PlainEvent(Event(1, 1, 6500, ON))]
    batches = list(iter_reconstruct(pkts, CFG))
    assert len(batches) == 2
    first = EventStream.from_keys(batches[0], 64, 48)
    assert first.t.max() <= 6000
    assert len(EventStream.from_keys(batches[1], 64, 48)) == 1


@pytest.mark.parametrize(
    "pkts,index",
    [
        ([PlainEvent(Event(0, 0, 0, ON))], 0),
        ([SendStart(0), SendStart(5)], 1),
        ([SendStart(0), SendEnd(5, 10), SendEnd(6, 10)], 2),
        ([SendStart(0), SendEnd(5, 10), FlowEventPkt(Event(0, 0, 6, ON), 1, 1)], 2),
    ],
)
def test_protocol_errors_name_the_packet(pkts, index):
    with pytest.raises(ProtocolError) as err:
        reconstruct(pkts, CFG)
    assert err.value.index == index
    assert f"packet {index}" in str(err.value)


def test_micro_batch_sort_gives_same_order():
    fa = random_flow_array(500, sensor=(64, 48), seed=2, t_range=(0, 1000))
    pkts = [SendStart(0)] + [FlowEventPkt(fa[i].event, int(fa.vx[i]), int(fa.vy[i])) for i in np.argsort(fa.t, kind="stable")]
    pkts.append(SendEnd(1000, 40_000))
    a = reconstruct(pkts, CFG)
    b = reconstruct(pkts, CFG, sort_interval_us=3000)
    assert a == b


def test_reconstruction_is_a_valid_stream():
    from fbc.flow import OracleFlow
    from fbc.model import validate_stream
    from fbc.synth import generate, preset
    from fbc.transmitter import compress_stream

    stream, truth = generate(preset("bar-square", 500))
    cfg = CodecConfig(sensor_width=stream.width, sensor_height=stream.height)
    packets, _ = compress_stream(stream, OracleFlow(truth).estimate(stream), cfg)
    recon = reconstruct(packets, cfg)
    assert len(recon) > 0
    assert validate_stream(recon) == []
