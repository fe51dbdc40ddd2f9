"""Regenerate the golden files under testdata/wire.

Each ``NAME.bin`` has a ``NAME.txt`` sidecar listing its packets (or events)
and the SHA-256 of the bytes. Run from the repository root::

    python3 scripts/make_golden.py
"""

import hashlib
import sys
from pathlib import Path

from fbc import io
from fbc.flow import OracleFlow
from fbc.model import CodecConfig, Event, Polarity
from fbc.synth import generate, preset
from fbc.transmitter import compress_stream
from fbc.wire import FlowEventPkt, PlainEvent, SendEnd, SendStart, decode_packets, encode_packets

OUT = Path(__file__).resolve().parent.parent / "testdata" / "wire"


def _session():
    stream, truth = generate(preset("bar", 60, seed=0))
    cfg = CodecConfig(predict_time_us=20_000, sensor_width=stream.width, sensor_height=stream.height)
    packets, _ = compress_stream(stream, OracleFlow(truth).estimate(stream), cfg)
    return stream, packets


def cases() -> dict[str, bytes]:
    stream, packets = _session()
    return {
        "plain_event": encode_packets([PlainEvent(Event(3, 1, 1, Polarity.ON))]),
        "flow_event": encode_packets([FlowEventPkt(Event(100, 200, 123456, Polarity.OFF), -5, 2047)]),
        "markers": encode_packets([SendStart(1000), SendEnd(11000, 30_000)]),
        "extremes": encode_packets(
            [
                PlainEvent(Event(16383, 16383, 2**32 - 1, Polarity.ON)),
                FlowEventPkt(Event(0, 0, 0, Polarity.OFF), -2048, -1),
                SendEnd(2**32 - 1, 16383 * 1000),
            ]
        ),
        "bar_session": encode_packets(packets),
        "bar_events": io.encode_aer8(stream),
    }


def describe(name: str, data: bytes) -> str:
    lines = [f"sha256 {hashlib.sha256(data).hexdigest()}", f"bytes {len(data)}"]
    if name.endswith("_events"):
        stream = io.decode_aer8(data)
        lines.append(f"aer8 {stream.width}x{stream.height} events {len(stream)}")
        lines += [f"{e.x} {e.y} {e.t} {int(e.p)}" for e in stream]
    else:
        lines += [repr(p) for p in decode_packets(data)]
    return "\n".join(lines) + "\n"


def main() -> int:
    OUT.mkdir(parents=True, exist_ok=True)
    for name, data in cases().items():
        (OUT / f"{name}.bin").write_bytes(data)
        (OUT / f"{name}.txt").write_text(describe(name, data))
        print(f"{name}: {len(data)} bytes")
    return 0


if __name__ == "__main__":
    sys.exit(main())
