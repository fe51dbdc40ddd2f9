"""Event files, packet captures and text-export ingestion.

aer8 file::

    0   4  magic b"AER8"
    4   4  width   u32 LE
    8   4  height  u32 LE
    12  4  reserved (0)
    16  .. 8-byte plain-event records (wire layout, tag 0)

``.fbc`` capture: the same 16-byte header with magic b"FBC1", followed by
the wire byte stream. CSV event files have a ``# width=W height=H`` comment,
a ``x,y,t,p`` header and one event per line.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .model import MAX_COORD, MAX_TIMESTAMP, US_PER_S, EventStream
from .wire import Packet, decode_packets, encode_packets

AER8_MAGIC = b"AER8"
CAPTURE_MAGIC = b"FBC1"
HEADER = struct.Struct("<4sIII")
HEADER_SIZE = HEADER.size
RECORD_SIZE = 8

FORMATS = ("aer8", "csv")


class FormatError(ValueError):
    """Malformed file; ``line`` (text) or ``offset`` (binary) locates it."""

    def __init__(self, message: str, path=None, line: int | None = None, offset: int | None = None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"byte offset {offset}")
        super().__init__(f"{': '.join(where + [message]) if where else message}")
        self.path = path
        self.line = line
        self.offset = offset


def guess_format(path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix == ".csv":
        return "csv"
    if suffix in (".aer8", ".aer", ".bin"):
        return "aer8"
    raise ValueError(f"cannot tell the event format of {path}; pass a format")


def _order(stream: EventStream, assume_sorted: bool, path) -> EventStream:
    t = stream.t
    if len(t) < 2 or not (np.diff(t) < 0).any():
        return stream
    if assume_sorted:
        i = int(np.flatnonzero(np.diff(t) < 0)[0]) + 1
        raise FormatError(f"event {i} at t={int(t[i])} precedes t={int(t[i - 1])}", path)
    return stream.take(np.argsort(t, kind="stable"))


def _check_geometry(width, height, path) -> tuple[int, int]:
    if width is None or height is None:
        raise FormatError("sensor geometry missing; give width and height", path)
    if not (0 < width <= MAX_COORD + 1 and 0 < height <= MAX_COORD + 1):
        raise FormatError(f"sensor geometry {width}x{height} out of range", path)
    return int(width), int(height)


def _check_bounds(x, y, t, p, width, height, path, positions):
    bad = (x < 0) | (x >= width) | (y < 0) | (y >= height) | (t < 0) | (t > MAX_TIMESTAMP) | ((p != 0) & (p != 1))
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise FormatError(
            f"event ({int(x[i])}, {int(y[i])}, {int(t[i])}, {int(p[i])}) outside {width}x{height} sensor",
            path,
            **positions(i),
        )


def encode_aer8(stream: EventStream) -> bytes:
    words = (
        stream.t.astype(np.uint64)
        | (stream.x.astype(np.uint64) << np.uint64(32))
        | (stream.y.astype(np.uint64) << np.uint64(46))
        | (stream.p.astype(np.uint64) << np.uint64(60))
    )
    return HEADER.pack(AER8_MAGIC, stream.width, stream.height, 0) + words.astype("<u8").tobytes()


def decode_aer8(data: bytes, path=None, assume_sorted: bool = False) -> EventStream:
    if len(data) < HEADER_SIZE:
        raise FormatError("truncated header", path, offset=len(data))
    magic, width, height, _ = HEADER.unpack_from(data)
    if magic != AER8_MAGIC:
        raise FormatError(f"bad magic {magic!r}", path, offset=0)
    width, height = _check_geometry(width, height, path)
    body = len(data) - HEADER_SIZE
    if body % RECORD_SIZE:
        raise FormatError("truncated record", path, offset=HEADER_SIZE + body - body % RECORD_SIZE)
    w = np.frombuffer(data, "<u8", offset=HEADER_SIZE)
    tag = w >> np.uint64(61)
    if (tag != 0).any():
        i = int(np.flatnonzero(tag != 0)[0])
        raise FormatError(f"record tag {int(tag[i])} is not a plain event", path, offset=HEADER_SIZE + 8 * i)
    mask = np.uint64(MAX_COORD)
    t = (w & np.uint64(0xFFFFFFFF)).astype(np.int64)
    x = ((w >> np.uint64(32)) & mask).astype(np.int64)
    y = ((w >> np.uint64(46)) & mask).astype(np.int64)
    p = ((w >> np.uint64(60)) & np.uint64(1)).astype(np.int64)
    _check_bounds(x, y, t, p, width, height, path, lambda i: {"offset": HEADER_SIZE + 8 * i})
    return _order(EventStream(x, y, t, p, width, height), assume_sorted, path)


def _write_bytes(path, data: bytes) -> None:
    with open(path, "wb") as fh:
        fh.write(data)


def write_events(stream: EventStream, path, fmt: str | None = None) -> None:
    fmt = fmt or guess_format(path)
    if fmt == "aer8":
        _write_bytes(path, encode_aer8(stream))
    elif fmt == "csv":
        lines = [f"# width={stream.width} height={stream.height}", "x,y,t,p"]
        lines += [f"{x},{y},{t},{p}" for x, y, t, p in zip(*(c.tolist() for c in (stream.x, stream.y, stream.t, stream.p)))]
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    else:
        raise ValueError(f"unknown event format {fmt!r}")


def _read_csv(path, width, height, assume_sorted) -> EventStream:
    rows = []
    lines = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    k, _, v = tok.partition("=")
                    if k in ("width", "height") and v.isdigit():
                        if k == "width" and width is None:
                            width = int(v)
                        elif k == "height" and height is None:
                            height = int(v)
                continue
            if line.replace(" ", "") == "x,y,t,p":
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise FormatError(f"expected 4 fields, got {len(parts)}", path, line=lineno)
            try:
                rows.append(tuple(int(v) for v in parts))
            except ValueError:
                raise FormatError(f"non-integer field in {line!r}", path, line=lineno) from None
            lines.append(lineno)
    width, height = _check_geometry(width, height, path)
    a = np.asarray(rows, np.int64).reshape(-1, 4)
    x, y, t, p = a.T
    _check_bounds(x, y, t, p, width, height, path, lambda i: {"line": lines[i]})
    return _order(EventStream(x, y, t, p, width, height), assume_sorted, path)


def read_events(
    path,
    fmt: str | None = None,
    width: int | None = None,
    height: int | None = None,
    assume_sorted: bool = False,
) -> EventStream:
    """Load an event file; unsorted input is sorted by time unless
    ``assume_sorted`` is set, in which case disorder is an error."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    fmt = fmt or guess_format(path)
    if fmt == "aer8":
        with open(path, "rb") as fh:
            return decode_aer8(fh.read(), path, assume_sorted)
    if fmt == "csv":
        return _read_csv(path, width, height, assume_sorted)
    raise ValueError(f"unknown event format {fmt!r}")


def write_packets(packets, path, width: int, height: int) -> None:
    _write_bytes(path, encode_capture(packets, width, height))


def decode_capture(data: bytes, path=None) -> tuple[list[Packet], int, int]:
    """Packets and sensor geometry of ``.fbc`` capture bytes."""
    if len(data) < HEADER_SIZE:
        raise FormatError("truncated header", path, offset=len(data))
    magic, width, height, _ = HEADER.unpack_from(data)
    if magic != CAPTURE_MAGIC:
        raise FormatError(f"bad magic {magic!r}", path, offset=0)
    try:
        packets = decode_packets(data[HEADER_SIZE:])
    except ValueError as exc:
        off = getattr(exc, "offset", 0) + HEADER_SIZE
        raise FormatError(str(exc).split(" at byte offset")[0], path, offset=off) from exc
    return packets, width, height


def encode_capture(packets, width: int, height: int) -> bytes:
    width, height = _check_geometry(width, height, None)
    return HEADER.pack(CAPTURE_MAGIC, width, height, 0) + encode_packets(packets)


def read_capture(path) -> tuple[list[Packet], int, int]:
    with open(path, "rb") as fh:
        return decode_capture(fh.read(), path)


def read_packets(path) -> list[Packet]:
    return read_capture(path)[0]


# -- ingestion of third-party text exports ---------------------------------

COLUMN_ORDERS = {"txyp": "t,x,y,p", "xytp": "x,y,t,p"}


def _parse_columns(columns: str) -> list[str]:
    cols = [c.strip() for c in columns.split(",")]
    if sorted(cols) != ["p", "t", "x", "y"]:
        raise ValueError(f"columns must name x, y, t, p once each, got {columns!r}")
    return cols


def ingest_text(
    path,
    width: int,
    height: int,
    columns: str = "t,x,y,p",
    time_unit: str = "auto",
    rebase: bool = False,
) -> EventStream:
    """Read a whitespace- or comma-separated ``t x y p`` style export.

    ``time_unit`` is ``s``, ``us`` or ``auto``; auto picks seconds when any
    timestamp has a fractional part or exponent, microseconds otherwise.
    Polarity -1/0 map to OFF, 1 to ON. Non-numeric first lines are skipped as
    headers.
    """
    cols = _parse_columns(columns)
    if time_unit not in ("auto", "s", "us"):
        raise ValueError(f"time_unit must be auto, s or us, got {time_unit!r}")
    width, height = _check_geometry(width, height, path)
    ti = cols.index("t")
    t_raw: list[str] = []
    rest: list[tuple[int, int, int]] = []
    lines: list[int] = []
    seen_data = False
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith(("#", "%")):
                continue
            parts = line.replace(",", " ").split()
            if len(parts) < 4:
                raise FormatError(f"expected 4 fields, got {len(parts)}", path, line=lineno)
            parts = parts[:4]
            try:
                float(parts[ti])
                vals = {c: parts[k] for k, c in enumerate(cols)}
                xyp = (int(float(vals["x"])), int(float(vals["y"])), int(float(vals["p"])))
            except ValueError:
                if not seen_data:
                    continue  # header line
                raise FormatError(f"unparseable line {line!r}", path, line=lineno) from None
            seen_data = True
            t_raw.append(vals["t"])
            rest.append(xyp)
            lines.append(lineno)
    unit = time_unit
    if unit == "auto":
        unit = "s" if any(("." in v) or ("e" in v.lower()) for v in t_raw) else "us"
    if unit == "s":
        t = np.floor(np.array([float(v) for v in t_raw]) * US_PER_S + 0.5).astype(np.int64)
    else:
        t = np.array([int(v) for v in t_raw], np.int64)
    a = np.asarray(rest, np.int64).reshape(-1, 3)
    x, y, p = a[:, 0], a[:, 1], (a[:, 2] > 0).astype(np.int64)
    if rebase and len(t):
        t = t - t.min()
    _check_bounds(x, y, t, p, width, height, path, lambda i: {"line": lines[i]})
    return _order(EventStream(x, y, t, p, width, height), False, path)
