"""Lossless second stage over FBC packet bytes.

Archive layout (``.fbcz``)::

    0   4  magic b"FBCZ"
    4   1  backend id (0 stored, 1 lzma/xz)
    5   8  original length, little-endian u64
    13  .. compressed payload
"""

from __future__ import annotations

import lzma
import struct

MAGIC = b"FBCZ"
HEADER = struct.Struct("<4sBQ")
HEADER_SIZE = HEADER.size

BACKEND_STORE = 0
BACKEND_LZMA = 1
BACKENDS = {"none": BACKEND_STORE, "lzma": BACKEND_LZMA}


class CascadeError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


def _compress(backend: int, data: bytes) -> bytes:
    if backend == BACKEND_STORE:
        return bytes(data)
    if backend == BACKEND_LZMA:
        return lzma.compress(data, format=lzma.FORMAT_XZ, preset=9 | lzma.PRESET_EXTREME)
    raise ValueError(f"unknown backend id {backend}")


def _decompress(backend: int, payload: bytes) -> bytes:
    if backend == BACKEND_STORE:
        return bytes(payload)
    try:
        return lzma.decompress(payload, format=lzma.FORMAT_XZ)
    except lzma.LZMAError as exc:
        raise CascadeError(f"corrupt lzma payload ({exc})", HEADER_SIZE) from exc


def cascade_compress(packet_bytes: bytes, backend: str = "lzma") -> bytes:
    try:
        bid = BACKENDS[backend]
    except KeyError:
        raise ValueError(f"unknown cascade backend {backend!r}") from None
    try:
        payload = _compress(bid, packet_bytes)
    except lzma.LZMAError as exc:
        raise RuntimeError(f"{backend} backend failed: {exc}") from exc
    return HEADER.pack(MAGIC, bid, len(packet_bytes)) + payload


def cascade_decompress(archive: bytes) -> bytes:
    if len(archive) < HEADER_SIZE:
        raise CascadeError("truncated archive header", len(archive))
    magic, bid, size = HEADER.unpack_from(archive)
    if magic != MAGIC:
        raise CascadeError(f"bad magic {magic!r}", 0)
    if bid not in BACKENDS.values():
        raise CascadeError(f"unknown backend id {bid}", 4)
    data = _decompress(bid, archive[HEADER_SIZE:])
    if len(data) != size:
        raise CascadeError(f"payload decodes to {len(data)} bytes, header says {size}", 5)
    return data


def is_archive(data: bytes) -> bool:
    return data[:4] == MAGIC


def cascaded_cr(n_s: int, archive_size_bytes: int) -> float:
    if archive_size_bytes <= 0:
        raise ValueError("archive size must be positive")
    return n_s * 8 / archive_size_bytes
