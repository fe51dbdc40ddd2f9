import lzma

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fbc.cascade import HEADER_SIZE, CascadeError, cascade_compress, cascade_decompress, cascaded_cr, is_archive


@given(st.binary(max_size=4000), st.sampled_from(["lzma", "none"]))
def test_round_trip(data, backend):
    arc = cascade_compress(data, backend)
    assert is_archive(arc)
    assert cascade_decompress(arc) == data


def test_empty_input():
    arc = cascade_compress(b"")
    assert cascade_decompress(arc) == b""
    assert len(arc) < HEADER_SIZE + 100


def test_store_overhead_is_header():
    assert len(cascade_compress(b"abc", "none")) == HEADER_SIZE + 3


def test_compresses_redundant_bytes():
    data = bytes(range(8)) * 5000
    assert len(cascade_compress(data)) < len(data) // 10


def test_truncated_archive():
    arc = cascade_compress(b"x" * 1000)
    with pytest.raises(CascadeError) as err:
        cascade_decompress(arc[:5])
    assert err.value.offset == 5
    with pytest.raises(CascadeError):
        cascade_decompress(arc[:-3])


def test_wrong_magic():
    arc = cascade_compress(b"hello")
    with pytest.raises(CascadeError) as err:
        cascade_decompress(b"XXXX" + arc[4:])
    assert err.value.offset == 0


def test_size_mismatch_and_unknown_backend():
    arc = bytearray(cascade_compress(b"hello", "none"))
    arc[5] += 1
    with pytest.raises(CascadeError):
        cascade_decompress(bytes(arc))
    arc = bytearray(cascade_compress(b"hello", "none"))
    arc[4] = 9
    with pytest.raises(CascadeError) as err:
        cascade_decompress(bytes(arc))
    assert err.value.offset == 4


def test_payload_is_standard_xz():
    arc = cascade_compress(b"payload" * 10)
    assert lzma.decompress(arc[HEADER_SIZE:]) == b"payload" * 10


def test_cascaded_cr_examples():
    assert cascaded_cr(1000, 8000) == 1.0
    assert cascaded_cr(1000, 800) == 10.0
    with pytest.raises(ValueError):
        cascaded_cr(1000, 0)


def test_unknown_backend():
    with pytest.raises(ValueError):
        cascade_compress(b"", "zip")
