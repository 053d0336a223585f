import struct
from random import Random

import pytest
from support import random_value, values_equal

from parqueue.codec import decode, decode_prefix, encode
from parqueue.errors import EncodingError, MalformedPayloadError, TruncationError


def test_empty_sequence_is_five_bytes():
    data = encode([])
    assert data == b"\x05\x00\x00\x00\x00"
    assert decode(data) == []


def test_uint_layout_and_roundtrip():
    data = encode(7)
    assert data == b"\x01" + (7).to_bytes(8, "little")
    assert decode(data) == 7


def test_sequence_roundtrip():
    assert decode(encode([1, 2, 3])) == [1, 2, 3]


def test_record_roundtrip():
    value = {"pos": 2, "row": [0, 3, 1]}
    assert decode(encode(value)) == value


def test_record_fields_sorted_regardless_of_insertion_order():
    a = {"b": 1, "a": 2}
    b = {"a": 2, "b": 1}
    assert encode(a) == encode(b)


def test_negative_int_roundtrip():
    for v in (-1, -(2**63), -123456789):
        assert decode(encode(v)) == v


def test_float_roundtrip_preserves_bits():
    for v in (0.0, -0.0, 1.5, float("inf"), float("-inf"), float("nan")):
        got = decode(encode(v))
        assert struct.pack("<d", got) == struct.pack("<d", v)


def test_bytes_roundtrip():
    for v in (b"", b"\x00", b"hello\xff"):
        assert decode(encode(v)) == v
    assert decode(encode(bytearray(b"xy"))) == b"xy"


def test_truncated_input():
    data = encode(7)
    with pytest.raises(TruncationError):
        decode(data[:-1])
    with pytest.raises(TruncationError):
        decode(b"\x04\x0a\x00\x00\x00abc")  # claims 10 bytes, has 3


def test_trailing_bytes_rejected():
    with pytest.raises(MalformedPayloadError):
        decode(encode(7) + b"\x00")


def test_unknown_tag_rejected():
    with pytest.raises(MalformedPayloadError):
        decode(b"\x7f")


def test_non_canonical_signed_rejected():
    # a non-negative value under the signed tag has a canonical unsigned form
    with pytest.raises(MalformedPayloadError):
        decode(b"\x02" + (5).to_bytes(8, "little", signed=True))


def test_unsorted_record_rejected():
    good = encode({"a": 1, "b": 2})
    a_field = good[5:5 + 4 + 1 + 9]
    b_field = good[5 + 14:]
    swapped = good[:5] + b_field + a_field
    assert len(swapped) == len(good)
    with pytest.raises(MalformedPayloadError):
        decode(swapped)


def test_duplicate_record_field_rejected():
    good = encode({"a": 1})
    doubled = good[:1] + (2).to_bytes(4, "little") + good[5:] + good[5:]
    with pytest.raises(MalformedPayloadError):
        decode(doubled)


def test_heterogeneous_sequence_rejected_on_encode():
    with pytest.raises(EncodingError):
        encode([1, 2.0])
    with pytest.raises(EncodingError):
        encode([b"x", [1]])


def test_heterogeneous_sequence_rejected_on_decode():
    crafted = b"\x05" + (2).to_bytes(4, "little") + encode(1) + encode(2.0)
    with pytest.raises(MalformedPayloadError):
        decode(crafted)
    crafted = b"\x05" + (2).to_bytes(4, "little") + encode(b"x") + encode([])
    with pytest.raises(MalformedPayloadError):
        decode(crafted)


def test_integer_range_limits():
    assert decode(encode(2**64 - 1)) == 2**64 - 1
    assert decode(encode(-(2**63))) == -(2**63)
    with pytest.raises(EncodingError):
        encode(2**64)
    with pytest.raises(EncodingError):
        encode(-(2**63) - 1)
    with pytest.raises(EncodingError):
        encode([1, 2, 2**64])


def test_unsupported_types_rejected():
    for bad in (True, None, "text", (1, 2), {1: 2}, object()):
        with pytest.raises(EncodingError):
            encode(bad)


def test_roundtrip_property_over_generated_values():
    rng = Random(0xC0DEC)
    for _ in range(1200):
        value = random_value(rng)
        data = encode(value)
        back = decode(data)
        assert values_equal(back, value)
        # canonicity: re-encoding the decoded value reproduces the bytes
        assert encode(back) == data


def test_prefix_freedom_over_concatenated_stream():
    rng = Random(0x57EA11)
    values = [random_value(rng) for _ in range(50)]
    stream = b"".join(encode(v) for v in values)
    offset = 0
    for expected in values:
        got, offset = decode_prefix(stream, offset)
        assert values_equal(got, expected)
    assert offset == len(stream)
