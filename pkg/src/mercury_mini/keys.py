"""Order-preserving byte encoding of typed values and tuples.

Encoded keys compare with plain bytes comparison in the same order as the
source tuples compare lexicographically, nulls first.  Used both as the
sort-key encoding of the vector layer and as the physical primary-key
ordering throughout storage.

Layout per element: one presence byte (0x00 null, 0x01 present) followed by
the value encoding:
  int64    sign-flipped big-endian (8 bytes)
  float64  IEEE bits, sign-flipped for non-negatives, inverted for negatives
  utf8     UTF-8 bytes with 0x00 -> 0x00 0xFF escaping, 0x00 0x00 terminator
"""

from __future__ import annotations

import struct
from typing import Iterable, Sequence

from .types import ColumnType

_NULL = b"\x00"
_PRESENT = b"\x01"
_SIGN = 1 << 63
_U64 = (1 << 64) - 1


def encode_int64(v: int) -> bytes:
    return struct.pack(">Q", (v ^ _SIGN) & _U64)


def decode_int64(b: bytes) -> int:
    u = struct.unpack(">Q", b)[0] ^ _SIGN
    return u - (1 << 64) if u >= _SIGN else u


def encode_float64(v: float) -> bytes:
    bits = struct.unpack(">Q", struct.pack(">d", v))[0]
    if bits & _SIGN:
        bits = ~bits & _U64
    else:
        bits |= _SIGN
    return struct.pack(">Q", bits)


def decode_float64(b: bytes) -> float:
    bits = struct.unpack(">Q", b)[0]
    if bits & _SIGN:
        bits &= ~_SIGN & _U64
    else:
        bits = ~bits & _U64
    return struct.unpack(">d", struct.pack(">Q", bits))[0]


def encode_utf8(s: str) -> bytes:
    return s.encode("utf-8").replace(b"\x00", b"\x00\xff") + b"\x00\x00"


def _decode_utf8(buf: bytes, pos: int) -> tuple[str, int]:
    out = bytearray()
    while True:
        nul = buf.index(b"\x00", pos)
        out += buf[pos:nul]
        marker = buf[nul + 1]
        pos = nul + 2
        if marker == 0xFF:
            out.append(0)
        elif marker == 0x00:
            return out.decode("utf-8"), pos
        else:
            raise ValueError("malformed escaped string")


def encode_value(col_type: ColumnType, value) -> bytes:
    if value is None:
        return _NULL
    if col_type is ColumnType.INT64:
        return _PRESENT + encode_int64(value)
    if col_type is ColumnType.FLOAT64:
        return _PRESENT + encode_float64(value)
    return _PRESENT + encode_utf8(value)


def encode_tuple(col_types: Sequence[ColumnType], values: Iterable) -> bytes:
    parts = []
    for col_type, value in zip(col_types, values):
        parts.append(encode_value(col_type, value))
    return b"".join(parts)


def decode_tuple(col_types: Sequence[ColumnType], key: bytes) -> tuple:
    """Inverse of encode_tuple; mainly for diagnostics and tests."""
    out = []
    pos = 0
    for col_type in col_types:
        if key[pos] == 0x00:
            out.append(None)
            pos += 1
            continue
        pos += 1
        if col_type is ColumnType.INT64:
            out.append(decode_int64(key[pos : pos + 8]))
            pos += 8
        elif col_type is ColumnType.FLOAT64:
            out.append(decode_float64(key[pos : pos + 8]))
            pos += 8
        else:
            s, pos = _decode_utf8(key, pos)
            out.append(s)
    return tuple(out)
