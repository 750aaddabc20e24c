"""Packed-bit helpers.

Bitmaps are numpy uint8 arrays in little bit order (bit i of the bitmap is
byte i//8, bit i%8), the same layout they take inside block payloads.
Kernels unpack to bool arrays for numpy-wide operations.
"""

from __future__ import annotations

import numpy as np

Bitmap = np.ndarray  # dtype=uint8, packed little bit order


def nbytes(row_count: int) -> int:
    return (row_count + 7) // 8


def zeros(row_count: int) -> Bitmap:
    return np.zeros(nbytes(row_count), dtype=np.uint8)


def ones(row_count: int) -> Bitmap:
    out = np.full(nbytes(row_count), 0xFF, dtype=np.uint8)
    _mask_tail(out, row_count)
    return out


def _mask_tail(bits: Bitmap, row_count: int) -> None:
    # Bits past row_count must stay zero so popcounts and equality work.
    rem = row_count % 8
    if rem and len(bits):
        bits[-1] &= (1 << rem) - 1


def pack(bools: np.ndarray) -> Bitmap:
    return np.packbits(np.asarray(bools, dtype=bool), bitorder="little")


def unpack(bits: Bitmap, row_count: int) -> np.ndarray:
    return np.unpackbits(bits, count=row_count, bitorder="little").astype(bool)


def count(bits: Bitmap, row_count: int) -> int:
    return int(np.unpackbits(bits, count=row_count, bitorder="little").sum())


def get(bits: Bitmap, i: int) -> bool:
    return bool(bits[i >> 3] & (1 << (i & 7)))


def and_(a: Bitmap, b: Bitmap) -> Bitmap:
    return a & b


def from_bytes(raw: bytes) -> Bitmap:
    return np.frombuffer(raw, dtype=np.uint8).copy()
