"""Query-friendly block encodings.

Six encodings are available per block; each decodes back to the exact input
vector, and simple comparisons can be answered directly on the encoded form
(dictionary codes, rebased deltas) or after decoding for the rest.

Payload layouts are self-describing given (encoding_id, row_count, column
type); all integers little-endian:

  plain            numeric: row_count x 8B | utf8: u32 offsets + bytes
  delta            min i64, bit_width u8, bit-packed deltas (LSB first)
  dict             u32 count, sorted entries, code_width u8, packed codes
  prefix           u8 run_count, runs{u32 rows, u32 len, prefix}, suffixes
  intercol_eq      u16 source column ordinal
  intercol_substr  u16 source column ordinal, suffixes

Suffix/entry tables for utf8 use u32 offsets (row_count+1) then raw bytes.
Null rows are carried by the block null bitmap and occupy zero/empty slots
in the payload.
"""

from __future__ import annotations

import struct
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from enum import IntEnum
from math import ceil, floor
from typing import Mapping, Optional, Sequence

import numpy as np

from . import bitmap
from .bitmap import Bitmap
from .errors import NdvTooHigh, NotApplicable, TypeMismatch
from .skipindex import BlockClass, Sketch, classify, sketch_of
from .types import CmpOp, ColumnType, Predicate, check_literal

DICT_NDV_LIMIT = 256  # per-block dictionary threshold


class EncodingId(IntEnum):
    PLAIN = 0
    DELTA = 1
    DICT = 2
    PREFIX = 3
    INTERCOL_EQ = 4
    INTERCOL_SUBSTR = 5


# Columns of one block with their types, in declaration order.
BlockColumns = Mapping[str, tuple[ColumnType, Sequence]]


@dataclass
class EncodedBlock:
    encoding_id: EncodingId
    payload: bytes
    row_count: int
    null_bitmap: Bitmap
    stats: Sketch
    col_type: ColumnType
    source_column: Optional[str] = None  # resolved name for intercol blocks

    @property
    def size(self) -> int:
        return len(self.payload)


# -- bit packing -------------------------------------------------------------


def bitpack(values: np.ndarray, width: int) -> bytes:
    """Pack uint64 values into width-bit little-endian slots."""
    if width == 0 or len(values) == 0:
        return b""
    as_bytes = np.ascontiguousarray(values, dtype="<u8").view(np.uint8)
    bits = np.unpackbits(as_bytes.reshape(-1, 8), axis=1, bitorder="little")
    return np.packbits(bits[:, :width].ravel(), bitorder="little").tobytes()


def bitunpack(buf: bytes, width: int, count: int) -> np.ndarray:
    if width == 0 or count == 0:
        return np.zeros(count, dtype=np.uint64)
    bits = np.unpackbits(np.frombuffer(buf, dtype=np.uint8), bitorder="little")
    bits = bits[: count * width].reshape(count, width)
    padded = np.zeros((count, 64), dtype=np.uint8)
    padded[:, :width] = bits
    return np.packbits(padded, axis=1, bitorder="little").view("<u8").ravel()


def _width_for(max_value: int) -> int:
    return max_value.bit_length()


# -- shared utf8 table -------------------------------------------------------


def _pack_str_table(chunks: Sequence[bytes]) -> bytes:
    offsets = np.zeros(len(chunks) + 1, dtype="<u4")
    np.cumsum([len(c) for c in chunks], out=offsets[1:])
    return offsets.tobytes() + b"".join(chunks)


def _unpack_str_table(buf: bytes, count: int) -> tuple[list[bytes], int]:
    head = 4 * (count + 1)
    offsets = np.frombuffer(buf[:head], dtype="<u4")
    base = head
    chunks = [buf[base + offsets[i] : base + offsets[i + 1]] for i in range(count)]
    return chunks, base + int(offsets[-1])


def _nulls_of(values: Sequence) -> Bitmap:
    n = len(values)
    if n == 0:
        return bitmap.zeros(0)
    return bitmap.pack(np.fromiter((v is None for v in values), dtype=bool, count=n))


# -- encoders ----------------------------------------------------------------


def encode_plain(col_type: ColumnType, values: Sequence) -> EncodedBlock:
    nulls = _nulls_of(values)
    if col_type.is_numeric:
        dtype = "<i8" if col_type is ColumnType.INT64 else "<f8"
        arr = np.fromiter((0 if v is None else v for v in values), dtype=dtype,
                          count=len(values))
        payload = arr.tobytes()
    else:
        payload = _pack_str_table(
            [b"" if v is None else v.encode("utf-8") for v in values])
    return EncodedBlock(EncodingId.PLAIN, payload, len(values), nulls,
                        sketch_of(col_type, values), col_type)


def encode_delta(values: Sequence) -> EncodedBlock:
    """Store the minimum plus a bit-packed difference per row (int64 only).

    A spread needing the full 64 bits cannot be rebased safely and falls
    back to plain.
    """
    present = [v for v in values if v is not None]
    if not present:
        blk = encode_plain(ColumnType.INT64, values)
        return blk
    lo, hi = min(present), max(present)
    width = _width_for(hi - lo)
    if width >= 64:
        return encode_plain(ColumnType.INT64, values)
    deltas = np.fromiter(
        (0 if v is None else v - lo for v in values), dtype=np.uint64,
        count=len(values))
    payload = struct.pack("<qB", lo, width) + bitpack(deltas, width)
    return EncodedBlock(EncodingId.DELTA, payload, len(values), _nulls_of(values),
                        sketch_of(ColumnType.INT64, values), ColumnType.INT64)


def encode_dict(col_type: ColumnType, values: Sequence,
                threshold: int = DICT_NDV_LIMIT) -> EncodedBlock:
    """Sorted per-block dictionary with bit-packed code references."""
    distinct = sorted({v for v in values if v is not None})
    if len(distinct) > threshold:
        raise NdvTooHigh(f"{len(distinct)} distinct values exceed {threshold}")
    index = {v: i for i, v in enumerate(distinct)}
    codes = np.fromiter((0 if v is None else index[v] for v in values),
                        dtype=np.uint64, count=len(values))
    width = _width_for(len(distinct) - 1) if distinct else 0
    if col_type.is_numeric:
        dtype = "<i8" if col_type is ColumnType.INT64 else "<f8"
        entries = np.asarray(distinct, dtype=dtype).tobytes()
    else:
        entries = _pack_str_table([v.encode("utf-8") for v in distinct])
    payload = (struct.pack("<I", len(distinct)) + entries
               + struct.pack("<B", width) + bitpack(codes, width))
    return EncodedBlock(EncodingId.DICT, payload, len(values), _nulls_of(values),
                        sketch_of(col_type, values), col_type)


def _lcp(a: bytes, b: bytes) -> int:
    n = min(len(a), len(b))
    for i in range(n):
        if a[i] != b[i]:
            return i
    return n


def _fold_lcp(chunks: Sequence[Optional[bytes]], start: int, end: int) -> bytes:
    prefix: Optional[bytes] = None
    for i in range(start, end):
        c = chunks[i]
        if c is None:
            continue
        if prefix is None:
            prefix = c
        else:
            prefix = prefix[: _lcp(prefix, c)]
            if not prefix:
                break
    return prefix or b""


def _prefix_payload_size(chunks, runs) -> int:
    total = 1 + 4 * (len(chunks) + 1)
    for start, end, prefix in runs:
        total += 8 + len(prefix)
        for i in range(start, end):
            if chunks[i] is not None:
                total += len(chunks[i]) - len(prefix)
    return total


def encode_prefix(values: Sequence) -> EncodedBlock:
    """Common-prefix factoring, with up to four runs when splitting helps.

    Runs are grown greedily: each round splits one existing run at its
    weakest adjacent overlap, keeping the split only if the payload
    strictly shrinks.
    """
    chunks = [None if v is None else v.encode("utf-8") for v in values]
    n = len(chunks)
    runs = [(0, n, _fold_lcp(chunks, 0, n))]
    while len(runs) < 4:
        best = None  # (saving, run_idx, split_at, left_run, right_run)
        for ri, (start, end, _prefix) in enumerate(runs):
            prev = None
            weakest: Optional[tuple[int, int]] = None  # (lcp, split position)
            for i in range(start, end):
                if chunks[i] is None:
                    continue
                if prev is not None:
                    overlap = _lcp(chunks[prev], chunks[i])
                    if weakest is None or overlap < weakest[0]:
                        weakest = (overlap, i)
                prev = i
            if weakest is None:
                continue
            split = weakest[1]
            left = (start, split, _fold_lcp(chunks, start, split))
            right = (split, end, _fold_lcp(chunks, split, end))
            trial = runs[:ri] + [left, right] + runs[ri + 1 :]
            saving = _prefix_payload_size(chunks, runs) - _prefix_payload_size(
                chunks, trial)
            if saving > 0 and (best is None or saving > best[0]):
                best = (saving, ri, left, right)
        if best is None:
            break
        _, ri, left, right = best
        runs[ri : ri + 1] = [left, right]

    parts = [struct.pack("<B", len(runs))]
    suffixes: list[bytes] = []
    for start, end, prefix in runs:
        parts.append(struct.pack("<II", end - start, len(prefix)))
        parts.append(prefix)
        for i in range(start, end):
            suffixes.append(b"" if chunks[i] is None else chunks[i][len(prefix):])
    parts.append(_pack_str_table(suffixes))
    return EncodedBlock(EncodingId.PREFIX, b"".join(parts), n, _nulls_of(values),
                        sketch_of(ColumnType.UTF8, values), ColumnType.UTF8)


def encode_intercol(block_cols: BlockColumns, target: str, source: str,
                    source_ordinal: int | None = None) -> EncodedBlock:
    """Encode `target` against `source`: a bare reference when the columns are
    row-wise equal, or per-row suffixes when `source` is a row-wise prefix.
    """
    t_type, t_vals = block_cols[target]
    s_type, s_vals = block_cols[source]
    if len(t_vals) != len(s_vals):
        raise NotApplicable("column lengths differ")
    if source_ordinal is None:
        source_ordinal = list(block_cols).index(source)
    head = struct.pack("<H", source_ordinal)

    equal = t_type is s_type
    for t, s in zip(t_vals, s_vals):
        if t is None:
            continue
        if s is None or t != s:
            equal = False
            break
    if equal:
        return EncodedBlock(EncodingId.INTERCOL_EQ, head, len(t_vals),
                            _nulls_of(t_vals), sketch_of(t_type, t_vals), t_type,
                            source_column=source)

    if t_type is not ColumnType.UTF8 or s_type is not ColumnType.UTF8:
        raise NotApplicable("row-wise relation does not hold")
    suffixes: list[bytes] = []
    for t, s in zip(t_vals, s_vals):
        if t is None:
            suffixes.append(b"")
            continue
        if s is None or not t.startswith(s):
            raise NotApplicable(f"{source!r} is not a row-wise prefix of {target!r}")
        suffixes.append(t.encode("utf-8")[len(s.encode("utf-8")):])
    payload = head + _pack_str_table(suffixes)
    return EncodedBlock(EncodingId.INTERCOL_SUBSTR, payload, len(t_vals),
                        _nulls_of(t_vals), sketch_of(t_type, t_vals), t_type,
                        source_column=source)


# -- encoding selection ------------------------------------------------------


def _candidates(block_cols: BlockColumns, column: str) -> list[EncodedBlock]:
    col_type, values = block_cols[column]
    out = [encode_plain(col_type, values)]
    if col_type is ColumnType.INT64:
        blk = encode_delta(values)
        if blk.encoding_id is EncodingId.DELTA:
            out.append(blk)
    try:
        out.append(encode_dict(col_type, values))
    except NdvTooHigh:
        pass
    if col_type is ColumnType.UTF8:
        out.append(encode_prefix(values))
    # earlier-declared columns only, first applicable source wins
    for ordinal, name in enumerate(block_cols):
        if name == column:
            break
        try:
            out.append(encode_intercol(block_cols, column, name, ordinal))
            break
        except NotApplicable:
            continue
    return out


def encode_best(block_cols: BlockColumns, column: str) -> EncodedBlock:
    """Smallest candidate payload wins; ties break toward the lower id."""
    return min(_candidates(block_cols, column),
               key=lambda b: (b.size, int(b.encoding_id)))


def choose_encoding(block_cols: BlockColumns, column: str) -> EncodingId:
    return encode_best(block_cols, column).encoding_id


# -- decoding ----------------------------------------------------------------


def decode(block: EncodedBlock, source_values: Sequence | None = None) -> list:
    """Exact inverse of the encoder, restoring nulls from the bitmap."""
    n = block.row_count
    nulls = bitmap.unpack(block.null_bitmap, n)
    eid = block.encoding_id
    payload = block.payload

    if eid is EncodingId.PLAIN:
        if block.col_type.is_numeric:
            dtype = "<i8" if block.col_type is ColumnType.INT64 else "<f8"
            arr = np.frombuffer(payload, dtype=dtype, count=n)
            return [None if nulls[i] else arr[i].item() for i in range(n)]
        chunks, _ = _unpack_str_table(payload, n)
        return [None if nulls[i] else chunks[i].decode("utf-8") for i in range(n)]

    if eid is EncodingId.DELTA:
        lo, width = struct.unpack_from("<qB", payload)
        deltas = bitunpack(payload[9:], width, n)
        return [None if nulls[i] else lo + int(deltas[i]) for i in range(n)]

    if eid is EncodingId.DICT:
        entries, codes = dict_parts(block)
        if block.col_type is ColumnType.UTF8:
            entries = [e.decode("utf-8") for e in entries]
        return [None if nulls[i] else entries[int(codes[i])] for i in range(n)]

    if eid is EncodingId.PREFIX:
        run_count = payload[0]
        pos = 1
        runs = []
        for _ in range(run_count):
            rows, plen = struct.unpack_from("<II", payload, pos)
            pos += 8
            runs.append((rows, payload[pos : pos + plen]))
            pos += plen
        suffixes, _ = _unpack_str_table(payload[pos:], n)
        out: list = []
        i = 0
        for rows, prefix in runs:
            for _ in range(rows):
                out.append(None if nulls[i]
                           else (prefix + suffixes[i]).decode("utf-8"))
                i += 1
        return out

    if eid is EncodingId.INTERCOL_EQ:
        if source_values is None:
            raise TypeMismatch("intercol block needs its source column to decode")
        return [None if nulls[i] else source_values[i] for i in range(n)]

    if eid is EncodingId.INTERCOL_SUBSTR:
        if source_values is None:
            raise TypeMismatch("intercol block needs its source column to decode")
        suffixes, _ = _unpack_str_table(payload[2:], n)
        return [
            None if nulls[i]
            else source_values[i] + suffixes[i].decode("utf-8")
            for i in range(n)
        ]

    raise TypeMismatch(f"unknown encoding id {eid}")


def dict_parts(block: EncodedBlock) -> tuple[list, np.ndarray]:
    payload = block.payload
    count = struct.unpack_from("<I", payload)[0]
    pos = 4
    if block.col_type.is_numeric:
        dtype = "<i8" if block.col_type is ColumnType.INT64 else "<f8"
        arr = np.frombuffer(payload, dtype=dtype, count=count, offset=pos)
        entries = [v.item() for v in arr]
        pos += 8 * count
    else:
        raw, consumed = _unpack_str_table(payload[pos:], count)
        entries = raw
        pos += consumed
    width = payload[pos]
    codes = bitunpack(payload[pos + 1 :], width, block.row_count)
    return entries, codes


def intercol_source_ordinal(block: EncodedBlock) -> int:
    return struct.unpack_from("<H", block.payload)[0]


# -- predicate evaluation on encoded data -------------------------------------


def eval_predicate_encoded(block: EncodedBlock, pred: Predicate,
                           source_values: Sequence | None = None) -> Bitmap:
    """Selection bitmap identical to decode-then-evaluate.

    Dictionary blocks compare on codes after binary-searching the literal;
    delta blocks compare on rebased deltas; the block sketch short-circuits
    provably empty or full answers without touching the payload.
    """
    check_literal(block.col_type, pred.literal)
    n = block.row_count

    shortcut = classify(block.stats, pred)
    if shortcut is BlockClass.NONE_MATCH:
        return bitmap.zeros(n)
    if shortcut is BlockClass.ALL_MATCH:
        return bitmap.ones(n)

    not_null = ~bitmap.unpack(block.null_bitmap, n)

    if block.encoding_id is EncodingId.DICT:
        entries, codes = dict_parts(block)
        if block.col_type is ColumnType.UTF8:
            entries = [e.decode("utf-8") for e in entries]
        mask = _compare_codes(codes, entries, pred)
        return bitmap.pack(mask & not_null)

    if block.encoding_id is EncodingId.DELTA:
        lo, width = struct.unpack_from("<qB", block.payload)
        deltas = bitunpack(block.payload[9:], width, n)
        mask = _compare_deltas(deltas, lo, width, pred)
        return bitmap.pack(mask & not_null)

    values = decode(block, source_values)
    if block.col_type.is_numeric:
        arr = np.fromiter((0 if v is None else v for v in values),
                          dtype=np.int64 if block.col_type is ColumnType.INT64
                          else np.float64, count=n)
        mask = _numeric_compare(arr, pred.op, pred.literal)
    else:
        mask = np.fromiter((v is not None and pred.matches(v) for v in values),
                           dtype=bool, count=n)
    return bitmap.pack(mask & not_null)


def _numeric_compare(arr: np.ndarray, op: CmpOp, lit) -> np.ndarray:
    if op is CmpOp.EQ:
        return arr == lit
    if op is CmpOp.NE:
        return arr != lit
    if op is CmpOp.LT:
        return arr < lit
    if op is CmpOp.LE:
        return arr <= lit
    if op is CmpOp.GT:
        return arr > lit
    return arr >= lit


def _compare_codes(codes: np.ndarray, entries: list, pred: Predicate) -> np.ndarray:
    """Translate a value comparison into dictionary-code space.

    The sorted dictionary makes code order equal value order, so the literal
    maps to a code boundary via binary search.
    """
    n = len(codes)
    lit = pred.literal
    op = pred.op
    lo_idx = bisect_left(entries, lit)
    hi_idx = bisect_right(entries, lit)
    found = lo_idx != hi_idx
    if op is CmpOp.EQ:
        return codes == lo_idx if found else np.zeros(n, dtype=bool)
    if op is CmpOp.NE:
        return codes != lo_idx if found else np.ones(n, dtype=bool)
    if op is CmpOp.LT:
        return codes < lo_idx
    if op is CmpOp.LE:
        return codes < hi_idx
    if op is CmpOp.GT:
        return codes >= hi_idx
    return codes >= lo_idx


def _compare_deltas(deltas: np.ndarray, base: int, width: int,
                    pred: Predicate) -> np.ndarray:
    n = len(deltas)
    lit = pred.literal
    op = pred.op
    if isinstance(lit, float):
        if lit.is_integer():
            lit = int(lit)
        else:
            # no integer ever equals a fractional literal; order ops shift
            # to the nearest integer bound
            if op is CmpOp.EQ:
                return np.zeros(n, dtype=bool)
            if op is CmpOp.NE:
                return np.ones(n, dtype=bool)
            if op in (CmpOp.LT, CmpOp.LE):
                lit, op = floor(lit), CmpOp.LE
            else:
                lit, op = ceil(lit), CmpOp.GE
    rebased = lit - base
    top = (1 << width) - 1  # deltas occupy [0, top]
    if op is CmpOp.EQ:
        if rebased < 0 or rebased > top:
            return np.zeros(n, dtype=bool)
        return deltas == np.uint64(rebased)
    if op is CmpOp.NE:
        if rebased < 0 or rebased > top:
            return np.ones(n, dtype=bool)
        return deltas != np.uint64(rebased)
    if op is CmpOp.LT:
        if rebased <= 0:
            return np.zeros(n, dtype=bool)
        if rebased > top:
            return np.ones(n, dtype=bool)
        return deltas < np.uint64(rebased)
    if op is CmpOp.LE:
        if rebased < 0:
            return np.zeros(n, dtype=bool)
        if rebased >= top:
            return np.ones(n, dtype=bool)
        return deltas <= np.uint64(rebased)
    if op is CmpOp.GT:
        if rebased < 0:
            return np.ones(n, dtype=bool)
        if rebased >= top:
            return np.zeros(n, dtype=bool)
        return deltas > np.uint64(rebased)
    # GE
    if rebased <= 0:
        return np.ones(n, dtype=bool)
    if rebased > top:
        return np.zeros(n, dtype=bool)
    return deltas >= np.uint64(rebased)


# Hook for a second, general-purpose compression level.  Kept as identity so
# block sizes stay deterministic.

def second_compress(payload: bytes) -> bytes:
    return payload


def second_decompress(payload: bytes) -> bytes:
    return payload
