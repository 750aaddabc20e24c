"""Vectorized execution layer: batch formats, batch flags, and kernels.

A logical column vector can live in three physical formats:

  FIXED           one contiguous buffer of equal-width elements
  VAR_DISCRETE    one separately-owned byte string per row
  VAR_CONTINUOUS  one contiguous buffer plus a row_count+1 offset array

All three represent the same values; kernels accept any legal format.
Filtering never reorganizes data: it only narrows the selection bitmap in
BatchFlags, so downstream kernels skip deselected rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from . import bitmap, keys
from .bitmap import Bitmap
from .errors import (
    CodeOutOfRange,
    IllegalFormat,
    LengthMismatch,
    NonFixedKey,
    TypeMismatch,
)
from .types import AggFunc, ColumnType

FIXED_WIDTH = 8  # int64 and float64 are the only fixed-width types


class BatchFormat(str, Enum):
    FIXED = "fixed"
    VAR_DISCRETE = "var_discrete"
    VAR_CONTINUOUS = "var_continuous"


_NP_DTYPE = {ColumnType.INT64: np.int64, ColumnType.FLOAT64: np.float64}


@dataclass
class ColumnBatch:
    col_type: ColumnType
    fmt: BatchFormat
    row_count: int
    null_bitmap: Bitmap
    fixed: Optional[np.ndarray] = None        # FIXED
    chunks: Optional[list[bytes]] = None      # VAR_DISCRETE
    buf: Optional[bytes] = None               # VAR_CONTINUOUS
    offsets: Optional[np.ndarray] = None      # VAR_CONTINUOUS, row_count+1

    @classmethod
    def from_values(
        cls,
        col_type: ColumnType,
        values: Sequence,
        fmt: BatchFormat | None = None,
    ) -> "ColumnBatch":
        n = len(values)
        nulls = bitmap.pack(np.fromiter((v is None for v in values), dtype=bool, count=n)) \
            if n else bitmap.zeros(0)
        if fmt is None:
            fmt = BatchFormat.FIXED if col_type.is_numeric else BatchFormat.VAR_DISCRETE
        if col_type.is_numeric:
            arr = np.fromiter(
                (0 if v is None else v for v in values),
                dtype=_NP_DTYPE[col_type],
                count=n,
            )
            batch = cls(col_type, BatchFormat.FIXED, n, nulls, fixed=arr)
            return batch if fmt is BatchFormat.FIXED else convert(batch, fmt)
        if fmt is BatchFormat.FIXED:
            raise IllegalFormat("utf8 values have no fixed-length representation")
        chunks = [b"" if v is None else v.encode("utf-8") for v in values]
        batch = cls(col_type, BatchFormat.VAR_DISCRETE, n, nulls, chunks=chunks)
        return batch if fmt is BatchFormat.VAR_DISCRETE else convert(batch, fmt)

    def null_mask(self) -> np.ndarray:
        return bitmap.unpack(self.null_bitmap, self.row_count)

    def numeric(self) -> np.ndarray:
        """Contiguous numeric view (null rows hold 0)."""
        if not self.col_type.is_numeric:
            raise TypeMismatch("numeric view of a utf8 batch")
        if self.fmt is BatchFormat.FIXED:
            return self.fixed
        dtype = _NP_DTYPE[self.col_type]
        if self.fmt is BatchFormat.VAR_CONTINUOUS:
            return np.frombuffer(self.buf, dtype=dtype, count=self.row_count)
        return np.frombuffer(b"".join(self.chunks), dtype=dtype, count=self.row_count)

    def row_bytes(self, i: int) -> bytes:
        if self.fmt is BatchFormat.FIXED:
            return self.fixed[i : i + 1].tobytes()
        if self.fmt is BatchFormat.VAR_DISCRETE:
            return self.chunks[i]
        return self.buf[self.offsets[i] : self.offsets[i + 1]]

    def value(self, i: int):
        if bitmap.get(self.null_bitmap, i):
            return None
        if self.col_type.is_numeric:
            if self.fmt is BatchFormat.FIXED:
                return self.fixed[i].item()
            dtype = _NP_DTYPE[self.col_type]
            return np.frombuffer(self.row_bytes(i), dtype=dtype)[0].item()
        return self.row_bytes(i).decode("utf-8")

    def values(self) -> list:
        nulls = self.null_mask()
        if self.col_type.is_numeric:
            data = self.numeric()
            return [None if nulls[i] else data[i].item() for i in range(self.row_count)]
        return [
            None if nulls[i] else self.row_bytes(i).decode("utf-8")
            for i in range(self.row_count)
        ]


def convert(batch: ColumnBatch, to: BatchFormat) -> ColumnBatch:
    """Re-materialize a batch in another physical format, values preserved."""
    if to is batch.fmt:
        return batch
    if to is BatchFormat.FIXED:
        if not batch.col_type.is_numeric:
            raise IllegalFormat("utf8 values have no fixed-length representation")
        arr = batch.numeric().copy()
        return ColumnBatch(batch.col_type, to, batch.row_count, batch.null_bitmap.copy(),
                           fixed=arr)
    if to is BatchFormat.VAR_DISCRETE:
        chunks = [batch.row_bytes(i) for i in range(batch.row_count)]
        return ColumnBatch(batch.col_type, to, batch.row_count, batch.null_bitmap.copy(),
                           chunks=chunks)
    # VAR_CONTINUOUS: concatenate, offsets are the prefix sums of the lengths
    if batch.fmt is BatchFormat.FIXED:
        buf = batch.fixed.tobytes()
        offsets = np.arange(batch.row_count + 1, dtype=np.int64) * FIXED_WIDTH
    else:
        lens = np.fromiter((len(c) for c in batch.chunks), dtype=np.int64,
                           count=batch.row_count)
        offsets = np.zeros(batch.row_count + 1, dtype=np.int64)
        np.cumsum(lens, out=offsets[1:])
        buf = b"".join(batch.chunks)
    return ColumnBatch(batch.col_type, to, batch.row_count, batch.null_bitmap.copy(),
                       buf=buf, offsets=offsets)


@dataclass
class BatchFlags:
    """Carried attributes of a batch set: null presence and filter state."""

    has_null: bool
    all_active: bool = True
    selection: Optional[Bitmap] = None  # present iff all_active is False

    @classmethod
    def for_batches(cls, batches: Sequence[ColumnBatch]) -> "BatchFlags":
        has_null = any(int(b.null_bitmap.sum()) for b in batches)
        return cls(has_null=has_null)

    def active_mask(self, row_count: int) -> np.ndarray:
        if self.all_active:
            return np.ones(row_count, dtype=bool)
        return bitmap.unpack(self.selection, row_count)

    def active_count(self, row_count: int) -> int:
        if self.all_active:
            return row_count
        return bitmap.count(self.selection, row_count)


def apply_filter(
    batches: Sequence[ColumnBatch],
    flags: BatchFlags,
    bits: Bitmap,
    row_count: int | None = None,
) -> BatchFlags:
    """Intersect the selection with a predicate bitmap.

    Data is left untouched in every format; only the flags change.
    """
    if row_count is None:
        if not batches:
            raise LengthMismatch("no batches and no explicit row count")
        row_count = batches[0].row_count
    for b in batches:
        if b.row_count != row_count:
            raise LengthMismatch(
                f"batch of {b.row_count} rows in a {row_count}-row set")
    if len(bits) != bitmap.nbytes(row_count):
        raise LengthMismatch(
            f"bitmap covers {len(bits) * 8} slots, batch has {row_count} rows")
    if flags.all_active:
        combined = bits
    else:
        combined = flags.selection & bits
    if bitmap.count(combined, row_count) == row_count:
        return BatchFlags(has_null=flags.has_null, all_active=True)
    return BatchFlags(has_null=flags.has_null, all_active=False, selection=combined)


def compare(batch: ColumnBatch, pred) -> np.ndarray:
    """Row-level predicate evaluation on a decoded batch (null never matches)."""
    from .types import CmpOp, check_literal

    check_literal(batch.col_type, pred.literal)
    n = batch.row_count
    not_null = ~batch.null_mask()
    if batch.col_type.is_numeric:
        arr = batch.numeric()
        op, lit = pred.op, pred.literal
        if op is CmpOp.EQ:
            mask = arr == lit
        elif op is CmpOp.NE:
            mask = arr != lit
        elif op is CmpOp.LT:
            mask = arr < lit
        elif op is CmpOp.LE:
            mask = arr <= lit
        elif op is CmpOp.GT:
            mask = arr > lit
        else:
            mask = arr >= lit
    else:
        # UTF-8 byte order equals code-point order, so compare raw bytes
        string_pred = _bytes_cmp(pred.op, pred.literal.encode("utf-8"))
        mask = np.fromiter(
            (string_pred(batch.row_bytes(i)) for i in range(n)),
            dtype=bool, count=n)
    return mask & not_null


def _bytes_cmp(op, lit: bytes):
    from .types import CmpOp

    if op is CmpOp.EQ:
        return lambda b: b == lit
    if op is CmpOp.NE:
        return lambda b: b != lit
    if op is CmpOp.LT:
        return lambda b: b < lit
    if op is CmpOp.LE:
        return lambda b: b <= lit
    if op is CmpOp.GT:
        return lambda b: b > lit
    return lambda b: b >= lit


# -- aggregation -----------------------------------------------------------


class Accumulator:
    """Single-owner fold state for one aggregate; mergeable across partitions."""

    __slots__ = ("func", "count", "total", "vmin", "vmax")

    def __init__(self, func: AggFunc):
        self.func = func
        self.count = 0          # rows for COUNT_STAR, non-null rows otherwise
        self.total = 0
        self.vmin = None
        self.vmax = None

    def update_value(self, v) -> None:
        if self.func is AggFunc.COUNT_STAR:
            self.count += 1
            return
        if v is None:
            return
        self.count += 1
        if self.func in (AggFunc.SUM, AggFunc.AVG):
            self.total += v
        elif self.func is AggFunc.MIN:
            if self.vmin is None or v < self.vmin:
                self.vmin = v
        elif self.func is AggFunc.MAX:
            if self.vmax is None or v > self.vmax:
                self.vmax = v

    def absorb_stats(self, row_count: int, null_count: int, total, vmin, vmax) -> None:
        """Fold a whole pre-aggregated block without touching its rows."""
        if self.func is AggFunc.COUNT_STAR:
            self.count += row_count
            return
        non_null = row_count - null_count
        if non_null == 0:
            return
        self.count += non_null
        if self.func in (AggFunc.SUM, AggFunc.AVG):
            self.total += total
        elif self.func is AggFunc.MIN:
            if self.vmin is None or vmin < self.vmin:
                self.vmin = vmin
        elif self.func is AggFunc.MAX:
            if self.vmax is None or vmax > self.vmax:
                self.vmax = vmax

    def merge(self, other: "Accumulator") -> None:
        if other.func is not self.func:
            raise TypeMismatch("merging accumulators of different functions")
        self.count += other.count
        self.total += other.total
        if other.vmin is not None and (self.vmin is None or other.vmin < self.vmin):
            self.vmin = other.vmin
        if other.vmax is not None and (self.vmax is None or other.vmax > self.vmax):
            self.vmax = other.vmax

    def result(self):
        if self.func in (AggFunc.COUNT_STAR, AggFunc.COUNT):
            return self.count
        if self.count == 0:
            return None
        if self.func is AggFunc.SUM:
            return self.total
        if self.func is AggFunc.AVG:
            return self.total / self.count
        return self.vmin if self.func is AggFunc.MIN else self.vmax


def aggregate(
    batch: Optional[ColumnBatch],
    flags: BatchFlags,
    func: AggFunc,
    acc: Accumulator | None = None,
    row_count: int | None = None,
    force_general: bool = False,
) -> Accumulator:
    """Fold one batch into an accumulator.

    COUNT_STAR needs no input batch (pass row_count instead).  The no-null,
    all-active fast path and the general masked path must agree; tests pin
    that with force_general.
    """
    if acc is None:
        acc = Accumulator(func)
    if func is AggFunc.COUNT_STAR:
        n = batch.row_count if batch is not None else row_count
        acc.count += flags.active_count(n)
        return acc
    if batch is None:
        raise TypeMismatch(f"{func.value} needs an input column")
    if func in (AggFunc.SUM, AggFunc.AVG) and not batch.col_type.is_numeric:
        raise TypeMismatch(f"{func.value} over a utf8 column")

    fast = flags.all_active and not flags.has_null and not force_general
    if batch.col_type.is_numeric:
        data = batch.numeric()
        if fast:
            acc.count += batch.row_count
            if func in (AggFunc.SUM, AggFunc.AVG):
                acc.total += data.sum().item()
            elif func is AggFunc.MIN and batch.row_count:
                m = data.min().item()
                if acc.vmin is None or m < acc.vmin:
                    acc.vmin = m
            elif func is AggFunc.MAX and batch.row_count:
                m = data.max().item()
                if acc.vmax is None or m > acc.vmax:
                    acc.vmax = m
            return acc
        mask = flags.active_mask(batch.row_count) & ~batch.null_mask()
        picked = data[mask]
        acc.count += int(picked.size)
        if picked.size:
            if func in (AggFunc.SUM, AggFunc.AVG):
                acc.total += picked.sum().item()
            elif func is AggFunc.MIN:
                m = picked.min().item()
                if acc.vmin is None or m < acc.vmin:
                    acc.vmin = m
            elif func is AggFunc.MAX:
                m = picked.max().item()
                if acc.vmax is None or m > acc.vmax:
                    acc.vmax = m
        return acc

    # utf8 path
    if fast:
        idx = range(batch.row_count)
    else:
        mask = flags.active_mask(batch.row_count) & ~batch.null_mask()
        idx = np.nonzero(mask)[0]
    for i in idx:
        raw = batch.row_bytes(int(i))
        acc.count += 1
        if func is AggFunc.MIN:
            if acc.vmin is None or raw < acc.vmin.encode("utf-8"):
                acc.vmin = raw.decode("utf-8")
        elif func is AggFunc.MAX:
            if acc.vmax is None or raw > acc.vmax.encode("utf-8"):
                acc.vmax = raw.decode("utf-8")
    return acc


# -- grouping --------------------------------------------------------------

# A group table maps the group key to one accumulator per aggregate, in
# first-seen key order (kept deterministic on purpose).
GroupTable = dict


@dataclass(frozen=True)
class AggInput:
    """One aggregate paired with its input batch (None for count(*))."""

    func: AggFunc
    batch: Optional[ColumnBatch]


def hash_group_by(
    key_batches: Sequence[ColumnBatch],
    aggs: Sequence[AggInput],
    flags: BatchFlags,
) -> GroupTable:
    if not key_batches:
        raise TypeMismatch("group-by needs at least one key column")
    n = key_batches[0].row_count
    for b in key_batches:
        if b.row_count != n:
            raise TypeMismatch("key batches of unequal length")
    for a in aggs:
        if a.batch is not None and a.batch.row_count != n:
            raise TypeMismatch("aggregate input of unequal length")
    key_cols = [b.values() for b in key_batches]
    agg_cols = [None if a.batch is None else a.batch.values() for a in aggs]
    active = flags.active_mask(n)
    groups: GroupTable = {}
    for i in range(n):
        if not active[i]:
            continue
        key = tuple(col[i] for col in key_cols)
        accs = groups.get(key)
        if accs is None:
            accs = [Accumulator(a.func) for a in aggs]
            groups[key] = accs
        for acc, col in zip(accs, agg_cols):
            acc.update_value(None if col is None else col[i])
    return groups


def array_group_by(
    codes: np.ndarray,
    dict_size: int,
    aggs: Sequence[AggInput],
    flags: BatchFlags,
) -> GroupTable:
    """Group by an already dictionary-coded key using direct array indexing.

    Result set is identical to hash_group_by over the decoded keys; keys in
    the returned table are integer codes.  Empty groups never appear.
    """
    codes = np.asarray(codes)
    n = int(codes.size)
    if n and (int(codes.min()) < 0 or int(codes.max()) >= dict_size):
        raise CodeOutOfRange(f"code outside dictionary of {dict_size}")
    active = flags.active_mask(n)
    sel_codes = codes[active]
    present = np.bincount(sel_codes, minlength=dict_size).astype(np.int64)

    per_agg: list[dict] = []
    for a in aggs:
        if a.func is AggFunc.COUNT_STAR:
            per_agg.append({"count": present})
            continue
        batch = a.batch
        valid = active & ~batch.null_mask()
        vcodes = codes[valid]
        counts = np.bincount(vcodes, minlength=dict_size).astype(np.int64)
        state = {"count": counts}
        if batch.col_type.is_numeric:
            vals = batch.numeric()[valid]
            if a.func in (AggFunc.SUM, AggFunc.AVG):
                state["total"] = np.bincount(
                    vcodes, weights=vals.astype(np.float64), minlength=dict_size
                ) if batch.col_type is ColumnType.FLOAT64 else _int_bincount(
                    vcodes, vals, dict_size)
            elif a.func is AggFunc.MIN:
                out = np.full(dict_size, np.inf if batch.col_type is ColumnType.FLOAT64
                              else np.iinfo(np.int64).max,
                              dtype=batch.numeric().dtype)
                np.minimum.at(out, vcodes, vals)
                state["extreme"] = out
            elif a.func is AggFunc.MAX:
                out = np.full(dict_size, -np.inf if batch.col_type is ColumnType.FLOAT64
                              else np.iinfo(np.int64).min,
                              dtype=batch.numeric().dtype)
                np.maximum.at(out, vcodes, vals)
                state["extreme"] = out
        else:
            if a.func in (AggFunc.SUM, AggFunc.AVG):
                raise TypeMismatch(f"{a.func.value} over a utf8 column")
            extreme: dict[int, bytes] = {}
            idx = np.nonzero(valid)[0]
            take_min = a.func is AggFunc.MIN
            for i in idx:
                c = int(codes[i])
                raw = batch.row_bytes(int(i))
                cur = extreme.get(c)
                if cur is None or (raw < cur if take_min else raw > cur):
                    extreme[c] = raw
            state["extreme_map"] = extreme
        per_agg.append(state)

    groups: GroupTable = {}
    for code in np.nonzero(present)[0]:
        code = int(code)
        accs = []
        for a, state in zip(aggs, per_agg):
            acc = Accumulator(a.func)
            acc.count = int(state["count"][code])
            if "total" in state and acc.count:
                t = state["total"][code]
                acc.total = float(t) if isinstance(t, (float, np.floating)) else int(t)
            if "extreme" in state and acc.count:
                v = state["extreme"][code].item()
                if a.func is AggFunc.MIN:
                    acc.vmin = v
                else:
                    acc.vmax = v
            if "extreme_map" in state and acc.count:
                raw = state["extreme_map"][code].decode("utf-8")
                if a.func is AggFunc.MIN:
                    acc.vmin = raw
                else:
                    acc.vmax = raw
            accs.append(acc)
        groups[code] = accs
    return groups


def _int_bincount(codes: np.ndarray, vals: np.ndarray, size: int) -> np.ndarray:
    # np.bincount(weights=...) goes through float64; keep int sums exact.
    out = np.zeros(size, dtype=np.int64)
    np.add.at(out, codes, vals)
    return out


def merge_group_tables(into: GroupTable, other: GroupTable) -> GroupTable:
    for key, accs in other.items():
        mine = into.get(key)
        if mine is None:
            into[key] = accs
        else:
            for a, b in zip(mine, accs):
                a.merge(b)
    return into


# -- order-preserving sort keys ---------------------------------------------


@dataclass(frozen=True)
class SortKey:
    """Per-row byte strings whose memcmp order equals tuple order, nulls first."""

    encoded: list[bytes]


def encode_sortkey(key_batches: Sequence[ColumnBatch]) -> SortKey:
    n = key_batches[0].row_count if key_batches else 0
    cols = [(b.col_type, b.values()) for b in key_batches]
    encoded = [
        b"".join(keys.encode_value(t, vals[i]) for t, vals in cols)
        for i in range(n)
    ]
    return SortKey(encoded=encoded)


# -- hash join ---------------------------------------------------------------


def hash_join(
    build: Sequence[ColumnBatch],
    probe: Sequence[ColumnBatch],
    build_flags: BatchFlags | None = None,
    probe_flags: BatchFlags | None = None,
) -> list[tuple[int, int]]:
    """Inner join on fixed-width keys; keys packed into one composite per row.

    Null keys never match.  Output is every (build_row, probe_row) pair,
    equal as a set to the nested-loop join.
    """
    for side in (build, probe):
        for b in side:
            if not b.col_type.is_numeric:
                raise NonFixedKey("join keys must be fixed-width")
    if len(build) != len(probe):
        raise TypeMismatch("join key arity mismatch")

    def packed(side: Sequence[ColumnBatch], flags: BatchFlags | None):
        n = side[0].row_count
        active = (flags or BatchFlags(has_null=False)).active_mask(n)
        nulls = np.zeros(n, dtype=bool)
        for b in side:
            nulls |= b.null_mask()
        stacked = np.column_stack([convert(b, BatchFormat.FIXED).fixed.view(np.int64)
                                   for b in side])
        ok = active & ~nulls
        return stacked, ok

    bcols, bok = packed(build, build_flags)
    pcols, pok = packed(probe, probe_flags)
    table: dict[bytes, list[int]] = {}
    for i in np.nonzero(bok)[0]:
        table.setdefault(bcols[i].tobytes(), []).append(int(i))
    out: list[tuple[int, int]] = []
    for j in np.nonzero(pok)[0]:
        hit = table.get(pcols[j].tobytes())
        if hit:
            for i in hit:
                out.append((i, int(j)))
    return out
