"""Per-block pre-aggregated sketches and the recursive block-index tree.

Every block carries {min, max, sum, null_count, row_count}; internal tree
nodes carry the merge of their children, so one structure supports pruning
at every granularity and can answer aggregates for blocks a predicate
fully covers.

Serialized sketches are five 8-byte little-endian fields.  Numeric min/max
round-trip exactly (bit-cast).  utf8 stores only an 8-byte prefix of each
bound, so a deserialized utf8 sketch keeps byte-string *bounds* that are
widened to stay sound: the lower bound is the stored prefix with trailing
zero padding stripped, the upper bound is the stored prefix extended with
0xff bytes.  Widened bounds may only demote classifications toward Maybe,
never flip them, and utf8 min/max are never answered from a deserialized
sketch.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import TypeMismatch, UnsupportedAgg
from .types import AggFunc, CmpOp, ColumnType, Predicate
from .vectors import Accumulator

SKETCH_BYTES = 40
_HI_PAD = b"\xff" * 16


@dataclass(frozen=True)
class Sketch:
    col_type: ColumnType
    min: object  # exact value; bytes lower bound after deserialization (utf8)
    max: object
    sum: object  # int or float; None for utf8 or all-null
    null_count: int
    row_count: int

    @property
    def non_null(self) -> int:
        return self.row_count - self.null_count

    @property
    def minmax_exact(self) -> bool:
        """True when min/max are exact column values, not widened byte bounds."""
        if self.non_null == 0:
            return False
        if self.col_type.is_numeric:
            return True
        return isinstance(self.min, str)

    def bounds(self) -> tuple:
        """Comparable (lo, hi) bounds: numbers, or byte strings for utf8."""
        if self.col_type.is_numeric:
            return self.min, self.max
        if isinstance(self.min, str):
            return self.min.encode("utf-8"), self.max.encode("utf-8")
        return self.min, self.max

    def to_bytes(self) -> bytes:
        if self.non_null == 0:
            lo = hi = b"\x00" * 8
        elif self.col_type is ColumnType.INT64:
            lo = struct.pack("<q", self.min)
            hi = struct.pack("<q", self.max)
        elif self.col_type is ColumnType.FLOAT64:
            lo = struct.pack("<d", self.min)
            hi = struct.pack("<d", self.max)
        else:
            lo_raw = self.min.encode("utf-8") if isinstance(self.min, str) else self.min
            hi_raw = self.max.encode("utf-8") if isinstance(self.max, str) else self.max
            lo = lo_raw[:8].ljust(8, b"\x00")
            hi = hi_raw[:8].ljust(8, b"\x00")
        if self.sum is None:
            s = b"\x00" * 8
        elif self.col_type is ColumnType.FLOAT64:
            s = struct.pack("<d", self.sum)
        else:
            s = struct.pack("<Q", self.sum & ((1 << 64) - 1))
        return lo + hi + s + struct.pack("<QQ", self.null_count, self.row_count)

    @classmethod
    def from_bytes(cls, col_type: ColumnType, raw: bytes) -> "Sketch":
        lo_b, hi_b, s_b = raw[0:8], raw[8:16], raw[16:24]
        null_count, row_count = struct.unpack("<QQ", raw[24:40])
        if row_count == null_count:
            return cls(col_type, None, None, None, null_count, row_count)
        if col_type is ColumnType.INT64:
            return cls(col_type, struct.unpack("<q", lo_b)[0],
                       struct.unpack("<q", hi_b)[0],
                       struct.unpack("<q", s_b)[0], null_count, row_count)
        if col_type is ColumnType.FLOAT64:
            return cls(col_type, struct.unpack("<d", lo_b)[0],
                       struct.unpack("<d", hi_b)[0],
                       struct.unpack("<d", s_b)[0], null_count, row_count)
        return cls(col_type, lo_b.rstrip(b"\x00"), hi_b + _HI_PAD,
                   None, null_count, row_count)


def sketch_of(col_type: ColumnType, values: Sequence) -> Sketch:
    """Exact fold of min/max/sum/null_count/row_count over one vector."""
    n = len(values)
    present = [v for v in values if v is not None]
    nulls = n - len(present)
    if not present:
        return Sketch(col_type, None, None, None, nulls, n)
    if col_type is ColumnType.UTF8:
        return Sketch(col_type, min(present), max(present), None, nulls, n)
    arr = np.asarray(present, dtype=np.int64 if col_type is ColumnType.INT64
                     else np.float64)
    total = int(arr.sum()) if col_type is ColumnType.INT64 else float(arr.sum())
    return Sketch(col_type, arr.min().item(), arr.max().item(), total, nulls, n)


def merge_sketch(a: Sketch, b: Sketch) -> Sketch:
    if a.col_type is not b.col_type:
        raise TypeMismatch(f"cannot merge {a.col_type.value} with {b.col_type.value}")
    if a.non_null == 0 and b.non_null == 0:
        return Sketch(a.col_type, None, None, None,
                      a.null_count + b.null_count, a.row_count + b.row_count)
    if a.non_null == 0:
        a, b = b, a
    if b.non_null == 0:
        return Sketch(a.col_type, a.min, a.max, a.sum,
                      a.null_count + b.null_count, a.row_count + b.row_count)
    total = None if a.sum is None else a.sum + b.sum
    return Sketch(
        a.col_type,
        a.min if a.min <= b.min else b.min,
        a.max if a.max >= b.max else b.max,
        total,
        a.null_count + b.null_count,
        a.row_count + b.row_count,
    )


class BlockClass(Enum):
    ALL_MATCH = "all"
    NONE_MATCH = "none"
    MAYBE = "maybe"


def classify(sketch: Sketch, pred: Optional[Predicate]) -> BlockClass:
    """Sound classification of one sketch against one comparison."""
    if pred is None:
        return BlockClass.ALL_MATCH
    if sketch.non_null == 0:
        return BlockClass.NONE_MATCH  # null never matches
    lo, hi = sketch.bounds()
    lit = pred.literal
    if sketch.col_type is ColumnType.UTF8:
        lit = lit.encode("utf-8")
    has_null = sketch.null_count > 0
    op = pred.op
    if op is CmpOp.EQ:
        if lit < lo or lit > hi:
            return BlockClass.NONE_MATCH
        if lo == hi == lit and not has_null:
            return BlockClass.ALL_MATCH
    elif op is CmpOp.NE:
        if lo == hi == lit:
            return BlockClass.NONE_MATCH
        if (lit < lo or lit > hi) and not has_null:
            return BlockClass.ALL_MATCH
    elif op is CmpOp.LT:
        if lo >= lit:
            return BlockClass.NONE_MATCH
        if hi < lit and not has_null:
            return BlockClass.ALL_MATCH
    elif op is CmpOp.LE:
        if lo > lit:
            return BlockClass.NONE_MATCH
        if hi <= lit and not has_null:
            return BlockClass.ALL_MATCH
    elif op is CmpOp.GT:
        if hi <= lit:
            return BlockClass.NONE_MATCH
        if lo > lit and not has_null:
            return BlockClass.ALL_MATCH
    elif op is CmpOp.GE:
        if hi < lit:
            return BlockClass.NONE_MATCH
        if lo >= lit and not has_null:
            return BlockClass.ALL_MATCH
    return BlockClass.MAYBE


@dataclass
class IndexNode:
    sketch: Sketch
    lo: int  # first covered block
    hi: int  # last covered block, inclusive
    children: tuple

    @property
    def is_leaf(self) -> bool:
        return not self.children


class IndexTree:
    """Block sketches at the leaves, recursively merged upward, fanout F."""

    def __init__(self, col_type: ColumnType, leaf_sketches: Sequence[Sketch],
                 fanout: int = 16):
        if fanout < 2:
            raise ValueError("fanout must be at least 2")
        self.col_type = col_type
        self.fanout = fanout
        self.leaves = list(leaf_sketches)
        self.root = self._build(self.leaves) if self.leaves else None

    def _build(self, sketches: Sequence[Sketch]) -> IndexNode:
        nodes = [IndexNode(s, i, i, ()) for i, s in enumerate(sketches)]
        while len(nodes) > 1:
            nxt = []
            for i in range(0, len(nodes), self.fanout):
                group = nodes[i : i + self.fanout]
                if len(group) == 1:
                    nxt.append(group[0])
                    continue
                merged = group[0].sketch
                for child in group[1:]:
                    merged = merge_sketch(merged, child.sketch)
                nxt.append(IndexNode(merged, group[0].lo, group[-1].hi, tuple(group)))
            nodes = nxt
        return nodes[0]

    @property
    def block_count(self) -> int:
        return len(self.leaves)


def prune(tree: IndexTree, pred: Optional[Predicate]) -> tuple[list[BlockClass], int]:
    """Classify every block; NONE_MATCH subtrees are never descended.

    Returns (per-block classification, index nodes visited).
    """
    n = tree.block_count
    out = [BlockClass.MAYBE] * n
    if n == 0:
        return out, 0
    visited = 0
    stack = [tree.root]
    while stack:
        node = stack.pop()
        visited += 1
        cls = classify(node.sketch, pred)
        if cls is BlockClass.MAYBE and not node.is_leaf:
            stack.extend(node.children)
            continue
        for b in range(node.lo, node.hi + 1):
            out[b] = cls
    return out, visited


_SKETCHABLE = frozenset(
    {AggFunc.COUNT_STAR, AggFunc.COUNT, AggFunc.SUM, AggFunc.MIN, AggFunc.MAX,
     AggFunc.AVG}
)


def block_answerable(sketch: Sketch, func: AggFunc) -> bool:
    """Can this block's contribution be taken from the sketch alone?"""
    if func in (AggFunc.COUNT_STAR, AggFunc.COUNT):
        return True
    if func in (AggFunc.SUM, AggFunc.AVG):
        if sketch.col_type is ColumnType.UTF8:
            raise TypeMismatch(f"{func.value} over a utf8 column")
        return sketch.non_null == 0 or sketch.sum is not None
    # min/max need exact values; widened utf8 bounds cannot answer them
    return sketch.non_null == 0 or sketch.minmax_exact


def absorb_block(acc: Accumulator, sketch: Sketch) -> None:
    acc.absorb_stats(sketch.row_count, sketch.null_count, sketch.sum,
                     sketch.min, sketch.max)


def sketch_aggregate(
    tree: IndexTree,
    func: AggFunc,
    pred: Optional[Predicate] = None,
    dirty_blocks: frozenset | set = frozenset(),
) -> tuple[Accumulator, list[int]]:
    """Answer what the sketches can; everything else comes back as residual.

    A block is sketch-answered only when the predicate provably matches all
    of its rows and no incremental data overlaps it.  Combining the partial
    accumulator with row-level evaluation of the residual blocks equals the
    brute-force aggregate.
    """
    if func not in _SKETCHABLE:
        raise UnsupportedAgg(str(func))
    acc = Accumulator(func)
    residual: list[int] = []
    classes, _ = prune(tree, pred)
    for b, cls in enumerate(classes):
        if cls is BlockClass.NONE_MATCH and b not in dirty_blocks:
            continue
        sketch = tree.leaves[b]
        if (
            cls is BlockClass.ALL_MATCH
            and b not in dirty_blocks
            and block_answerable(sketch, func)
        ):
            absorb_block(acc, sketch)
        else:
            residual.append(b)
    return acc, residual
