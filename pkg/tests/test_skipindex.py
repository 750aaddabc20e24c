"""Sketches, recursive index trees, pruning soundness, sketch aggregation."""

import random

import pytest

from mercury_mini import CmpOp, ColumnType, Predicate
from mercury_mini.errors import TypeMismatch
from mercury_mini.skipindex import (
    BlockClass,
    IndexTree,
    Sketch,
    block_answerable,
    merge_sketch,
    prune,
    sketch_aggregate,
    sketch_of,
)
from mercury_mini.types import AggFunc


def brute_sketch(values):
    """Independent fold used to pin expected sketch fields."""
    present = [v for v in values if v is not None]
    return {
        "min": min(present) if present else None,
        "max": max(present) if present else None,
        "sum": sum(present) if present else None,
        "nulls": sum(1 for v in values if v is None),
        "rows": len(values),
    }


def test_sketch_of_simple():
    s = sketch_of(ColumnType.INT64, [1, 2, 3])
    assert (s.min, s.max, s.sum, s.null_count, s.row_count) == (1, 3, 6, 0, 3)


def test_sketch_of_all_null():
    s = sketch_of(ColumnType.INT64, [None, None])
    assert s.row_count == 2 and s.null_count == 2
    assert s.min is None and s.max is None and s.sum is None


def test_sketch_of_matches_brute_force_fold():
    rng = random.Random(4)
    for _ in range(50):
        values = [rng.choice([None, rng.randrange(-100, 100)])
                  for _ in range(rng.randrange(1, 60))]
        s = sketch_of(ColumnType.INT64, values)
        b = brute_sketch(values)
        assert (s.min, s.max, s.sum, s.null_count, s.row_count) == (
            b["min"], b["max"], b["sum"], b["nulls"], b["rows"])


def test_merge_sketch_equals_fold_of_concatenation():
    a = sketch_of(ColumnType.INT64, [1, 3, 2])  # {1,3,6,0,3}
    b = sketch_of(ColumnType.INT64, [4, 9])     # {4,9,13,0,2}
    m = merge_sketch(a, b)
    assert (m.min, m.max, m.sum, m.null_count, m.row_count) == (1, 9, 19, 0, 5)


def test_merge_identity_and_commutativity():
    rng = random.Random(5)
    empty = sketch_of(ColumnType.INT64, [])
    for _ in range(30):
        a = sketch_of(ColumnType.INT64,
                      [rng.randrange(100) for _ in range(rng.randrange(1, 20))])
        b = sketch_of(ColumnType.INT64,
                      [rng.randrange(100) for _ in range(rng.randrange(1, 20))])
        assert merge_sketch(a, empty) == a
        assert merge_sketch(a, b) == merge_sketch(b, a)


def test_merge_type_mismatch():
    a = sketch_of(ColumnType.INT64, [1])
    b = sketch_of(ColumnType.UTF8, ["x"])
    with pytest.raises(TypeMismatch):
        merge_sketch(a, b)


def test_merge_associative():
    a = sketch_of(ColumnType.INT64, [1, None])
    b = sketch_of(ColumnType.INT64, [5])
    c = sketch_of(ColumnType.INT64, [-3, 2])
    assert merge_sketch(merge_sketch(a, b), c) == merge_sketch(
        a, merge_sketch(b, c))


def test_serialization_roundtrip_numeric():
    s = sketch_of(ColumnType.INT64, [-5, 10, None, 3])
    back = Sketch.from_bytes(ColumnType.INT64, s.to_bytes())
    assert (back.min, back.max, back.sum) == (-5, 10, 8)
    assert back.null_count == 1 and back.row_count == 4

    f = sketch_of(ColumnType.FLOAT64, [0.5, -2.25])
    fb = Sketch.from_bytes(ColumnType.FLOAT64, f.to_bytes())
    assert (fb.min, fb.max, fb.sum) == (-2.25, 0.5, -1.75)


def test_serialization_utf8_widens_soundly():
    s = sketch_of(ColumnType.UTF8, ["apple", "banana_longer_than_8", "cherry"])
    back = Sketch.from_bytes(ColumnType.UTF8, s.to_bytes())
    lo, hi = back.bounds()
    assert lo <= "apple".encode() and hi >= "cherry".encode()
    assert not back.minmax_exact  # truncated bounds must not answer min/max


# -- index tree -----------------------------------------------------------


def build_tree(block_ranges, fanout=16):
    sketches = [sketch_of(ColumnType.INT64, list(range(lo, hi + 1)))
                for lo, hi in block_ranges]
    return IndexTree(ColumnType.INT64, sketches, fanout=fanout)


def test_recursive_consistency():
    rng = random.Random(6)
    blocks = [[rng.randrange(1000) for _ in range(8)] for _ in range(40)]
    sketches = [sketch_of(ColumnType.INT64, b) for b in blocks]
    tree = IndexTree(ColumnType.INT64, sketches, fanout=4)

    def check(node):
        if node.is_leaf:
            return node.sketch
        folded = None
        for child in node.children:
            s = check(child)
            folded = s if folded is None else merge_sketch(folded, s)
        assert folded == node.sketch
        return folded

    check(tree.root)


def test_prune_interval_example():
    # blocks [1,10], [11,20], [21,30]; pred > 25 -> None, None, Maybe
    tree = build_tree([(1, 10), (11, 20), (21, 30)])
    classes, _ = prune(tree, Predicate("c", CmpOp.GT, 25))
    assert classes == [BlockClass.NONE_MATCH, BlockClass.NONE_MATCH,
                       BlockClass.MAYBE]


def test_prune_none_excluded():
    tree = build_tree([(1, 10), (11, 20), (21, 30)])
    classes, _ = prune(tree, Predicate("c", CmpOp.GE, 1))
    assert all(c in (BlockClass.ALL_MATCH, BlockClass.MAYBE) for c in classes)
    assert classes == [BlockClass.ALL_MATCH] * 3


def test_prune_above_max_visits_only_root():
    tree = build_tree([(i * 10, i * 10 + 9) for i in range(64)], fanout=4)
    classes, visited = prune(tree, Predicate("c", CmpOp.GT, 10_000))
    assert all(c is BlockClass.NONE_MATCH for c in classes)
    assert visited == 1


def test_prune_soundness_exhaustive():
    rng = random.Random(7)
    blocks = [[rng.randrange(50) for _ in range(6)] for _ in range(30)]
    sketches = [sketch_of(ColumnType.INT64, b) for b in blocks]
    tree = IndexTree(ColumnType.INT64, sketches, fanout=4)
    for op in CmpOp:
        for lit in range(-1, 52):
            pred = Predicate("c", op, lit)
            classes, _ = prune(tree, pred)
            for b, cls in enumerate(classes):
                hits = [pred.matches(v) for v in blocks[b]]
                if cls is BlockClass.ALL_MATCH:
                    assert all(hits)
                elif cls is BlockClass.NONE_MATCH:
                    assert not any(hits)


def test_sketch_aggregate_no_pred_no_dirty():
    tree = build_tree([(1, 10), (11, 20)])
    acc, residual = sketch_aggregate(tree, AggFunc.COUNT_STAR)
    assert residual == []
    assert acc.result() == 20


def test_sketch_aggregate_maybe_block_is_residual():
    tree = build_tree([(1, 10), (11, 20), (21, 30)])
    acc, residual = sketch_aggregate(tree, AggFunc.COUNT_STAR,
                                     Predicate("c", CmpOp.GT, 25))
    assert residual == [2]
    assert acc.result() == 0


def test_sketch_aggregate_dirty_block_always_residual():
    tree = build_tree([(1, 10), (11, 20)])
    acc, residual = sketch_aggregate(tree, AggFunc.SUM, None,
                                     dirty_blocks={0})
    assert residual == [0]
    assert acc.result() == sum(range(11, 21))


def test_sketch_aggregate_partial_plus_residual_equals_brute_force():
    rng = random.Random(8)
    for _ in range(25):
        blocks = [[rng.choice([None, rng.randrange(100)]) for _ in range(10)]
                  for _ in range(12)]
        sketches = [sketch_of(ColumnType.INT64, b) for b in blocks]
        tree = IndexTree(ColumnType.INT64, sketches, fanout=3)
        dirty = {b for b in range(12) if rng.random() < 0.3}
        pred = (None if rng.random() < 0.3
                else Predicate("c", rng.choice(list(CmpOp)), rng.randrange(100)))
        for func in (AggFunc.COUNT_STAR, AggFunc.COUNT, AggFunc.SUM,
                     AggFunc.MIN, AggFunc.MAX, AggFunc.AVG):
            acc, residual = sketch_aggregate(tree, func, pred, dirty)
            # finish the residual work by brute force
            for b in residual:
                for v in blocks[b]:
                    if pred is None or (v is not None and pred.matches(v)):
                        acc.update_value(None if func is AggFunc.COUNT_STAR
                                         else v)
            flat = [v for b, block in enumerate(blocks) for v in block
                    if pred is None or (v is not None and pred.matches(v))]
            present = [v for v in flat if v is not None]
            if func is AggFunc.COUNT_STAR:
                expect = len(flat)
            elif func is AggFunc.COUNT:
                expect = len(present)
            elif not present:
                expect = None
            elif func is AggFunc.SUM:
                expect = sum(present)
            elif func is AggFunc.MIN:
                expect = min(present)
            elif func is AggFunc.MAX:
                expect = max(present)
            else:
                expect = sum(present) / len(present)
            assert acc.result() == expect, (func, pred)


def test_utf8_minmax_not_answerable_after_roundtrip():
    s = sketch_of(ColumnType.UTF8, ["aaaaaaaaaa", "zzzzzzzzzz"])
    loaded = Sketch.from_bytes(ColumnType.UTF8, s.to_bytes())
    assert block_answerable(loaded, AggFunc.COUNT)
    assert not block_answerable(loaded, AggFunc.MIN)
