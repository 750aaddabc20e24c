"""Acceptance criteria, one test per criterion.

Each test prints `ACCEPTANCE <n> PASS|FAIL <label> (<elapsed>s)` so a plain
`pytest -s tests/test_acceptance.py` reads as a checklist.  Expected values
come from the independent replay oracle in oracle.py or from closed-form
construction, never from the engine itself.
"""

import itertools
import random
import time
from contextlib import contextmanager

from conftest import make_schema, three_col_schema
from oracle import OracleTable

from mercury_mini import (
    AggFunc,
    AggSpec,
    CmpOp,
    ColumnDef,
    ColumnType,
    Database,
    MViewDef,
    Predicate,
    RefreshPolicy,
    StoreMode,
    TableSchema,
    Update,
)
from mercury_mini import keys
from mercury_mini.catalog import SIMPLE_MAV
from mercury_mini.encoding import (
    EncodingId,
    decode,
    encode_best,
    encode_delta,
    encode_dict,
    encode_intercol,
    encode_plain,
    encode_prefix,
    eval_predicate_encoded,
)
from mercury_mini import bitmap
from mercury_mini.scan import (
    ScanPlan,
    execute_agg_pushdown,
    execute_groupby_pushdown,
    execute_no_pushdown,
    execute_scan,
    row_scan_baseline,
)
from mercury_mini.skipindex import BlockClass, IndexTree, prune, sketch_of
from mercury_mini.storage import Delete, Insert, Tablet


@contextmanager
def criterion(num: int, label: str, bound_s: float | None):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException:
        elapsed = time.perf_counter() - t0
        print(f"\nACCEPTANCE {num:02d} FAIL {label} ({elapsed:.2f}s)")
        raise
    elapsed = time.perf_counter() - t0
    print(f"\nACCEPTANCE {num:02d} PASS {label} ({elapsed:.2f}s)")
    if bound_s is not None:
        assert elapsed < bound_s, f"criterion {num} exceeded {bound_s}s"


# -- 1: worked-example fidelity ------------------------------------------------


def test_criterion_1_worked_example(tmp_path):
    with criterion(1, "worked-example fidelity", 1.0):
        with Database(tmp_path / "d") as db:
            db.create_table(make_schema())
            db.enable_mlog("t1")
            db.create_mview(MViewDef(
                "m1", "t1", SIMPLE_MAV,
                (AggSpec(AggFunc.COUNT, "c1", "count(c1)"),),
                (), RefreshPolicy.INCREMENTAL))
            db.insert("t1", (3, 4))
            db.insert("t1", (5, 6))
            db.insert("t1", (8, 3))
            db.update("t1", (8,), {"c1": 7})
            db.delete("t1", (3,))

            entries = db.mlogs["t1"].entries
            assert [(e.dmltype, e.old_new, e.values) for e in entries] == [
                ("insert", "New", (3, 4)),
                ("insert", "New", (5, 6)),
                ("insert", "New", (8, 3)),
                ("update", "Old", (8, 3)),
                ("update", "New", (7, 3)),
                ("delete", "Old", (3, 4)),
            ]
            # count delta (4 New with c1 non-null) - (2 Old) = 2
            news = sum(1 for e in entries
                       if e.old_new == "New" and e.values[0] is not None)
            olds = sum(1 for e in entries if e.old_new == "Old")
            assert news - olds == 2
            report = db.incremental_refresh("m1")
            assert report["entries_processed"] == 6
            assert db.realtime_read("m1") == [{"count(c1)": 2}]
            assert db.run_query("SELECT c1, c2 FROM t1").rows == [(5, 6),
                                                                  (7, 3)]


# -- 2: merge-on-read oracle equivalence ------------------------------------------


AGG_FUNCS = ["count_star", "count_col", "sum", "min", "max", "avg"]


def replay_history(tmp_path, seed, ops):
    """Random DML with 10 pre-drawn snapshot points and interleaved
    compactions; engine and oracle move in lockstep."""
    rng = random.Random(seed)
    tablet = Tablet(three_col_schema(f"h{seed}"), tmp_path / f"h{seed}",
                    block_rows=rng.choice([16, 64, 128]))
    oracle = OracleTable(["pk", "num", "tag"], ["pk"])
    live: list[int] = []
    snap_points = set(rng.sample(range(ops), 10))
    snaps = []
    tags = [None, "", "alpha", "beta", "pre_a", "pre_b", "zz"]
    for step in range(ops):
        roll = rng.random()
        if roll < 0.55 or not live:
            pk = rng.randrange(ops * 2)
            if tablet.visible_row(tablet.pk_key((pk,))) is None:
                values = (pk, rng.choice([None, rng.randrange(-100, 100)]),
                          rng.choice(tags))
                tablet.apply_dml(Insert(values))
                oracle.insert(values)
                live.append(pk)
        elif roll < 0.8:
            pk = live[rng.randrange(len(live))]
            assignments = {"num": rng.choice([None, rng.randrange(100)])}
            if rng.random() < 0.4:
                assignments["tag"] = rng.choice(tags)
            tablet.apply_dml(Update((pk,), assignments))
            oracle.update((pk,), assignments)
        else:
            i = rng.randrange(len(live))
            pk = live[i]
            live[i] = live[-1]
            live.pop()
            tablet.apply_dml(Delete((pk,)))
            oracle.delete((pk,))
        if rng.random() < 0.008 and tablet.state.memtable.entries:
            tablet.minor_compact()
        if rng.random() < 0.004 and (tablet.state.minors
                                     or tablet.state.memtable.entries):
            tablet.major_compact()
        if step in snap_points:
            snaps.append((tablet.take_snapshot(), oracle.snapshot()))
    return tablet, snaps


def check_snapshot_against_oracle(tablet, snap, osnap, rng):
    preds = []
    if rng.random() < 0.7:
        preds.append(Predicate("num", rng.choice(list(CmpOp)),
                               rng.randrange(-100, 100)))
    if rng.random() < 0.3:
        preds.append(Predicate("pk", rng.choice(list(CmpOp)),
                               rng.randrange(0, 2000)))
    opreds = [(p.column, p.op.value, p.literal) for p in preds]

    got, _ = execute_scan(tablet, ScanPlan("t", snap, predicates=preds))
    assert got == osnap.scan(opreds)

    aggs = [AggSpec(AggFunc(f), None if f == "count_star" else "num", f)
            for f in AGG_FUNCS]
    got, _ = execute_agg_pushdown(tablet, ScanPlan("t", snap, predicates=preds,
                                                   aggs=aggs))
    want = {f: osnap.aggregate(f, None if f == "count_star" else "num", opreds)
            for f in AGG_FUNCS}
    assert got == want

    gaggs = [AggSpec(AggFunc.COUNT_STAR, None, "n"),
             AggSpec(AggFunc.SUM, "num", "s")]
    res, _ = execute_groupby_pushdown(tablet, ScanPlan(
        "t", snap, predicates=preds, aggs=gaggs, group_by="tag"))
    survivors = OracleTable(["pk", "num", "tag"], ["pk"])
    for values in osnap.scan(opreds):
        survivors.insert(values)
    assert res.groups == survivors.snapshot().group_by(
        "tag", [("count_star", None), ("sum", "num")])


def test_criterion_2_merge_on_read_oracle(tmp_path):
    with criterion(2, "merge-on-read oracle equivalence, 200 histories", 60.0):
        rng = random.Random(2024)
        for seed in range(200):
            tablet, snaps = replay_history(tmp_path, seed, ops=1000)
            for snap, osnap in snaps:
                check_snapshot_against_oracle(tablet, snap, osnap, rng)


# -- 3: MV equivalence triangle -------------------------------------------------


MV_AGGS = (
    AggSpec(AggFunc.COUNT_STAR, None, "n"),
    AggSpec(AggFunc.COUNT, "v", "count_v"),
    AggSpec(AggFunc.SUM, "v", "sum_v"),
    AggSpec(AggFunc.MIN, "v", "min_v"),
    AggSpec(AggFunc.MAX, "v", "max_v"),
    AggSpec(AggFunc.AVG, "v", "avg_v"),
)

MV_ORACLE_AGGS = [("count_star", None), ("count_col", "v"), ("sum", "v"),
                  ("min", "v"), ("max", "v"), ("avg", "v")]


def mv_groups(rows):
    return {r["g"]: [r["n"], r["count_v"], r["sum_v"], r["min_v"],
                     r["max_v"], r["avg_v"]] for r in rows}


def oracle_mv(osnap):
    return osnap.group_by("g", MV_ORACLE_AGGS)


def test_criterion_3_mv_equivalence_triangle(tmp_path):
    with criterion(3, "MV equivalence triangle, 50 histories", 60.0):
        base_schema = TableSchema(
            "b",
            (ColumnDef("id", ColumnType.INT64, nullable=False),
             ColumnDef("g", ColumnType.INT64, nullable=True),
             ColumnDef("v", ColumnType.INT64, nullable=True)),
            ("id",), StoreMode.COLUMN)
        for seed in range(50):
            rng = random.Random(9000 + seed)
            with Database(tmp_path / f"mv{seed}", use_lock=False) as db:
                db.create_table(base_schema)
                db.enable_mlog("b")
                mv_def = lambda name, policy: MViewDef(
                    name, "b", SIMPLE_MAV, MV_AGGS, ("g",), policy)
                db.create_mview(mv_def("inc", RefreshPolicy.INCREMENTAL))
                db.create_mview(mv_def("ful", RefreshPolicy.FULL))
                oracle = OracleTable(["id", "g", "v"], ["id"])
                live = {}
                checks = sorted(rng.sample(range(120), 10))
                for step in range(120):
                    roll = rng.random()
                    if roll < 0.5 or not live:
                        pk = rng.randrange(4000)
                        if pk not in live:
                            row = (pk, rng.choice([None, rng.randrange(4)]),
                                   rng.choice([None, rng.randrange(-30, 30)]))
                            db.insert("b", row)
                            oracle.insert(row)
                            live[pk] = row
                    elif roll < 0.72:
                        pk = rng.choice(sorted(live))
                        a = {"v": rng.choice([None, rng.randrange(-30, 30)])}
                        db.update("b", (pk,), a)
                        oracle.update((pk,), a)
                        live[pk] = (pk, live[pk][1], a["v"])
                    elif roll < 0.87 and live:
                        # target a stored extremum so min/max rescans trigger
                        groups = oracle.snapshot().group_by("g", [("min", "v"),
                                                                  ("max", "v")])
                        victims = [pk for pk, row in live.items()
                                   if row[2] is not None and row[1] in groups
                                   and row[2] in (groups[row[1]][0],
                                                  groups[row[1]][1])]
                        if victims:
                            pk = rng.choice(sorted(victims))
                            db.delete("b", (pk,))
                            oracle.delete((pk,))
                            del live[pk]
                    else:
                        pk = rng.choice(sorted(live))
                        db.delete("b", (pk,))
                        oracle.delete((pk,))
                        del live[pk]
                    if step in checks:
                        snap = db.take_snapshot("b")
                        got = mv_groups(db.realtime_read("inc", snapshot=snap))
                        assert got == oracle_mv(oracle.snapshot()), (seed, step)
                    if rng.random() < 0.05:
                        db.incremental_refresh("inc")
                # matched final snapshot: all three must agree with recompute
                want = oracle_mv(oracle.snapshot())
                db.incremental_refresh("inc")
                db.full_refresh("ful")
                assert mv_groups(db.realtime_read("inc")) == want, seed
                assert mv_groups(db.read_mview("ful")) == want, seed


# -- 4: encoding round-trip and encoded evaluation ----------------------------------


def decode_eval_oracle(values, pred):
    return [v is not None and pred.matches(v) for v in values]


def assert_block_ok(blk, values, literals, source=None, seen=None):
    assert decode(blk, source) == values
    for op, lit in zip(CmpOp, itertools.cycle(literals)):
        pred = Predicate("c", op, lit)
        got = bitmap.unpack(eval_predicate_encoded(blk, pred, source),
                            len(values)).tolist()
        assert got == decode_eval_oracle(values, pred), (blk.encoding_id, op)
    if seen is not None:
        seen.add(blk.encoding_id)


def test_criterion_4_encoding_properties(tmp_path):
    with criterion(4, "encoding round-trip + encoded-eval, >=10k blocks", 30.0):
        rng = random.Random(12345)
        blocks = 0
        seen: set = set()
        while blocks < 10_000:
            n = rng.randrange(4, 40)
            ints = [rng.choice([None, rng.randrange(-1000, 1000)])
                    for _ in range(n)]
            floats = [rng.choice([None, rng.randrange(-64, 64) / 4])
                      for _ in range(n)]
            words = [rng.choice([None, "", "aa", "ab", "pre_one", "pre_two",
                                 "z\x00x", "m" * 9]) for _ in range(n)]
            int_lits = [rng.randrange(-1000, 1000),
                        next((v for v in ints if v is not None), 0)]
            f_lits = [rng.randrange(-64, 64) / 4, 0.3]
            s_lits = ["", "ab", "pre_one", "q"]

            for blk in (encode_plain(ColumnType.INT64, ints),
                        encode_delta(ints)):
                assert_block_ok(blk, ints, int_lits, seen=seen)
                blocks += 1
            blk = encode_dict(ColumnType.INT64, ints)
            assert_block_ok(blk, ints, int_lits, seen=seen)
            blocks += 1

            for blk in (encode_plain(ColumnType.FLOAT64, floats),
                        encode_dict(ColumnType.FLOAT64, floats)):
                assert_block_ok(blk, floats, f_lits, seen=seen)
                blocks += 1

            for blk in (encode_plain(ColumnType.UTF8, words),
                        encode_dict(ColumnType.UTF8, words),
                        encode_prefix(words)):
                assert_block_ok(blk, words, s_lits, seen=seen)
                blocks += 1

            # inter-column pair: equal column and suffixed column
            src = [rng.choice([None, "2024-01-01", "2024-02-02"])
                   for _ in range(n)]
            dup = list(src)
            stamped = [None if s is None else s + rng.choice(["", " 10:00"])
                       for s in src]
            cols = {"s": (ColumnType.UTF8, src),
                    "eq": (ColumnType.UTF8, dup),
                    "ts": (ColumnType.UTF8, stamped)}
            blk = encode_intercol(cols, "eq", "s")
            assert blk.encoding_id is EncodingId.INTERCOL_EQ
            assert_block_ok(blk, dup, s_lits, source=src, seen=seen)
            blocks += 1
            blk = encode_intercol(cols, "ts", "s")
            assert blk.encoding_id in (EncodingId.INTERCOL_SUBSTR,
                                       EncodingId.INTERCOL_EQ)
            assert_block_ok(blk, stamped, s_lits, source=src, seen=seen)
            blocks += 1
        assert blocks >= 10_000
        assert seen >= set(EncodingId)  # every encoding exercised


# -- 5: compression properties ----------------------------------------------------


def test_criterion_5_compression_properties():
    with criterion(5, "compression properties on synthetic corpora", 10.0):
        rng = random.Random(77)

        # (a) duplicated column pair: reference payload within 16 bytes
        base = [rng.randrange(1 << 40) for _ in range(1024)]
        cols = {"a": (ColumnType.INT64, base),
                "b": (ColumnType.INT64, list(base))}
        blk = encode_best(cols, "b")
        assert blk.encoding_id is EncodingId.INTERCOL_EQ
        assert blk.size <= 16

        # (b) 32-byte shared prefix + 4-byte suffix: >= 4x vs plain
        prefix = "p" * 32
        words = [prefix + f"{i:04d}" for i in range(1024)]
        plain_size = encode_plain(ColumnType.UTF8, words).size
        pref = encode_prefix(words)
        assert plain_size / pref.size >= 4.0
        assert decode(pref) == words

        # (c) low-range int64: delta bit-packing >= 4x vs 8-byte plain
        values = [rng.randrange(0, 4096) for _ in range(1024)]  # 12-bit range
        delta = encode_delta(values)
        plain_size = encode_plain(ColumnType.INT64, values).size
        assert delta.encoding_id is EncodingId.DELTA
        assert plain_size / delta.size >= 4.0
        assert decode(delta) == values


# -- 6: skip-index soundness and effectiveness ------------------------------------


def test_criterion_6_skipindex(tmp_path):
    with criterion(6, "skip-index soundness + pruning effectiveness", 10.0):
        rng = random.Random(99)
        # exhaustive soundness on generated 100-block tables
        for trial in range(8):
            blocks = [[rng.choice([None, rng.randrange(200)])
                       for _ in range(rng.randrange(2, 12))]
                      for _ in range(100)]
            tree = IndexTree(ColumnType.INT64,
                             [sketch_of(ColumnType.INT64, b) for b in blocks])
            for op in CmpOp:
                for lit in rng.sample(range(-5, 205), 24):
                    pred = Predicate("c", op, lit)
                    classes, _ = prune(tree, pred)
                    for b, cls in enumerate(classes):
                        hits = [pred.matches(v) for v in blocks[b]]
                        if cls is BlockClass.ALL_MATCH:
                            assert all(hits)
                        elif cls is BlockClass.NONE_MATCH:
                            assert not any(hits)

        # effectiveness: 1e5-row pk-sorted compacted table, 1% predicate
        schema = TableSchema(
            "s",
            (ColumnDef("pk", ColumnType.INT64, nullable=False),
             ColumnDef("val", ColumnType.INT64, nullable=False)),
            ("pk",), StoreMode.COLUMN)
        t = Tablet(schema, tmp_path / "s", block_rows=256)
        t.bulk_load([(i, i ^ 0x5A5A) for i in range(100_000)])
        lo = 41_000
        plan = ScanPlan("s", t.take_snapshot(),
                        predicates=[Predicate("pk", CmpOp.GE, lo),
                                    Predicate("pk", CmpOp.LT, lo + 1000)])
        rows, stats = execute_scan(t, plan)
        assert len(rows) == 1000
        assert stats.blocks_total == (100_000 + 255) // 256
        assert stats.blocks_decoded / stats.blocks_total <= 0.02

        # count(*) on a clean compacted table decodes nothing
        plan = ScanPlan("s", t.take_snapshot(),
                        aggs=[AggSpec(AggFunc.COUNT_STAR, None, "n")])
        result, stats = execute_agg_pushdown(t, plan)
        assert result == {"n": 100_000}
        assert stats.blocks_decoded == 0


# -- 7: sort-key order isomorphism ---------------------------------------------------


def test_criterion_7_sortkey_isomorphism():
    with criterion(7, "sort-key order isomorphism", 5.0):
        rng = random.Random(555)
        pool = ["", "a", "ab", "b", "ba", "\x00", "\x00a", "z" * 8, "￿"]

        def tuple_key(t):
            return tuple((0, None.__class__.__name__) if v is None else (1, v)
                         for v in t)

        violations = 0
        for _ in range(10_000):
            a = (rng.choice([None, rng.randrange(-10**6, 10**6)]),
                 rng.choice([None] + pool))
            b = (rng.choice([None, rng.randrange(-10**6, 10**6)]),
                 rng.choice([None] + pool))
            ka = keys.encode_tuple([ColumnType.INT64, ColumnType.UTF8], a)
            kb = keys.encode_tuple([ColumnType.INT64, ColumnType.UTF8], b)
            ta, tb = tuple_key(a), tuple_key(b)
            if (ka < kb) != (ta < tb) or (ka == kb) != (a == b):
                violations += 1
        assert violations == 0

        # exhaustive 2-char utf8 domain, including multi-byte code points
        alphabet = ["\x00", "\x01", "a", "b", "é", "Ā", "￿"]
        domain = [""] + [c for c in alphabet] + [
            c + d for c in alphabet for d in alphabet]
        encoded = {s: keys.encode_value(ColumnType.UTF8, s) for s in domain}
        for x in domain:
            for y in domain:
                assert (encoded[x] < encoded[y]) == (x < y), (x, y)
                assert (encoded[x] == encoded[y]) == (x == y)


# -- 8: dual-path equality --------------------------------------------------------


def test_criterion_8_dual_path_equality(tmp_path):
    with criterion(8, "dual-path equality, 50 redundant tables", 60.0):
        for seed in range(50):
            rng = random.Random(4000 + seed)
            tablet, _ = _redundant_history(tmp_path, seed, rng)
            for q in range(20):
                kw, kind = _random_query(rng)
                plan = ScanPlan("t", tablet.take_snapshot(), **kw)
                if kind == "scan":
                    a, _ = execute_scan(tablet, plan)
                    b, _ = row_scan_baseline(tablet, plan)
                    c, _ = execute_no_pushdown(tablet, plan)
                elif kind == "agg":
                    a, _ = execute_agg_pushdown(tablet, plan)
                    b, _ = row_scan_baseline(tablet, plan)
                    c, _ = execute_no_pushdown(tablet, plan)
                else:
                    ra, _ = execute_groupby_pushdown(tablet, plan)
                    rb, _ = row_scan_baseline(tablet, plan)
                    rc, _ = execute_no_pushdown(tablet, plan)
                    a, b, c = ra.groups, rb.groups, rc.groups
                assert a == b == c, (seed, q, kind)


def _redundant_history(tmp_path, seed, rng):
    tablet = Tablet(three_col_schema(f"r{seed}", StoreMode.REDUNDANT),
                    tmp_path / f"r{seed}", block_rows=32)
    live = []
    for step in range(rng.randrange(150, 350)):
        roll = rng.random()
        if roll < 0.6 or not live:
            pk = rng.randrange(2000)
            if tablet.visible_row(tablet.pk_key((pk,))) is None:
                tablet.apply_dml(Insert(
                    (pk, rng.choice([None, rng.randrange(-50, 50)]),
                     rng.choice([None, "x", "y", "pre_a", "pre_b"]))))
                live.append(pk)
        elif roll < 0.85:
            tablet.apply_dml(Update((rng.choice(live),),
                                    {"num": rng.choice([None,
                                                        rng.randrange(50)])}))
        else:
            pk = live.pop(rng.randrange(len(live)))
            tablet.apply_dml(Delete((pk,)))
        if rng.random() < 0.02 and (tablet.state.minors
                                    or tablet.state.memtable.entries):
            tablet.major_compact()
    if tablet.state.minors or tablet.state.memtable.entries:
        tablet.major_compact()
    # half the tables also carry fresh increments over the baseline
    if seed % 2 == 0:
        for _ in range(10):
            pk = rng.randrange(2000, 2100)
            if tablet.visible_row(tablet.pk_key((pk,))) is None:
                tablet.apply_dml(Insert((pk, rng.randrange(50), "late")))
    return tablet, live


def _random_query(rng):
    preds = []
    for _ in range(rng.randrange(0, 3)):
        preds.append(Predicate(rng.choice(["pk", "num"]),
                               rng.choice(list(CmpOp)),
                               rng.randrange(-60, 2100)))
    if rng.random() < 0.3:
        preds.append(Predicate("tag", rng.choice(list(CmpOp)),
                               rng.choice(["", "x", "pre_a", "zz"])))
    kind = rng.random()
    if kind < 0.4:
        return dict(predicates=preds), "scan"
    if kind < 0.75:
        return dict(predicates=preds, aggs=[
            AggSpec(AggFunc.COUNT_STAR, None, "n"),
            AggSpec(AggFunc.COUNT, "tag", "c_tag"),
            AggSpec(AggFunc.SUM, "num", "s"),
            AggSpec(AggFunc.MIN, "num", "lo"),
            AggSpec(AggFunc.MAX, "num", "hi"),
            AggSpec(AggFunc.AVG, "num", "m")]), "agg"
    return dict(predicates=preds, group_by="tag",
                aggs=[AggSpec(AggFunc.COUNT_STAR, None, "n"),
                      AggSpec(AggFunc.SUM, "num", "s")]), "group"


# -- 9: refresh cost linearity -------------------------------------------------------


def test_criterion_9_refresh_cost_linearity(tmp_path):
    with criterion(9, "refresh cost linearity, D in {1k,2k,4k,8k}", 30.0):
        groups = 100_000
        rng = random.Random(31337)
        with Database(tmp_path / "cost", use_lock=False) as db:
            schema = TableSchema(
                "base",
                (ColumnDef("id", ColumnType.INT64, nullable=False),
                 ColumnDef("g", ColumnType.INT64, nullable=False),
                 ColumnDef("v", ColumnType.INT64, nullable=False)),
                ("id",), StoreMode.COLUMN)
            db.create_table(schema)
            db._tablet("base").bulk_load(
                [(i, i, i % 101) for i in range(groups)])
            db.enable_mlog("base")
            db.create_mview(MViewDef(
                "m", "base", SIMPLE_MAV,
                (AggSpec(AggFunc.COUNT, "v", "count_v"),
                 AggSpec(AggFunc.SUM, "v", "sum_v")),
                ("g",), RefreshPolicy.INCREMENTAL))
            measured = []
            for d in (1000, 2000, 4000, 8000):
                workload = [Update((rng.randrange(groups),),
                                   {"v": rng.randrange(101)})
                            for _ in range(d // 2)]  # 2 entries per update
                m = db.measure_refresh_cost("m", workload)
                assert m["entries_processed"] == d
                assert m["groups_touched"] <= d
                measured.append(m)
            for a, b in zip(measured, measured[1:]):
                ratio = b["entries_processed"] / a["entries_processed"]
                assert 1.8 <= ratio <= 2.2
            # update-only workload: container size independent of D
            sizes = {m["container_rows"] for m in measured}
            assert sizes == {groups}


# -- 10: informative pushdown benchmark (non-gating) -----------------------------------


def test_criterion_10_informative_benchmark(tmp_path):
    with criterion(10, "informative column-vs-row benchmark", None):
        from mercury_mini.report import pushdown_bench

        results = pushdown_bench(tmp_path / "report", rows=1_000_000)
        seconds = {r["path"]: r["seconds"] for r in results}
        speedup = seconds["row_baseline"] / seconds["columnar_pushdown"]
        print(f"\n  columnar pushdown: {seconds['columnar_pushdown']:.3f}s")
        print(f"  row baseline:      {seconds['row_baseline']:.3f}s")
        print(f"  no-pushdown exec:  {seconds['no_pushdown_executor']:.3f}s")
        print(f"  column-vs-row speedup: {speedup:.2f}x (informative only; "
              "hardware-dependent)")
        assert (tmp_path / "report" / "pushdown_bench.png").exists()
        assert (tmp_path / "report" / "pushdown_bench.csv").exists()
