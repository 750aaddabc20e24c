"""Pushdown scan pipeline.

Execution order per columnar baseline block: skip-index pruning, then
predicate evaluation directly on the encoded block, then projection of the
surviving rows; blocks whose pk range overlaps incremental data are always
row-merged so updates and tombstones win.  Aggregates take whole blocks
from sketches whenever the predicate provably matches every row; group-by
aggregates dictionary codes per block and merges by dictionary value.

The row-baseline and no-pushdown executors produce identical logical
results by construction and exist as the cross-check paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from . import bitmap, encoding, keys, vectors
from .catalog import AggSpec, StoreMode, TableSchema
from .encoding import EncodingId
from .errors import FormatUnavailable, TypeMismatch, UnsupportedAgg
from .skipindex import BlockClass, block_answerable, prune
from .storage import Row, Snapshot, Tablet
from .types import AggFunc, ColumnType, Predicate, check_literal
from .vectors import (
    Accumulator,
    AggInput,
    BatchFlags,
    ColumnBatch,
    apply_filter,
)

BATCH_ROWS = 1024  # executor batch granularity


@dataclass
class ScanPlan:
    table: str
    snapshot: Snapshot
    projection: Optional[list[str]] = None
    predicates: list[Predicate] = field(default_factory=list)
    residual: Optional[Callable[[tuple], bool]] = None
    aggs: Optional[list[AggSpec]] = None
    group_by: Optional[str] = None


@dataclass
class ScanStats:
    """Work counters for one scan.

    rows_merged_from_incremental counts incremental row images that had to
    be merged into the stream (whether or not they survived filtering).
    """

    blocks_total: int = 0
    blocks_pruned: int = 0
    blocks_sketch_answered: int = 0
    blocks_decoded: int = 0
    rows_merged_from_incremental: int = 0

    def to_json(self) -> dict:
        return {
            "blocks_total": self.blocks_total,
            "blocks_pruned": self.blocks_pruned,
            "blocks_sketch_answered": self.blocks_sketch_answered,
            "blocks_decoded": self.blocks_decoded,
            "rows_merged_from_incremental": self.rows_merged_from_incremental,
        }


@dataclass
class GroupByResult:
    groups: dict  # group key value -> list of aggregate results
    fallback: bool  # True when any visited block was not dictionary-coded


def validate_plan(schema: TableSchema, plan: ScanPlan) -> None:
    try:
        for pred in plan.predicates:
            check_literal(schema.column(pred.column).type, pred.literal)
        for name in plan.projection or ():
            schema.column(name)
        if plan.group_by:
            schema.column(plan.group_by)
    except KeyError as exc:
        raise TypeMismatch(f"unknown column {exc.args[0]!r}") from None
    for spec in plan.aggs or ():
        if not isinstance(spec.function, AggFunc):
            raise UnsupportedAgg(str(spec.function))
        spec.validate(schema)


def _passes(schema: TableSchema, plan: ScanPlan, values: tuple) -> bool:
    for pred in plan.predicates:
        if not pred.matches(values[schema.column_index(pred.column)]):
            return False
    if plan.residual is not None and not plan.residual(values):
        return False
    return True


def _inc_visible(state, key: bytes, rv: int) -> Optional[Row]:
    row = state.memtable.latest_visible(key, rv)
    if row is not None:
        return row
    for minor in reversed(state.minors):
        row = minor.latest_visible(key, rv)
        if row is not None:
            return row
    return None


def _combined_classes(baseline, preds: Sequence[Predicate],
                      n_blocks: int) -> list[BlockClass]:
    classes = [BlockClass.ALL_MATCH] * n_blocks
    for pred in preds:
        per_pred, _ = prune(baseline.index_tree(pred.column), pred)
        for b in range(n_blocks):
            cur = classes[b]
            nxt = per_pred[b]
            if cur is BlockClass.NONE_MATCH or nxt is BlockClass.NONE_MATCH:
                classes[b] = BlockClass.NONE_MATCH
            elif cur is BlockClass.ALL_MATCH and nxt is BlockClass.ALL_MATCH:
                classes[b] = BlockClass.ALL_MATCH
            else:
                classes[b] = BlockClass.MAYBE
    return classes


def _block_walk(tablet: Tablet, plan: ScanPlan, stats: ScanStats) -> Iterator[tuple]:
    """Pk-ordered walk events over the columnar baseline plus increments.

    ("inc", keys)            incremental-only keys outside any block range
    ("pruned", b)            clean block no predicate row can match
    ("clean", b, cls)        clean block, cls in {ALL_MATCH, MAYBE}
    ("dirty", b, keys)       block overlapping incremental keys: row-merge
    """
    snapshot = plan.snapshot
    baseline = snapshot.state.baseline
    reader = baseline.col_reader
    n = reader.block_count
    stats.blocks_total = n
    classes = _combined_classes(baseline, plan.predicates, n)
    ranges = baseline.block_key_ranges()
    inc = tablet.incremental_keys(snapshot)
    i = 0
    for b in range(n):
        lo, hi = ranges[b]
        j = i
        while j < len(inc) and inc[j] < lo:
            j += 1
        if j > i:
            yield ("inc", inc[i:j])
            i = j
        j = i
        while j < len(inc) and inc[j] <= hi:
            j += 1
        if j > i:
            in_block = inc[i:j]
            i = j
            yield ("dirty", b, in_block)
        elif classes[b] is BlockClass.NONE_MATCH:
            stats.blocks_pruned += 1
            yield ("pruned", b)
        else:
            yield ("clean", b, classes[b])
    if i < len(inc):
        yield ("inc", inc[i:])


def _conjunct_bits(reader, schema: TableSchema, preds: Sequence[Predicate],
                   b: int, row_count: int) -> bitmap.Bitmap:
    """AND of every conjunct, each evaluated directly on the encoded block."""
    bits = bitmap.ones(row_count)
    for pred in preds:
        ci = schema.column_index(pred.column)
        blk = reader.read_block(ci, b)
        src = None
        if blk.encoding_id in (EncodingId.INTERCOL_EQ, EncodingId.INTERCOL_SUBSTR):
            src = reader.decode_block_column(
                encoding.intercol_source_ordinal(blk), b)
        bits = bits & encoding.eval_predicate_encoded(blk, pred, src)
    return bits


def _merge_dirty_block(tablet: Tablet, plan: ScanPlan, b: int,
                       inc_keys: list[bytes], stats: ScanStats) -> Iterator[Row]:
    """Two-pointer merge of one baseline block with its incremental overlap."""
    snapshot = plan.snapshot
    state = snapshot.state
    rv = snapshot.read_version
    reader = state.baseline.col_reader
    schema = tablet.schema
    cols = [reader.decode_block_column(c, b) for c in range(len(schema.columns))]
    rows = len(cols[0])
    pk_types = schema.pk_types
    pk_idx = schema.pk_indexes
    stats.rows_merged_from_incremental += len(inc_keys)
    j = 0
    for r in range(rows):
        values = tuple(col[r] for col in cols)
        pk = tuple(values[i] for i in pk_idx)
        key = keys.encode_tuple(pk_types, pk)
        while j < len(inc_keys) and inc_keys[j] < key:
            row = _inc_visible(state, inc_keys[j], rv)
            j += 1
            if row is not None and not row.tombstone:
                yield row
        if j < len(inc_keys) and inc_keys[j] == key:
            row = _inc_visible(state, inc_keys[j], rv)
            j += 1
            if row is not None and not row.tombstone:
                yield row
            continue  # baseline image shadowed either way
        yield Row(key, pk, values, 0)
    while j < len(inc_keys):
        row = _inc_visible(state, inc_keys[j], rv)
        j += 1
        if row is not None and not row.tombstone:
            yield row


def _iter_inc_rows(state, inc_keys: list[bytes], rv: int,
                   stats: ScanStats) -> Iterator[Row]:
    stats.rows_merged_from_incremental += len(inc_keys)
    for key in inc_keys:
        row = _inc_visible(state, key, rv)
        if row is not None and not row.tombstone:
            yield row


# -- row-returning scan -------------------------------------------------------


def execute_scan(tablet: Tablet, plan: ScanPlan) -> tuple[list[tuple], ScanStats]:
    schema = tablet.schema
    validate_plan(schema, plan)
    stats = ScanStats()
    baseline = plan.snapshot.state.baseline
    if baseline is None or baseline.col_path is None:
        return _row_path_scan(tablet, plan, stats, baseline_format=None), stats

    proj_idx = ([schema.column_index(c) for c in plan.projection]
                if plan.projection is not None else None)
    reader = baseline.col_reader
    out: list[tuple] = []

    def emit(values: tuple) -> None:
        out.append(values if proj_idx is None
                   else tuple(values[i] for i in proj_idx))

    need_all = plan.residual is not None or proj_idx is None
    for event in _block_walk(tablet, plan, stats):
        kind = event[0]
        if kind == "pruned":
            continue
        if kind == "inc":
            for row in _iter_inc_rows(plan.snapshot.state, event[1],
                                      plan.snapshot.read_version, stats):
                if _passes(schema, plan, row.values):
                    emit(row.values)
            continue
        if kind == "dirty":
            stats.blocks_decoded += 1
            for row in _merge_dirty_block(tablet, plan, event[1], event[2], stats):
                if _passes(schema, plan, row.values):
                    emit(row.values)
            continue
        # clean block
        b, cls = event[1], event[2]
        stats.blocks_decoded += 1
        col_ids = (range(len(schema.columns)) if need_all
                   else sorted(set(proj_idx)))
        cols = {c: reader.decode_block_column(c, b) for c in col_ids}
        rows = reader.directories[0][b].row_count
        if cls is BlockClass.ALL_MATCH:
            mask = None  # no per-row re-evaluation
        else:
            bits = _conjunct_bits(reader, schema, plan.predicates, b, rows)
            mask = bitmap.unpack(bits, rows)
        for r in range(rows):
            if mask is not None and not mask[r]:
                continue
            if need_all:
                values = tuple(cols[c][r] for c in range(len(schema.columns)))
                if plan.residual is not None and not plan.residual(values):
                    continue
                emit(values)
            else:
                out.append(tuple(cols[c][r] for c in proj_idx))
    return out, stats


def _row_path_scan(tablet: Tablet, plan: ScanPlan, stats: ScanStats,
                   baseline_format: Optional[str]) -> list[tuple]:
    schema = tablet.schema
    proj_idx = ([schema.column_index(c) for c in plan.projection]
                if plan.projection is not None else None)
    stats.rows_merged_from_incremental += len(
        tablet.incremental_keys(plan.snapshot))
    out = []
    for row in tablet.merge_rows(plan.snapshot,
                                 baseline_format=baseline_format):
        if _passes(schema, plan, row.values):
            out.append(row.values if proj_idx is None
                       else tuple(row.values[i] for i in proj_idx))
    return out


# -- aggregate pushdown --------------------------------------------------------


def _check_agg_types(schema: TableSchema, aggs: Sequence[AggSpec]) -> None:
    for spec in aggs:
        if spec.function in (AggFunc.SUM, AggFunc.AVG):
            if not schema.column(spec.column).type.is_numeric:
                raise TypeMismatch(f"{spec.function.value}({spec.column}) over utf8")


def execute_agg_pushdown(tablet: Tablet, plan: ScanPlan
                         ) -> tuple[dict, ScanStats]:
    """Non-group-by aggregate pushdown: sketches answer clean fully-matching
    blocks, everything else is evaluated at row or batch level; avg reads
    out as sum/count with an empty input yielding null."""
    schema = tablet.schema
    validate_plan(schema, plan)
    aggs = plan.aggs or []
    _check_agg_types(schema, aggs)
    stats = ScanStats()
    accs = [Accumulator(spec.function) for spec in aggs]
    snapshot = plan.snapshot
    baseline = snapshot.state.baseline

    def row_update(values: tuple) -> None:
        for spec, acc in zip(aggs, accs):
            if spec.function is AggFunc.COUNT_STAR:
                acc.update_value(None)
            else:
                acc.update_value(values[schema.column_index(spec.column)])

    if baseline is None or baseline.col_path is None:
        for row in tablet.merge_rows(snapshot):
            stats.rows_merged_from_incremental += 1
            if _passes(schema, plan, row.values):
                row_update(row.values)
        return _agg_results(aggs, accs), stats

    reader = baseline.col_reader
    for event in _block_walk(tablet, plan, stats):
        kind = event[0]
        if kind == "pruned":
            continue
        if kind == "inc":
            for row in _iter_inc_rows(snapshot.state, event[1],
                                      snapshot.read_version, stats):
                if _passes(schema, plan, row.values):
                    row_update(row.values)
            continue
        if kind == "dirty":
            stats.blocks_decoded += 1
            for row in _merge_dirty_block(tablet, plan, event[1], event[2], stats):
                if _passes(schema, plan, row.values):
                    row_update(row.values)
            continue
        b, cls = event[1], event[2]
        if cls is BlockClass.ALL_MATCH and plan.residual is None:
            sketches = {spec.output_name: reader.directories[
                schema.column_index(spec.column)][b].sketch
                for spec in aggs if spec.column is not None}
            if all(block_answerable(sketches[s.output_name], s.function)
                   for s in aggs if s.column is not None):
                rows = reader.directories[0][b].row_count
                for spec, acc in zip(aggs, accs):
                    if spec.function is AggFunc.COUNT_STAR:
                        acc.absorb_stats(rows, 0, None, None, None)
                    else:
                        sk = sketches[spec.output_name]
                        acc.absorb_stats(sk.row_count, sk.null_count, sk.sum,
                                         sk.min, sk.max)
                stats.blocks_sketch_answered += 1
                continue
        stats.blocks_decoded += 1
        rows = reader.directories[0][b].row_count
        if cls is BlockClass.ALL_MATCH:
            bits = bitmap.ones(rows)
        else:
            bits = _conjunct_bits(reader, schema, plan.predicates, b, rows)
        if plan.residual is not None:
            cols = [reader.decode_block_column(c, b)
                    for c in range(len(schema.columns))]
            mask = bitmap.unpack(bits, rows)
            for r in range(rows):
                if mask[r]:
                    values = tuple(col[r] for col in cols)
                    if not plan.residual(values):
                        mask[r] = False
            bits = bitmap.pack(mask)
        for spec, acc in zip(aggs, accs):
            if spec.function is AggFunc.COUNT_STAR:
                flags = apply_filter([], BatchFlags(has_null=False), bits,
                                     row_count=rows)
                vectors.aggregate(None, flags, spec.function, acc,
                                  row_count=rows)
                continue
            ci = schema.column_index(spec.column)
            batch = ColumnBatch.from_values(
                schema.columns[ci].type, reader.decode_block_column(ci, b))
            flags = apply_filter([batch], BatchFlags.for_batches([batch]), bits)
            vectors.aggregate(batch, flags, spec.function, acc)
    return _agg_results(aggs, accs), stats


def _agg_results(aggs: Sequence[AggSpec], accs: Sequence[Accumulator]) -> dict:
    return {spec.output_name: acc.result() for spec, acc in zip(aggs, accs)}


# -- group-by pushdown -----------------------------------------------------------


def execute_groupby_pushdown(tablet: Tablet, plan: ScanPlan
                             ) -> tuple[GroupByResult, ScanStats]:
    """Per-block array aggregation over dictionary codes, merged across
    blocks by dictionary value; non-dictionary blocks fall back to hashing
    with an identical result."""
    schema = tablet.schema
    validate_plan(schema, plan)
    aggs = plan.aggs or []
    _check_agg_types(schema, aggs)
    gcol = plan.group_by
    gi = schema.column_index(gcol)
    stats = ScanStats()
    snapshot = plan.snapshot
    baseline = snapshot.state.baseline
    table: dict = {}
    fallback = False

    def touch(key_value) -> list[Accumulator]:
        accs = table.get(key_value)
        if accs is None:
            accs = [Accumulator(spec.function) for spec in aggs]
            table[key_value] = accs
        return accs

    def row_update(values: tuple) -> None:
        accs = touch(values[gi])
        for spec, acc in zip(aggs, accs):
            if spec.function is AggFunc.COUNT_STAR:
                acc.update_value(None)
            else:
                acc.update_value(values[schema.column_index(spec.column)])

    if baseline is None or baseline.col_path is None:
        for row in tablet.merge_rows(snapshot):
            stats.rows_merged_from_incremental += 1
            if _passes(schema, plan, row.values):
                row_update(row.values)
        return _group_result(table, aggs, fallback=True), stats

    reader = baseline.col_reader
    for event in _block_walk(tablet, plan, stats):
        kind = event[0]
        if kind == "pruned":
            continue
        if kind == "inc":
            for row in _iter_inc_rows(snapshot.state, event[1],
                                      snapshot.read_version, stats):
                if _passes(schema, plan, row.values):
                    row_update(row.values)
            continue
        if kind == "dirty":
            stats.blocks_decoded += 1
            for row in _merge_dirty_block(tablet, plan, event[1], event[2], stats):
                if _passes(schema, plan, row.values):
                    row_update(row.values)
            continue
        b, cls = event[1], event[2]
        stats.blocks_decoded += 1
        rows = reader.directories[0][b].row_count
        if cls is BlockClass.ALL_MATCH:
            bits = bitmap.ones(rows)
        else:
            bits = _conjunct_bits(reader, schema, plan.predicates, b, rows)
        if plan.residual is not None:
            cols = [reader.decode_block_column(c, b)
                    for c in range(len(schema.columns))]
            mask = bitmap.unpack(bits, rows)
            for r in range(rows):
                if mask[r] and not plan.residual(tuple(col[r] for col in cols)):
                    mask[r] = False
            bits = bitmap.pack(mask)

        agg_inputs = []
        for spec in aggs:
            if spec.function is AggFunc.COUNT_STAR:
                agg_inputs.append(AggInput(spec.function, None))
            else:
                ci = schema.column_index(spec.column)
                agg_inputs.append(AggInput(spec.function, ColumnBatch.from_values(
                    schema.columns[ci].type, reader.decode_block_column(ci, b))))

        gblk = reader.read_block(gi, b)
        active = bitmap.unpack(bits, rows)
        gnulls = bitmap.unpack(gblk.null_bitmap, rows)
        if gblk.encoding_id is EncodingId.DICT:
            entries, codes = encoding.dict_parts(gblk)
            if gblk.col_type is ColumnType.UTF8:
                entries = [e.decode("utf-8") for e in entries]
            flags = BatchFlags(has_null=True, all_active=False,
                               selection=bitmap.pack(active & ~gnulls))
            by_code = vectors.array_group_by(codes, max(len(entries), 1),
                                             agg_inputs, flags)
            for code, accs in by_code.items():
                mine = touch(entries[code])
                for a, c in zip(mine, accs):
                    a.merge(c)
        else:
            fallback = True
            gvalues = reader.decode_block_column(gi, b)
            key_batch = ColumnBatch.from_values(gblk.col_type, gvalues)
            flags = BatchFlags(has_null=True, all_active=False,
                               selection=bitmap.pack(active & ~gnulls))
            by_value = vectors.hash_group_by([key_batch], agg_inputs, flags)
            for (value,), accs in by_value.items():
                mine = touch(value)
                for a, c in zip(mine, accs):
                    a.merge(c)
        # null group keys bypass the code path
        null_rows = np.nonzero(active & gnulls)[0]
        if null_rows.size:
            cols = [reader.decode_block_column(c, b)
                    for c in range(len(schema.columns))]
            for r in null_rows:
                row_update(tuple(col[int(r)] for col in cols))
    return _group_result(table, aggs, fallback), stats


def _group_result(table: dict, aggs: Sequence[AggSpec],
                  fallback: bool) -> GroupByResult:
    groups = {key: [acc.result() for acc in accs] for key, accs in table.items()}
    return GroupByResult(groups=groups, fallback=fallback)


# -- row-format baseline path ----------------------------------------------------


def row_scan_baseline(tablet: Tablet, plan: ScanPlan):
    """Same logical results via the row-format baseline, no sketches.

    Returns rows, an aggregate dict, or a GroupByResult depending on the
    plan, paired with its (blockless) ScanStats.
    """
    schema = tablet.schema
    validate_plan(schema, plan)
    if schema.store_mode is StoreMode.COLUMN:
        raise FormatUnavailable("table keeps no row-format baseline")
    baseline = plan.snapshot.state.baseline
    if baseline is not None and baseline.row_path is None:
        raise FormatUnavailable("baseline has no row-format file")
    stats = ScanStats()
    if plan.aggs and plan.group_by:
        table: dict = {}
        aggs = plan.aggs
        _check_agg_types(schema, aggs)
        gi = schema.column_index(plan.group_by)
        for row in tablet.merge_rows(plan.snapshot, baseline_format="row"):
            if not _passes(schema, plan, row.values):
                continue
            accs = table.get(row.values[gi])
            if accs is None:
                accs = [Accumulator(s.function) for s in aggs]
                table[row.values[gi]] = accs
            _row_agg_update(schema, aggs, accs, row.values)
        return _group_result(table, aggs, fallback=True), stats
    if plan.aggs:
        aggs = plan.aggs
        _check_agg_types(schema, aggs)
        accs = [Accumulator(s.function) for s in aggs]
        for row in tablet.merge_rows(plan.snapshot, baseline_format="row"):
            if _passes(schema, plan, row.values):
                _row_agg_update(schema, aggs, accs, row.values)
        return _agg_results(aggs, accs), stats
    return _row_path_scan(tablet, plan, stats, baseline_format="row"), stats


def _row_agg_update(schema: TableSchema, aggs: Sequence[AggSpec],
                    accs: Sequence[Accumulator], values: tuple) -> None:
    for spec, acc in zip(aggs, accs):
        if spec.function is AggFunc.COUNT_STAR:
            acc.update_value(None)
        else:
            acc.update_value(values[schema.column_index(spec.column)])


# -- executor-level (no pushdown) path ---------------------------------------------


def execute_no_pushdown(tablet: Tablet, plan: ScanPlan):
    """Materialize the merge-on-read stream into batches and run the vector
    kernels above storage: the reference executor path with no sketch or
    encoding shortcuts."""
    schema = tablet.schema
    validate_plan(schema, plan)
    stats = ScanStats()
    rows = list(tablet.merge_rows(plan.snapshot))
    aggs = plan.aggs or []
    if aggs:
        _check_agg_types(schema, aggs)
    group_table: dict = {}
    accs = [Accumulator(s.function) for s in aggs]
    out_rows: list[tuple] = []
    proj_idx = ([schema.column_index(c) for c in plan.projection]
                if plan.projection is not None else None)

    for start in range(0, len(rows), BATCH_ROWS):
        chunk = rows[start : start + BATCH_ROWS]
        n = len(chunk)
        batches = {
            col.name: ColumnBatch.from_values(
                col.type, [r.values[i] for r in chunk])
            for i, col in enumerate(schema.columns)
        }
        flags = BatchFlags.for_batches(list(batches.values()))
        for pred in plan.predicates:
            bits = bitmap.pack(vectors.compare(batches[pred.column], pred))
            flags = apply_filter(list(batches.values()), flags, bits)
        if plan.residual is not None:
            mask = flags.active_mask(n)
            for r in range(n):
                if mask[r] and not plan.residual(chunk[r].values):
                    mask[r] = False
            flags = BatchFlags(has_null=flags.has_null, all_active=False,
                               selection=bitmap.pack(mask))

        if plan.group_by and aggs:
            inputs = [AggInput(s.function,
                               None if s.function is AggFunc.COUNT_STAR
                               else batches[s.column]) for s in aggs]
            part = vectors.hash_group_by([batches[plan.group_by]], inputs, flags)
            for (value,), accs_part in part.items():
                mine = group_table.get(value)
                if mine is None:
                    group_table[value] = accs_part
                else:
                    for a, c in zip(mine, accs_part):
                        a.merge(c)
        elif aggs:
            for spec, acc in zip(aggs, accs):
                if spec.function is AggFunc.COUNT_STAR:
                    vectors.aggregate(None, flags, spec.function, acc,
                                      row_count=n)
                else:
                    vectors.aggregate(batches[spec.column], flags,
                                      spec.function, acc)
        else:
            mask = flags.active_mask(n)
            for r in range(n):
                if mask[r]:
                    values = chunk[r].values
                    out_rows.append(values if proj_idx is None
                                    else tuple(values[i] for i in proj_idx))

    if plan.group_by and aggs:
        return _group_result(group_table, aggs, fallback=True), stats
    if aggs:
        return _agg_results(aggs, accs), stats
    return out_rows, stats
