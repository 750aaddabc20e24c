"""The embedded database: one directory, one writer, snapshot readers.

Wires the catalog, per-table tablets, mlogs, and materialized views
together and owns every mutating operation.  Layout under the data dir:

  catalog/<name>.json     table / view definitions
  tables/<name>/          manifest + SSTable files
  mlog/<table>.jsonl      change log
  mv/<name>.json          view runtime state (container pointer, cursor)
  .lock                   writer lock, pid inside
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from . import keys, mview, scan
from .catalog import Catalog, MViewDef, RefreshPolicy, TableSchema
from .errors import (
    DependentMViewExists,
    DuplicateKey,
    DuplicateName,
    LockHeld,
    MissingMlog,
    MlogGap,
    ParseError,
    SchemaMismatch,
    UnknownBaseTable,
    UnknownMView,
    Unsupported,
)
from .mview import MLog, MViewState, _SpecState, container_schema
from .scan import ScanPlan, ScanStats
from .storage import (
    DEFAULT_MEMTABLE_BYTES,
    Delete,
    DmlOp,
    Insert,
    Snapshot,
    Tablet,
    Update,
)
from .types import ColumnType


@dataclass
class QueryResult:
    columns: list[str]
    rows: list[tuple]
    stats: Optional[ScanStats]


class Database:
    def __init__(self, data_dir: str | Path, *,
                 memtable_bytes: int = DEFAULT_MEMTABLE_BYTES,
                 block_rows: int | None = None,
                 auto_freeze: bool = True,
                 use_lock: bool = True):
        self.data_dir = Path(data_dir)
        for sub in ("catalog", "tables", "mlog", "mv"):
            (self.data_dir / sub).mkdir(parents=True, exist_ok=True)
        self.memtable_bytes = memtable_bytes
        self.block_rows = block_rows
        self.auto_freeze = auto_freeze
        self._lock_path = self.data_dir / ".lock" if use_lock else None
        self._acquire_lock()
        self.catalog = Catalog(self.data_dir / "catalog")
        self.tablets: dict[str, Tablet] = {}
        self.mlogs: dict[str, MLog] = {}
        self.mviews: dict[str, MViewState] = {}
        for name in self.catalog.tables:
            self._open_tablet(name)
        for path in sorted((self.data_dir / "mv").glob("*.json")):
            state = MViewState.from_json(json.loads(path.read_text()))
            self.mviews[state.name] = state
        self._closed = False

    # -- lifecycle -------------------------------------------------------------

    def _acquire_lock(self) -> None:
        if self._lock_path is None:
            return
        try:
            fd = os.open(self._lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            pid = self._lock_path.read_text().strip()
            if pid.isdigit() and _pid_alive(int(pid)):
                raise LockHeld(f"data dir locked by pid {pid}") from None
            self._lock_path.unlink()  # stale lock from a dead process
            fd = os.open(self._lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)

    def close(self) -> None:
        if self._closed:
            return
        for tablet in self.tablets.values():
            tablet.flush()
        for mlog in self.mlogs.values():
            mlog.flush()
        for state in self.mviews.values():
            self._persist_mv_state(state)
        if self._lock_path is not None and self._lock_path.exists():
            self._lock_path.unlink()
        self._closed = True

    def __enter__(self) -> "Database":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _open_tablet(self, name: str) -> Tablet:
        tablet = self.tablets.get(name)
        if tablet is None:
            tablet = Tablet(self.catalog.tables[name],
                            self.data_dir / "tables" / name,
                            memtable_bytes=self.memtable_bytes,
                            block_rows=self.block_rows)
            self.tablets[name] = tablet
            if tablet.mlog_enabled:
                self._mlog_for(name)
        return tablet

    def _mlog_for(self, table: str) -> MLog:
        mlog = self.mlogs.get(table)
        if mlog is None:
            mlog = MLog(self.data_dir / "mlog" / f"{table}.jsonl")
            self.mlogs[table] = mlog
        return mlog

    def _persist_mv_state(self, state: MViewState) -> None:
        path = self.data_dir / "mv" / f"{state.name}.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(state.to_json(), indent=2))
        tmp.replace(path)

    # -- catalog operations ------------------------------------------------------

    def create_table(self, schema: TableSchema, *, internal: bool = False) -> Tablet:
        schema.validate(internal=internal)
        if self.catalog.has_name(schema.name):
            raise DuplicateName(f"{schema.name!r} already exists")
        self.catalog.put_table(schema)
        return self._open_tablet(schema.name)

    def drop_table(self, name: str) -> None:
        if name not in self.catalog.tables:
            raise UnknownBaseTable(name)
        dependents = [mv.name for mv in self.catalog.mviews_on(name)]
        if dependents:
            raise DependentMViewExists(
                f"{name!r} has dependent views: {', '.join(dependents)}")
        self.catalog.drop_table(name)
        self.tablets.pop(name, None)
        self.mlogs.pop(name, None)

    def enable_mlog(self, table: str) -> None:
        tablet = self._tablet(table)
        tablet.mlog_enabled = True  # idempotent by design
        self._mlog_for(table)

    def create_mview(self, mv: MViewDef) -> MViewState:
        base_schema = self.catalog.tables.get(mv.base_table)
        if base_schema is None:
            raise UnknownBaseTable(mv.base_table)
        mv.validate(base_schema)
        if self.catalog.has_name(mv.name):
            raise DuplicateName(f"{mv.name!r} already exists")
        if mv.refresh_policy is RefreshPolicy.INCREMENTAL:
            if not self._tablet(mv.base_table).mlog_enabled:
                raise MissingMlog(
                    f"incremental view needs an mlog on {mv.base_table!r}")
        self.catalog.put_mview(mv)
        state = MViewState(mv.name, container="", cursor=0, generation=0)
        self.mviews[mv.name] = state
        self._rebuild_container(mv, state)
        self._persist_mv_state(state)
        return state

    def _tablet(self, name: str) -> Tablet:
        tablet = self.tablets.get(name)
        if tablet is None:
            raise UnknownBaseTable(name)
        return tablet

    def _mview_def(self, name: str) -> MViewDef:
        mv = self.catalog.mviews.get(name)
        if mv is None:
            raise UnknownMView(name)
        return mv

    # -- DML ----------------------------------------------------------------------

    def apply_dml(self, table: str, op: DmlOp) -> int:
        tablet = self._tablet(table)
        version, events = tablet.apply_dml(op)
        if tablet.mlog_enabled:
            self._mlog_for(table).capture(events, version)
        if self.auto_freeze and tablet.memtable_should_freeze():
            tablet.minor_compact()
        return version

    def insert(self, table: str, values: Sequence) -> int:
        return self.apply_dml(table, Insert(tuple(values)))

    def update(self, table: str, pk: Sequence, assignments: dict) -> int:
        return self.apply_dml(table, Update(tuple(pk), assignments))

    def delete(self, table: str, pk: Sequence) -> int:
        return self.apply_dml(table, Delete(tuple(pk)))

    # -- storage admin ----------------------------------------------------------------

    def take_snapshot(self, table: str) -> Snapshot:
        return self._tablet(table).take_snapshot()

    def minor_compact(self, table: str) -> int:
        return self._tablet(table).minor_compact()

    def major_compact(self, table: str, block_rows: int | None = None) -> int:
        return self._tablet(table).major_compact(block_rows=block_rows)

    def table_stats(self, table: str) -> dict:
        tablet = self._tablet(table)
        state = tablet.state
        return {
            "table": table,
            "store_mode": tablet.schema.store_mode.value,
            "baseline_version": state.baseline_version,
            "latest_version": tablet.latest_version,
            "minor_sstables": len(state.minors),
            "memtable_rows": state.memtable.row_count,
            "memtable_bytes": state.memtable.byte_size,
            "baseline_rows": state.baseline.row_count if state.baseline else 0,
            "mlog_enabled": tablet.mlog_enabled,
            "mlog_entries": len(self.mlogs[table].entries)
            if table in self.mlogs else 0,
        }

    # -- CSV ingestion -------------------------------------------------------------------

    def ingest_csv(self, table: str, path: str | Path) -> int:
        """RFC-4180 CSV with a mandatory header matching the schema columns;
        empty fields are nulls for nullable columns."""
        tablet = self._tablet(table)
        schema = tablet.schema
        count = 0
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise SchemaMismatch("empty file: missing header (line 1)")
            if header != schema.column_names:
                raise SchemaMismatch(
                    f"header {header!r} does not match schema columns "
                    f"{schema.column_names!r} (line 1)")
            for lineno, fields in enumerate(reader, start=2):
                if len(fields) != len(schema.columns):
                    raise SchemaMismatch(
                        f"{len(fields)} fields, expected "
                        f"{len(schema.columns)} (line {lineno})")
                values = []
                for colno, (col, raw) in enumerate(zip(schema.columns, fields),
                                                   start=1):
                    if raw == "":
                        if not col.nullable:
                            raise ParseError(
                                f"empty value for non-nullable {col.name!r} "
                                f"(line {lineno}, column {colno})", 0)
                        values.append(None)
                        continue
                    try:
                        values.append(_parse_cell(col.type, raw))
                    except ValueError:
                        raise ParseError(
                            f"bad {col.type.value} literal {raw!r} "
                            f"(line {lineno}, column {colno})", 0) from None
                try:
                    self.insert(table, values)
                except DuplicateKey as exc:
                    raise DuplicateKey(f"{exc} (line {lineno})") from None
                count += 1
        return count

    # -- scans ------------------------------------------------------------------------------

    def plan(self, table: str, *, snapshot: Snapshot | None = None,
             projection: list[str] | None = None,
             predicates: list | None = None,
             residual=None, aggs: list | None = None,
             group_by: str | None = None) -> ScanPlan:
        self._tablet(table)
        return ScanPlan(
            table=table,
            snapshot=snapshot or self.take_snapshot(table),
            projection=projection,
            predicates=predicates or [],
            residual=residual,
            aggs=aggs,
            group_by=group_by,
        )

    def execute_scan(self, plan: ScanPlan):
        return scan.execute_scan(self._tablet(plan.table), plan)

    def execute_agg(self, plan: ScanPlan):
        return scan.execute_agg_pushdown(self._tablet(plan.table), plan)

    def execute_group_by(self, plan: ScanPlan):
        return scan.execute_groupby_pushdown(self._tablet(plan.table), plan)

    def execute_row_path(self, plan: ScanPlan):
        return scan.row_scan_baseline(self._tablet(plan.table), plan)

    def execute_no_pushdown(self, plan: ScanPlan):
        return scan.execute_no_pushdown(self._tablet(plan.table), plan)

    # -- materialized view operations ----------------------------------------------------------

    def _container_key(self, mv: MViewDef, base: TableSchema,
                       group_key: tuple) -> bytes:
        if mv.group_by:
            types = [base.column(g).type for g in mv.group_by]
            return keys.encode_tuple(types, group_key)
        return keys.encode_tuple([ColumnType.INT64], (0,))

    def _storage_row(self, mv: MViewDef, group_key: tuple,
                     states: Sequence[_SpecState], row_count: int) -> tuple:
        out: list = list(group_key) if mv.group_by else [0]
        for st in states:
            out.extend(st.storage_values())
        if mv.group_by:
            out.append(row_count)
        return tuple(out)

    def _split_stored(self, mv: MViewDef, values: tuple
                      ) -> tuple[tuple, list[_SpecState], int]:
        ngroup = len(mv.group_by) if mv.group_by else 1
        group_key = tuple(values[:ngroup]) if mv.group_by else ()
        pos = ngroup
        states = []
        for spec in mv.select_items:
            width = mview.storage_width(spec)
            states.append(_SpecState.from_storage(spec, values[pos:pos + width]))
            pos += width
        row_count = values[pos] if mv.group_by else states[0].count
        return group_key, states, row_count

    def _compute_container_rows(self, mv: MViewDef, base: TableSchema,
                                snapshot: Snapshot) -> list[tuple]:
        """Recompute the definition query; the full-refresh oracle path."""
        tablet = self._tablet(mv.base_table)
        group_idx = [base.column_index(g) for g in mv.group_by]
        spec_idx = [None if s.column is None else base.column_index(s.column)
                    for s in mv.select_items]
        groups: dict[tuple, tuple[list[_SpecState], int]] = {}
        for row in tablet.merge_rows(snapshot):
            key = tuple(row.values[i] for i in group_idx)
            entry = groups.get(key)
            if entry is None:
                entry = ([_SpecState(s) for s in mv.select_items], 0)
                groups[key] = entry
            states, n = entry
            for st, idx in zip(states, spec_idx):
                st.add(None if idx is None else row.values[idx])
            groups[key] = (states, n + 1)
        if not mv.group_by and not groups:
            groups[()] = ([_SpecState(s) for s in mv.select_items], 0)
        ordered = sorted(groups, key=lambda k: mview.group_sort_key(mv, base, k))
        return [self._storage_row(mv, key, groups[key][0], groups[key][1])
                for key in ordered]

    def _rebuild_container(self, mv: MViewDef, state: MViewState) -> dict:
        """Hidden-table full refresh: build, bulk load, swap."""
        t0 = time.perf_counter()
        base = self.catalog.tables[mv.base_table]
        tablet = self._tablet(mv.base_table)
        snapshot = tablet.take_snapshot()
        cap = 0
        if tablet.mlog_enabled:
            cap = self._mlog_for(mv.base_table).last_sequence_at(
                snapshot.read_version)
        rows = self._compute_container_rows(mv, base, snapshot)
        gen = state.generation + 1
        cname = f"__mv${mv.name}$g{gen}"
        cschema = container_schema(mv, base, cname)
        container = self.create_table(cschema, internal=True)
        container.bulk_load(rows)
        old = state.container
        state.container = cname
        state.generation = gen
        state.cursor = cap
        self._persist_mv_state(state)
        if old:
            # swap complete: retire the old container (files stay for pinned readers)
            self.catalog.drop_table(old)
            self.tablets.pop(old, None)
        return {
            "mv": mv.name,
            "mode": "full",
            "entries_processed": 0,
            "groups_touched": len(rows),
            "duration_ms": round((time.perf_counter() - t0) * 1000, 3),
        }

    def full_refresh(self, name: str) -> dict:
        mv = self._mview_def(name)
        return self._rebuild_container(mv, self.mviews[name])

    def incremental_refresh(self, name: str) -> dict:
        mv = self._mview_def(name)
        if mv.refresh_policy is not RefreshPolicy.INCREMENTAL:
            raise Unsupported(f"{name!r} is not an incremental view")
        t0 = time.perf_counter()
        state = self.mviews[name]
        base = self.catalog.tables[mv.base_table]
        base_tablet = self._tablet(mv.base_table)
        snapshot = base_tablet.take_snapshot()
        mlog = self._mlog_for(mv.base_table)
        entries = mlog.range(state.cursor, version_cap=snapshot.read_version)
        report = {
            "mv": name,
            "mode": "incremental",
            "entries_processed": len(entries),
            "groups_touched": 0,
        }
        if not entries:
            report["duration_ms"] = round((time.perf_counter() - t0) * 1000, 3)
            return report
        deltas = mview.compute_group_deltas(mv, base, entries)
        container = self._tablet(state.container)
        ordered = sorted(deltas, key=lambda k: mview.group_sort_key(mv, base, k))
        for key in ordered:
            self._apply_group_delta(mv, base, base_tablet, container, snapshot,
                                    key, deltas[key])
        if container.memtable_should_freeze():
            container.minor_compact()
        state.cursor = entries[-1].sequence
        self._persist_mv_state(state)
        report["groups_touched"] = len(deltas)
        report["duration_ms"] = round((time.perf_counter() - t0) * 1000, 3)
        return report

    def _group_base_rows(self, mv: MViewDef, base: TableSchema,
                         base_tablet: Tablet, snapshot: Snapshot,
                         group_key: tuple) -> list[tuple]:
        """Targeted rescan: the group's current base rows at the snapshot."""
        group_idx = [base.column_index(g) for g in mv.group_by]
        out = []
        for row in base_tablet.merge_rows(snapshot):
            if tuple(row.values[i] for i in group_idx) == group_key:
                out.append(row.values)
        return out

    def _apply_group_delta(self, mv: MViewDef, base: TableSchema,
                           base_tablet: Tablet, container: Tablet,
                           snapshot: Snapshot, key: tuple,
                           delta: mview.GroupDelta) -> None:
        ckey = self._container_key(mv, base, key)
        stored = container.visible_row(ckey)
        group_rows: list | None = None

        def rescan_for(spec):
            nonlocal group_rows
            if group_rows is None:
                group_rows = self._group_base_rows(mv, base, base_tablet,
                                                   snapshot, key)
            idx = base.column_index(spec.column)
            return [r[idx] for r in group_rows]

        if stored is None:
            old_states = [_SpecState(s) for s in mv.select_items]
            old_rows = 0
        else:
            _, old_states, old_rows = self._split_stored(mv, stored.values)
        new_rows = old_rows + delta.count_star_d
        new_states = [
            mview.apply_delta(st, delta.specs[st.spec.output_name],
                              rescan=(lambda s=st.spec: rescan_for(s)))
            for st in old_states
        ]
        if mv.group_by and new_rows <= 0:
            if stored is not None:
                container.apply_dml(Delete(self._group_pk(mv, key)))
            return
        row = self._storage_row(mv, key, new_states, new_rows)
        if stored is None:
            container.apply_dml(Insert(row))
        else:
            names = container.schema.column_names
            ngroup = len(mv.group_by) if mv.group_by else 1
            assignments = {names[i]: row[i] for i in range(ngroup, len(row))}
            container.apply_dml(Update(self._group_pk(mv, key), assignments))

    def _group_pk(self, mv: MViewDef, key: tuple) -> tuple:
        return key if mv.group_by else (0,)

    def refresh(self, name: str, mode: str | None = None) -> dict:
        mv = self._mview_def(name)
        if mode is None:
            mode = mv.refresh_policy.value
        if mode == "incremental":
            return self.incremental_refresh(name)
        if mode == "full":
            return self.full_refresh(name)
        raise Unsupported(f"refresh mode {mode!r}")

    def realtime_read(self, name: str,
                      snapshot: Snapshot | None = None) -> list[dict]:
        """Container state plus the unapplied mlog suffix, merged on the fly."""
        mv = self._mview_def(name)
        if mv.refresh_policy is not RefreshPolicy.INCREMENTAL:
            raise Unsupported(f"{name!r} is not an incremental view")
        state = self.mviews[name]
        base = self.catalog.tables[mv.base_table]
        base_tablet = self._tablet(mv.base_table)
        if snapshot is None:
            snapshot = base_tablet.take_snapshot()
        rv = snapshot.read_version
        mlog = self._mlog_for(mv.base_table)
        for e in mlog.entries:
            if e.sequence <= state.cursor and e.version > rv:
                raise MlogGap("snapshot predates the refresh cursor")
        entries = [e for e in mlog.entries
                   if e.sequence > state.cursor and e.version <= rv]
        deltas = mview.compute_group_deltas(mv, base, entries)

        container = self._tablet(state.container)
        csnap = container.take_snapshot()
        merged: dict[tuple, tuple[list[_SpecState], int]] = {}
        for row in container.merge_rows(csnap):
            key, states, rows = self._split_stored(mv, row.values)
            merged[key] = (states, rows)
        for key, delta in deltas.items():
            states, rows = merged.get(key, ([_SpecState(s)
                                             for s in mv.select_items], 0))

            def rescan_for(spec, k=key):
                rows_ = self._group_base_rows(mv, base, base_tablet, snapshot, k)
                idx = base.column_index(spec.column)
                return [r[idx] for r in rows_]

            new_states = [
                mview.apply_delta(st, delta.specs[st.spec.output_name],
                                  rescan=(lambda s=st.spec: rescan_for(s)))
                for st in states
            ]
            merged[key] = (new_states, rows + delta.count_star_d)

        out = []
        for key in sorted(merged, key=lambda k: mview.group_sort_key(mv, base, k)):
            states, rows = merged[key]
            if mv.group_by and rows <= 0:
                continue
            doc = dict(zip(mv.group_by, key))
            for spec, st in zip(mv.select_items, states):
                doc[spec.output_name] = st.result()
            out.append(doc)
        if not mv.group_by and not out:
            doc = {}
            for spec, st in zip(mv.select_items,
                                [_SpecState(s) for s in mv.select_items]):
                doc[spec.output_name] = st.result()
            out.append(doc)
        return out

    def read_mview(self, name: str) -> list[dict]:
        """Logical rows of the view: realtime merge for incremental views,
        container contents for full-policy views."""
        mv = self._mview_def(name)
        if mv.refresh_policy is RefreshPolicy.INCREMENTAL:
            return self.realtime_read(name)
        state = self.mviews[name]
        base = self.catalog.tables[mv.base_table]
        container = self._tablet(state.container)
        out = []
        for row in container.merge_rows(container.take_snapshot()):
            key, states, _rows = self._split_stored(mv, row.values)
            doc = dict(zip(mv.group_by, key))
            for spec, st in zip(mv.select_items, states):
                doc[spec.output_name] = st.result()
            out.append(doc)
        return out

    def purge_mlog(self, table: str) -> int:
        self._tablet(table)
        mlog = self._mlog_for(table)
        cursors = [self.mviews[mv.name].cursor
                   for mv in self.catalog.mviews_on(table)
                   if mv.refresh_policy is RefreshPolicy.INCREMENTAL]
        bound = min(cursors) if cursors else mlog.next_sequence - 1
        return mlog.purge(bound)

    def measure_refresh_cost(self, name: str,
                             workload: Sequence[DmlOp]) -> dict:
        """Apply a delta workload to the base table, refresh, report counters."""
        mv = self._mview_def(name)
        for op in workload:
            self.apply_dml(mv.base_table, op)
        report = self.incremental_refresh(name)
        container = self._tablet(self.mviews[name].container)
        rows = sum(1 for _ in container.merge_rows(container.take_snapshot()))
        return {
            "entries_processed": report["entries_processed"],
            "groups_touched": report["groups_touched"],
            "container_rows": rows,
        }


    # -- mini query language ---------------------------------------------------

    def run_query(self, text: str,
                  snapshot: Snapshot | None = None) -> "QueryResult":
        from . import minisql

        q = minisql.parse(text)
        if q.table in self.catalog.mviews:
            return self._query_mview(q)
        if q.table not in self.catalog.tables:
            raise UnknownBaseTable(q.table)
        schema = self.catalog.tables[q.table]
        agg_items = [it for it in q.items if it.func is not None]
        plain_items = [it for it in q.items if it.func is None]

        if agg_items and q.group_by is None:
            if plain_items:
                raise ParseError(
                    "non-aggregated column in an aggregate query", 0)
            specs = [_agg_spec(it) for it in agg_items]
            plan = self.plan(q.table, snapshot=snapshot, predicates=q.where,
                             aggs=specs)
            result, stats = self.execute_agg(plan)
            row = tuple(result[it.display] for it in agg_items)
            return QueryResult([it.display for it in agg_items], [row], stats)

        if q.group_by is not None:
            if not agg_items:
                raise ParseError("GROUP BY needs at least one aggregate", 0)
            for it in plain_items:
                if it.column != q.group_by:
                    raise ParseError(
                        f"column {it.column!r} not in GROUP BY", 0)
            specs = [_agg_spec(it) for it in agg_items]
            plan = self.plan(q.table, snapshot=snapshot, predicates=q.where,
                             aggs=specs, group_by=q.group_by)
            result, stats = self.execute_group_by(plan)
            gtype = schema.column(q.group_by).type
            ordered = sorted(result.groups,
                             key=lambda v: keys.encode_value(gtype, v))
            rows = []
            for gval in ordered:
                by_name = dict(zip((s.output_name for s in specs),
                                   result.groups[gval]))
                row = tuple(gval if it.func is None else by_name[it.display]
                            for it in q.items)
                rows.append(row)
            return QueryResult([it.display for it in q.items], rows, stats)

        projection = [it.column for it in plain_items]
        plan = self.plan(q.table, snapshot=snapshot, predicates=q.where,
                         projection=projection)
        rows, stats = self.execute_scan(plan)
        return QueryResult(projection, rows, stats)

    def _query_mview(self, q) -> "QueryResult":
        if q.where or q.group_by:
            raise Unsupported("WHERE/GROUP BY over a materialized view")
        docs = self.read_mview(q.table)
        # an agg-shaped item like count(c1) names the view's output column
        names = [it.display for it in q.items]
        for name in names:
            if docs and name not in docs[0]:
                raise UnknownMView(f"no column {name!r} in view {q.table!r}")
        rows = [tuple(doc.get(n) for n in names) for doc in docs]
        return QueryResult(names, rows, None)


def _agg_spec(item):
    from .catalog import AggSpec

    return AggSpec(item.func, item.column, item.display)


def _parse_cell(col_type: ColumnType, raw: str):
    if col_type is ColumnType.INT64:
        return int(raw)
    if col_type is ColumnType.FLOAT64:
        return float(raw)
    return raw


def _pid_alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    return True
