"""LSM-style tablet storage.

A tablet holds one table's data as three layers: a row-format in-memory
MemTable, a list of immutable row-format minor SSTables, and an optional
columnar (and/or row) baseline produced by major compaction.  Everything
newer than the baseline version lives in the upper layers in full-row
images; queries overlay them on the baseline at read time and deduplicate
per primary key (latest commit version wins, tombstones suppress).

TabletState objects are never mutated after being replaced, apart from
append-only MemTable writes whose versions exceed every pinned snapshot, so
a Snapshot pins (read_version, state) and stays stable across DML and
compaction.
"""

from __future__ import annotations

import heapq
import itertools
import json
from bisect import bisect_left, bisect_right, insort
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterator, Mapping, Optional, Sequence

from . import keys, sstable
from .catalog import StoreMode, TableSchema
from .errors import (
    DuplicateKey,
    EmptyMemtable,
    InvalidSchema,
    KeyNotFound,
    NothingToCompact,
    TypeMismatch,
)
from .sstable import ColumnFileReader, Record
from .types import coerce_value

DEFAULT_MEMTABLE_BYTES = 4 * 1024 * 1024  # freeze threshold, overridable
DEFAULT_COLUMNS_PER_TASK = 4


# -- DML operations ----------------------------------------------------------


@dataclass(frozen=True)
class Insert:
    values: tuple


@dataclass(frozen=True)
class Update:
    pk: tuple
    assignments: Mapping[str, object]


@dataclass(frozen=True)
class Delete:
    pk: tuple


DmlOp = Insert | Update | Delete


@dataclass(frozen=True)
class Row:
    key: bytes
    pk: tuple
    values: tuple  # non-pk positions are None on tombstones
    version: int
    tombstone: bool = False


class MemTable:
    """pk-ordered multi-version map; per-pk versions strictly ascending."""

    def __init__(self):
        self.entries: dict[bytes, list[Row]] = {}
        self._keys: list[bytes] = []
        self.byte_size = 0

    def __len__(self) -> int:
        return sum(len(v) for v in self.entries.values())

    @property
    def row_count(self) -> int:
        return len(self)

    def add(self, row: Row) -> None:
        bucket = self.entries.get(row.key)
        if bucket is None:
            self.entries[row.key] = [row]
            insort(self._keys, row.key)
        else:
            bucket.append(row)
        self.byte_size += 40 + len(row.key) + sum(
            8 if not isinstance(v, str) else len(v) + 16
            for v in row.values if v is not None)

    def ordered_keys(self, lo: bytes | None = None,
                     hi: bytes | None = None) -> list[bytes]:
        start = bisect_left(self._keys, lo) if lo is not None else 0
        end = bisect_right(self._keys, hi) if hi is not None else len(self._keys)
        return self._keys[start:end]

    def latest_visible(self, key: bytes, read_version: int) -> Optional[Row]:
        bucket = self.entries.get(key)
        if not bucket:
            return None
        for row in reversed(bucket):
            if row.version <= read_version:
                return row
        return None


@dataclass(frozen=True)
class SSTableMeta:
    id: int
    level: str            # "minor" | "major"
    format: str           # "row" | "column"
    min_version: int
    max_version: int
    min_key: Optional[bytes]
    max_key: Optional[bytes]

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "level": self.level,
            "format": self.format,
            "min_version": self.min_version,
            "max_version": self.max_version,
            "min_key": self.min_key.hex() if self.min_key is not None else None,
            "max_key": self.max_key.hex() if self.max_key is not None else None,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SSTableMeta":
        return cls(
            id=doc["id"], level=doc["level"], format=doc["format"],
            min_version=doc["min_version"], max_version=doc["max_version"],
            min_key=bytes.fromhex(doc["min_key"]) if doc["min_key"] else None,
            max_key=bytes.fromhex(doc["max_key"]) if doc["max_key"] else None,
        )


class MinorSSTable:
    """Immutable row-format run holding every version it was frozen with."""

    def __init__(self, meta: SSTableMeta, path: Path, schema: TableSchema,
                 rows: dict[bytes, list[Row]] | None = None):
        self.meta = meta
        self.path = path
        self.schema = schema
        self._rows = rows
        self._keys = sorted(rows) if rows is not None else None

    def _load(self) -> None:
        if self._rows is not None:
            return
        rows: dict[bytes, list[Row]] = {}
        for rec in sstable.read_row_file(self.path, self.schema):
            pk = self.schema.pk_of(rec.values)
            key = keys.encode_tuple(self.schema.pk_types, pk)
            rows.setdefault(key, []).append(
                Row(key, pk, rec.values, rec.version, rec.tombstone))
        self._rows = rows
        self._keys = sorted(rows)

    def ordered_keys(self, lo=None, hi=None) -> list[bytes]:
        self._load()
        start = bisect_left(self._keys, lo) if lo is not None else 0
        end = bisect_right(self._keys, hi) if hi is not None else len(self._keys)
        return self._keys[start:end]

    def latest_visible(self, key: bytes, read_version: int) -> Optional[Row]:
        if read_version < self.meta.min_version:
            return None
        self._load()
        bucket = self._rows.get(key)
        if not bucket:
            return None
        for row in reversed(bucket):
            if row.version <= read_version:
                return row
        return None


class Baseline:
    """The immutable bottom layer written by one major compaction."""

    def __init__(self, version: int, schema: TableSchema,
                 col_path: Path | None, row_path: Path | None,
                 block_keys: list[tuple[bytes, bytes]] | None = None):
        self.version = version
        self.schema = schema
        self.col_path = col_path
        self.row_path = row_path
        self._block_keys = block_keys
        self._col_reader: ColumnFileReader | None = None
        self._row_records: list[Record] | None = None
        self._pk_index: dict[bytes, tuple] | None = None
        self._trees: dict[str, object] = {}

    @property
    def col_reader(self) -> ColumnFileReader | None:
        if self.col_path is None:
            return None
        if self._col_reader is None:
            self._col_reader = ColumnFileReader(self.col_path, self.schema)
        return self._col_reader

    def row_records(self) -> list[Record]:
        if self._row_records is None:
            if self.row_path is not None:
                self._row_records = sstable.read_row_file(self.row_path, self.schema)
            else:
                self._row_records = [Record(values, 0, False)
                                     for values in self.col_reader.iter_rows()]
        return self._row_records

    def iter_rows(self, fmt: str | None = None) -> Iterator[Row]:
        """Pk-ordered rows; `fmt` forces the "row" or "column" file."""
        pk_types = self.schema.pk_types
        pk_of = self.schema.pk_of
        use_col = (self.col_path is not None) if fmt is None else fmt == "column"
        if use_col:
            for values in self.col_reader.iter_rows():
                pk = pk_of(values)
                yield Row(keys.encode_tuple(pk_types, pk), pk, values, 0)
        else:
            for rec in self.row_records():
                pk = pk_of(rec.values)
                yield Row(keys.encode_tuple(pk_types, pk), pk, rec.values, 0)

    def visible_row(self, key: bytes) -> Optional[Row]:
        if self._pk_index is None:
            self._pk_index = {row.key: row.values for row in self.iter_rows()}
        values = self._pk_index.get(key)
        if values is None:
            return None
        return Row(key, self.schema.pk_of(values), values, 0)

    @property
    def row_count(self) -> int:
        if self.col_path is not None:
            return self.col_reader.row_count
        return len(self.row_records())

    def block_key_ranges(self) -> list[tuple[bytes, bytes]]:
        """(first, last) pk key per columnar block, for dirtiness checks."""
        if self._block_keys is None:
            reader = self.col_reader
            pk_types = self.schema.pk_types
            pk_cols = self.schema.pk_indexes
            ranges = []
            for b in range(reader.block_count):
                cols = [reader.decode_block_column(c, b) for c in pk_cols]
                first = keys.encode_tuple(pk_types, tuple(c[0] for c in cols))
                last = keys.encode_tuple(pk_types, tuple(c[-1] for c in cols))
                ranges.append((first, last))
            self._block_keys = ranges
        return self._block_keys

    def index_tree(self, column: str):
        """Cached block-index tree over one column's block sketches."""
        from .skipindex import IndexTree

        tree = self._trees.get(column)
        if tree is None:
            ci = self.schema.column_index(column)
            sketches = [e.sketch for e in self.col_reader.directories[ci]]
            tree = IndexTree(self.schema.columns[ci].type, sketches)
            self._trees[column] = tree
        return tree


@dataclass(frozen=True)
class TabletState:
    baseline: Optional[Baseline]
    minors: tuple[MinorSSTable, ...]
    memtable: MemTable
    baseline_version: int


@dataclass(frozen=True)
class Snapshot:
    read_version: int
    state: TabletState


def vertical_split_plan(columns: Sequence[str], budget: int) -> list[list[str]]:
    """Partition the column list, in order, into groups of at most `budget`."""
    if budget < 1:
        raise InvalidSchema("budget must be at least 1")
    cols = list(columns)
    return [cols[i : i + budget] for i in range(0, len(cols), budget)]


class Tablet:
    """Single-writer state machine for one table's storage."""

    def __init__(self, schema: TableSchema, directory: Path,
                 memtable_bytes: int = DEFAULT_MEMTABLE_BYTES,
                 block_rows: int | None = None):
        self.schema = schema
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.memtable_bytes = memtable_bytes
        self.block_rows = block_rows
        self.next_version = 1
        self.next_sstable_id = 1
        self.mlog_enabled = False
        self.state = TabletState(None, (), MemTable(), 0)
        self._load_manifest()

    # -- manifest persistence -------------------------------------------------

    @property
    def _manifest_path(self) -> Path:
        return self.directory / "manifest.json"

    def _load_manifest(self) -> None:
        if not self._manifest_path.exists():
            return
        doc = json.loads(self._manifest_path.read_text())
        self.next_version = doc["next_version"]
        self.next_sstable_id = doc["next_sstable_id"]
        self.mlog_enabled = doc["mlog_enabled"]
        if doc.get("block_rows"):
            self.block_rows = doc["block_rows"]
        baseline = None
        if doc["baseline"]:
            b = doc["baseline"]
            block_keys = None
            if b.get("block_keys") is not None:
                block_keys = [(bytes.fromhex(lo), bytes.fromhex(hi))
                              for lo, hi in b["block_keys"]]
            baseline = Baseline(
                b["version"], self.schema,
                self.directory / b["col_file"] if b["col_file"] else None,
                self.directory / b["row_file"] if b["row_file"] else None,
                block_keys=block_keys,
            )
        minors = tuple(
            MinorSSTable(SSTableMeta.from_json(m), self.directory / m["file"],
                         self.schema)
            for m in doc["minors"]
        )
        self.state = TabletState(baseline, minors, MemTable(),
                                 doc["baseline_version"])

    def write_manifest(self) -> None:
        baseline = self.state.baseline
        doc = {
            "next_version": self.next_version,
            "next_sstable_id": self.next_sstable_id,
            "mlog_enabled": self.mlog_enabled,
            "block_rows": self.block_rows,
            "baseline_version": self.state.baseline_version,
            "baseline": {
                "version": baseline.version,
                "col_file": baseline.col_path.name if baseline.col_path else None,
                "row_file": baseline.row_path.name if baseline.row_path else None,
                "block_keys": (
                    [[lo.hex(), hi.hex()] for lo, hi in baseline._block_keys]
                    if baseline._block_keys is not None else None),
            } if baseline else None,
            "minors": [
                dict(m.meta.to_json(), file=m.path.name) for m in self.state.minors
            ],
        }
        tmp = self._manifest_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc, indent=2))
        tmp.replace(self._manifest_path)

    # -- keys and visibility --------------------------------------------------

    def pk_key(self, pk: tuple) -> bytes:
        return keys.encode_tuple(self.schema.pk_types, pk)

    @property
    def latest_version(self) -> int:
        return self.next_version - 1

    def visible_row(self, key: bytes, read_version: int | None = None,
                    state: TabletState | None = None) -> Optional[Row]:
        """Newest non-shadowed row for one key; None if absent or deleted."""
        state = state or self.state
        rv = self.latest_version if read_version is None else read_version
        best: Optional[Row] = None
        row = state.memtable.latest_visible(key, rv)
        if row is not None:
            best = row
        if best is None:
            for minor in reversed(state.minors):
                row = minor.latest_visible(key, rv)
                if row is not None:
                    best = row
                    break
        if best is None and state.baseline is not None:
            best = state.baseline.visible_row(key)
        if best is None or best.tombstone:
            return None
        return best

    # -- DML -------------------------------------------------------------------

    def _coerce_full(self, values: Sequence) -> tuple:
        cols = self.schema.columns
        if len(values) != len(cols):
            raise TypeMismatch(
                f"expected {len(cols)} values, got {len(values)}")
        out = []
        for col, v in zip(cols, values):
            cv = coerce_value(col.type, v)
            if cv is None and not col.nullable:
                raise TypeMismatch(f"null in non-nullable column {col.name!r}")
            out.append(cv)
        return tuple(out)

    def _coerce_pk(self, pk: Sequence) -> tuple:
        pk_cols = [self.schema.column(k) for k in self.schema.pk]
        if len(pk) != len(pk_cols):
            raise TypeMismatch(f"expected {len(pk_cols)} pk values")
        return tuple(coerce_value(c.type, v) for c, v in zip(pk_cols, pk))

    def apply_dml(self, op: DmlOp) -> tuple[int, list[tuple]]:
        """Apply one mutation; returns (commit version, change events).

        Events are ("insert", new_row), ("update", old_row, new_row) or
        ("delete", old_row) and feed mlog capture.
        """
        mem = self.state.memtable
        if isinstance(op, Insert):
            values = self._coerce_full(op.values)
            pk = self.schema.pk_of(values)
            key = self.pk_key(pk)
            if self.visible_row(key) is not None:
                raise DuplicateKey(f"pk {pk!r} already present")
            version = self.next_version
            self.next_version += 1
            row = Row(key, pk, values, version)
            mem.add(row)
            return version, [("insert", row)]

        if isinstance(op, Delete):
            pk = self._coerce_pk(op.pk)
            key = self.pk_key(pk)
            old = self.visible_row(key)
            if old is None:
                raise KeyNotFound(f"pk {pk!r} not present")
            version = self.next_version
            self.next_version += 1
            tomb = Row(key, pk, self._tombstone_values(pk), version,
                       tombstone=True)
            mem.add(tomb)
            return version, [("delete", old)]

        pk = self._coerce_pk(op.pk)
        key = self.pk_key(pk)
        old = self.visible_row(key)
        if old is None:
            raise KeyNotFound(f"pk {pk!r} not present")
        new_values = list(old.values)
        for name, v in op.assignments.items():
            try:
                idx = self.schema.column_index(name)
            except KeyError:
                raise TypeMismatch(f"unknown column {name!r}") from None
            col = self.schema.columns[idx]
            cv = coerce_value(col.type, v)
            if cv is None and not col.nullable:
                raise TypeMismatch(f"null in non-nullable column {name!r}")
            new_values[idx] = cv
        new_values = tuple(new_values)
        new_pk = self.schema.pk_of(new_values)
        new_key = self.pk_key(new_pk)
        if new_key != key and self.visible_row(new_key) is not None:
            raise DuplicateKey(f"pk {new_pk!r} already present")
        version = self.next_version
        self.next_version += 1
        new_row = Row(new_key, new_pk, new_values, version)
        if new_key != key:
            # pk-changing update: retire the old image, write the new one
            mem.add(Row(key, pk, self._tombstone_values(pk), version,
                        tombstone=True))
        mem.add(new_row)
        return version, [("update", old, new_row)]

    def _tombstone_values(self, pk: tuple) -> tuple:
        values = [None] * len(self.schema.columns)
        for i, idx in enumerate(self.schema.pk_indexes):
            values[idx] = pk[i]
        return tuple(values)

    def memtable_should_freeze(self) -> bool:
        return self.state.memtable.byte_size >= self.memtable_bytes

    # -- snapshots and scans ----------------------------------------------------

    def take_snapshot(self) -> Snapshot:
        return Snapshot(self.latest_version, self.state)

    def incremental_keys(self, snapshot: Snapshot) -> list[bytes]:
        """Sorted pk keys with at least one incremental row visible at the
        snapshot; these define block dirtiness."""
        rv = snapshot.read_version
        state = snapshot.state
        out: set[bytes] = set()
        for key, bucket in state.memtable.entries.items():
            if bucket and bucket[0].version <= rv:
                out.add(key)
        for minor in state.minors:
            if minor.meta.min_version > rv:
                continue
            if minor.meta.max_version <= rv:
                out.update(minor.ordered_keys())
                continue
            for key in minor.ordered_keys():
                if minor.latest_visible(key, rv) is not None:
                    out.add(key)
        return sorted(out)

    def _source_iters(self, state: TabletState, rv: int,
                      lo: bytes | None, hi: bytes | None,
                      baseline_format: str | None = None):
        def mem_iter():
            mem = state.memtable
            for key in mem.ordered_keys(lo, hi):
                row = mem.latest_visible(key, rv)
                if row is not None:
                    yield key, row

        iters = [mem_iter()]
        for minor in state.minors:
            if minor.meta.min_version > rv:
                continue

            def minor_iter(m=minor):
                for key in m.ordered_keys(lo, hi):
                    row = m.latest_visible(key, rv)
                    if row is not None:
                        yield key, row

            iters.append(minor_iter())
        if state.baseline is not None:

            def base_iter():
                for row in state.baseline.iter_rows(fmt=baseline_format):
                    if lo is not None and row.key < lo:
                        continue
                    if hi is not None and row.key > hi:
                        break
                    yield row.key, row

            iters.append(base_iter())
        return iters

    def merge_scan(
        self,
        snapshot: Snapshot,
        pk_range: tuple[bytes | None, bytes | None] | None = None,
        projection: Sequence[str] | None = None,
    ) -> Iterator[tuple]:
        """Exactly one visible image per pk in range, in pk order."""
        lo, hi = pk_range if pk_range is not None else (None, None)
        proj = ([self.schema.column_index(c) for c in projection]
                if projection is not None else None)
        for row in self.merge_rows(snapshot, lo, hi):
            if proj is None:
                yield row.values
            else:
                yield tuple(row.values[i] for i in proj)

    def merge_rows(self, snapshot: Snapshot, lo: bytes | None = None,
                   hi: bytes | None = None,
                   baseline_format: str | None = None) -> Iterator[Row]:
        rv = snapshot.read_version
        iters = self._source_iters(snapshot.state, rv, lo, hi, baseline_format)
        merged = heapq.merge(*iters, key=lambda kr: kr[0])
        for _key, group in itertools.groupby(merged, key=lambda kr: kr[0]):
            best = None
            for _, row in group:
                if best is None or row.version > best.version:
                    best = row
            if not best.tombstone:
                yield best

    # -- compaction ---------------------------------------------------------------

    def _alloc_sstable(self, suffix: str) -> tuple[int, Path]:
        sid = self.next_sstable_id
        self.next_sstable_id += 1
        return sid, self.directory / f"sst_{sid:06d}.{suffix}"

    def minor_compact(self) -> int:
        """Freeze the memtable into one row-format minor SSTable."""
        mem = self.state.memtable
        if not mem.entries:
            raise EmptyMemtable("memtable is empty")
        records = []
        versions = []
        for key in mem.ordered_keys():
            for row in mem.entries[key]:
                records.append(Record(row.values, row.version, row.tombstone))
                versions.append(row.version)
        sid, path = self._alloc_sstable("row")
        sstable.write_row_file(path, self.schema, records)
        all_keys = mem.ordered_keys()
        meta = SSTableMeta(sid, "minor", "row", min(versions), max(versions),
                           all_keys[0], all_keys[-1])
        minor = MinorSSTable(meta, path, self.schema, rows=dict(mem.entries))
        self.state = replace(self.state, minors=self.state.minors + (minor,),
                             memtable=MemTable())
        return sid

    def major_compact(self, columns_per_task: int = DEFAULT_COLUMNS_PER_TASK,
                      block_rows: int | None = None) -> int:
        """Rewrite baseline + increments as fresh per-column segments.

        The merged result is deduplicated at the latest version, tombstoned
        pks dropped, and the state swap leaves pinned snapshots on the old
        generation.
        """
        state = self.state
        if not state.minors and not state.memtable.entries:
            raise NothingToCompact("no incremental data beyond the baseline")
        snapshot = self.take_snapshot()
        merged = list(self.merge_rows(snapshot))
        rows = [row.values for row in merged]
        new_version = snapshot.read_version
        if block_rows is None:
            block_rows = self.block_rows

        col_path = row_path = None
        block_keys = None
        mode = self.schema.store_mode
        columns = [[r[i] for r in rows] for i in range(len(self.schema.columns))]
        if mode in (StoreMode.COLUMN, StoreMode.REDUNDANT):
            _sid, col_path = self._alloc_sstable("col")
            groups = vertical_split_plan(self.schema.column_names,
                                         columns_per_task)
            effective = block_rows or sstable.default_block_rows(self.schema,
                                                                 columns)
            sstable.write_column_file(col_path, self.schema, columns,
                                      block_rows=effective,
                                      column_groups=groups)
            block_keys = [
                (merged[i].key, merged[min(i + effective, len(merged)) - 1].key)
                for i in range(0, len(merged), effective)
            ]
        if mode in (StoreMode.ROW, StoreMode.REDUNDANT):
            _sid, row_path = self._alloc_sstable("mrow")
            sstable.write_row_file(row_path, self.schema,
                                   [Record(v, 0, False) for v in rows])

        baseline = Baseline(new_version, self.schema, col_path, row_path,
                            block_keys=block_keys)
        self.state = TabletState(baseline, (), MemTable(), new_version)
        return new_version

    def bulk_load(self, rows: Sequence[tuple],
                  block_rows: int | None = None) -> int:
        """Direct load of a fresh tablet: write baseline files without
        per-row DML.  Rows may arrive unsorted; pk order is established here.
        """
        state = self.state
        if state.baseline is not None or state.minors or state.memtable.entries:
            raise NothingToCompact("bulk load needs an empty tablet")
        pk_types = self.schema.pk_types
        keyed = sorted(
            (keys.encode_tuple(pk_types, self.schema.pk_of(v)), v) for v in rows)
        ordered = [v for _, v in keyed]
        version = self.next_version
        self.next_version += 1
        if block_rows is None:
            block_rows = self.block_rows

        col_path = row_path = None
        block_keys = None
        mode = self.schema.store_mode
        columns = [[r[i] for r in ordered]
                   for i in range(len(self.schema.columns))]
        if mode in (StoreMode.COLUMN, StoreMode.REDUNDANT):
            _sid, col_path = self._alloc_sstable("col")
            effective = block_rows or sstable.default_block_rows(self.schema,
                                                                 columns)
            sstable.write_column_file(col_path, self.schema, columns,
                                      block_rows=effective)
            block_keys = [
                (keyed[i][0], keyed[min(i + effective, len(keyed)) - 1][0])
                for i in range(0, len(keyed), effective)
            ]
        if mode in (StoreMode.ROW, StoreMode.REDUNDANT):
            _sid, row_path = self._alloc_sstable("mrow")
            sstable.write_row_file(row_path, self.schema,
                                   [Record(v, 0, False) for v in ordered])
        baseline = Baseline(version, self.schema, col_path, row_path,
                            block_keys=block_keys)
        self.state = TabletState(baseline, (), MemTable(), version)
        return version

    def flush(self) -> None:
        """Orderly shutdown: spill the memtable and persist the manifest."""
        if self.state.memtable.entries:
            self.minor_compact()
        self.write_manifest()
