"""Materialized view maintenance.

Every base-table mutation appends Old/New row images to the table's mlog.
Incremental refresh folds the unapplied mlog suffix into per-group deltas:
counts and sums move by (New - Old), averages ride a maintained (sum,
count) pair, and a min/max whose stored extremum was removed triggers a
targeted rescan of just that group.  Full refresh recomputes into a hidden
container and swaps it in atomically.  Realtime reads overlay the same
delta computation on the container without writing anything.

The physical container table keeps, per aggregate, the running value plus
a hidden non-null-input count (avg also keeps its hidden sum); reads
project the logical row, rendering avg as the quotient and empty inputs
as null.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from . import keys
from .catalog import AggSpec, ColumnDef, MViewDef, StoreMode, TableSchema
from .errors import MlogGap
from .storage import Row
from .types import AggFunc, ColumnType

OLD = "Old"
NEW = "New"


@dataclass(frozen=True)
class MLogEntry:
    sequence: int
    version: int  # commit version of the originating DML
    dmltype: str  # insert | update | delete
    old_new: str  # Old | New
    pk: tuple
    values: tuple

    def to_json(self) -> dict:
        return {
            "sequence": self.sequence,
            "version": self.version,
            "dmltype": self.dmltype,
            "old_new": self.old_new,
            "pk": list(self.pk),
            "values": list(self.values),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "MLogEntry":
        return cls(doc["sequence"], doc["version"], doc["dmltype"],
                   doc["old_new"], tuple(doc["pk"]), tuple(doc["values"]))


class MLog:
    """Append-only change log for one base table, purgeable from the front."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.entries: list[MLogEntry] = []
        self.next_sequence = 1
        self.purged_through = 0
        self._dirty = False
        if self.path.exists():
            with self.path.open() as fh:
                head = json.loads(fh.readline())
                self.next_sequence = head["next_sequence"]
                self.purged_through = head["purged_through"]
                for line in fh:
                    self.entries.append(MLogEntry.from_json(json.loads(line)))

    def capture(self, events: Sequence[tuple], version: int) -> list[MLogEntry]:
        """Turn DML change events into mlog entries: insert -> one New,
        delete -> one Old, update -> consecutive Old + New."""
        out = []
        for event in events:
            kind = event[0]
            if kind == "insert":
                row = event[1]
                out.append(self._make(version, "insert", NEW, row))
            elif kind == "delete":
                out.append(self._make(version, "delete", OLD, event[1]))
            else:
                out.append(self._make(version, "update", OLD, event[1]))
                out.append(self._make(version, "update", NEW, event[2]))
        self.entries.extend(out)
        self._dirty = True
        return out

    def _make(self, version: int, dmltype: str, old_new: str,
              row: Row) -> MLogEntry:
        seq = self.next_sequence
        self.next_sequence += 1
        return MLogEntry(seq, version, dmltype, old_new, row.pk, row.values)

    def range(self, after_sequence: int,
              version_cap: int | None = None) -> list[MLogEntry]:
        if after_sequence < self.purged_through:
            raise MlogGap(
                f"entries after {after_sequence} were purged "
                f"(log starts at {self.purged_through + 1})")
        out = [e for e in self.entries if e.sequence > after_sequence]
        if version_cap is not None:
            out = [e for e in out if e.version <= version_cap]
        return out

    def last_sequence_at(self, version_cap: int) -> int:
        last = self.purged_through
        for e in self.entries:
            if e.version <= version_cap and e.sequence > last:
                last = e.sequence
        return last

    def purge(self, up_to_sequence: int) -> int:
        keep = [e for e in self.entries if e.sequence > up_to_sequence]
        removed = len(self.entries) - len(keep)
        if up_to_sequence > self.purged_through:
            self.purged_through = up_to_sequence
        self.entries = keep
        if removed:
            self._dirty = True
        return removed

    def flush(self) -> None:
        if not self._dirty:
            return
        tmp = self.path.with_suffix(".tmp")
        with tmp.open("w") as fh:
            fh.write(json.dumps({"next_sequence": self.next_sequence,
                                 "purged_through": self.purged_through}) + "\n")
            for e in self.entries:
                fh.write(json.dumps(e.to_json()) + "\n")
        tmp.replace(self.path)
        self._dirty = False


@dataclass
class MViewState:
    """Runtime pointer of one materialized view."""

    name: str
    container: str
    cursor: int  # last applied mlog sequence
    generation: int = 0

    def to_json(self) -> dict:
        return {"name": self.name, "container": self.container,
                "cursor": self.cursor, "generation": self.generation}

    @classmethod
    def from_json(cls, doc: dict) -> "MViewState":
        return cls(doc["name"], doc["container"], doc["cursor"],
                   doc.get("generation", 0))


# -- container schema ----------------------------------------------------------

UNGROUPED_PK = "__k"
ROWCOUNT_COL = "__rows"


def _storage_columns(spec: AggSpec, base: TableSchema,
                     ordinal: int) -> list[ColumnDef]:
    # output names come from query text, so storage slots use safe ordinals
    slot = f"agg{ordinal}"
    if spec.function in (AggFunc.COUNT_STAR, AggFunc.COUNT):
        return [ColumnDef(slot, ColumnType.INT64, nullable=False)]
    col_type = base.column(spec.column).type
    hidden_count = ColumnDef(f"{slot}$count", ColumnType.INT64, nullable=False)
    if spec.function is AggFunc.AVG:
        return [ColumnDef(f"{slot}$sum", col_type, nullable=True), hidden_count]
    # sum / min / max keep their value plus the hidden input count
    return [ColumnDef(slot, col_type, nullable=True), hidden_count]


def container_schema(mv: MViewDef, base: TableSchema, container_name: str
                     ) -> TableSchema:
    cols: list[ColumnDef] = []
    if mv.group_by:
        for g in mv.group_by:
            src = base.column(g)
            cols.append(ColumnDef(g, src.type, nullable=src.nullable))
        pk = tuple(mv.group_by)
    else:
        cols.append(ColumnDef(UNGROUPED_PK, ColumnType.INT64, nullable=False))
        pk = (UNGROUPED_PK,)
    for i, spec in enumerate(mv.select_items):
        cols.extend(_storage_columns(spec, base, i))
    if mv.group_by:
        # group liveness needs the raw row count even without a count(*)
        cols.append(ColumnDef(ROWCOUNT_COL, ColumnType.INT64, nullable=False))
    return TableSchema(container_name, tuple(cols), pk,
                       store_mode=StoreMode.COLUMN)


# -- aggregate state kept per group ---------------------------------------------


class _SpecState:
    """Stored aggregate state of one AggSpec within one group."""

    __slots__ = ("spec", "count", "total", "extreme")

    def __init__(self, spec: AggSpec):
        self.spec = spec
        self.count = 0      # non-null inputs (rows for count(*))
        self.total = None   # running sum for sum/avg
        self.extreme = None  # running min or max

    @classmethod
    def from_values(cls, spec: AggSpec, values: Sequence) -> "_SpecState":
        st = cls(spec)
        for v in values:
            st.add(v)
        return st

    def add(self, v) -> None:
        f = self.spec.function
        if f is AggFunc.COUNT_STAR:
            self.count += 1
            return
        if v is None:
            return
        self.count += 1
        if f in (AggFunc.SUM, AggFunc.AVG):
            self.total = v if self.total is None else self.total + v
        elif f is AggFunc.MIN:
            if self.extreme is None or v < self.extreme:
                self.extreme = v
        elif f is AggFunc.MAX:
            if self.extreme is None or v > self.extreme:
                self.extreme = v

    def storage_values(self) -> list:
        f = self.spec.function
        if f in (AggFunc.COUNT_STAR, AggFunc.COUNT):
            return [self.count]
        if f is AggFunc.AVG:
            return [self.total, self.count]
        if f is AggFunc.SUM:
            return [self.total, self.count]
        return [self.extreme, self.count]

    @classmethod
    def from_storage(cls, spec: AggSpec, stored: Sequence) -> "_SpecState":
        st = cls(spec)
        f = spec.function
        if f in (AggFunc.COUNT_STAR, AggFunc.COUNT):
            st.count = stored[0]
        elif f in (AggFunc.AVG, AggFunc.SUM):
            st.total, st.count = stored[0], stored[1]
        else:
            st.extreme, st.count = stored[0], stored[1]
        return st

    def result(self):
        f = self.spec.function
        if f in (AggFunc.COUNT_STAR, AggFunc.COUNT):
            return self.count
        if self.count == 0:
            return None
        if f is AggFunc.SUM:
            return self.total
        if f is AggFunc.AVG:
            return self.total / self.count
        return self.extreme


def storage_width(spec: AggSpec) -> int:
    return 1 if spec.function in (AggFunc.COUNT_STAR, AggFunc.COUNT) else 2


# -- group deltas ----------------------------------------------------------------


class _SpecDelta:
    __slots__ = ("count_d", "sum_d", "news", "olds")

    def __init__(self):
        self.count_d = 0
        self.sum_d = 0
        self.news: list = []
        self.olds: list = []


class GroupDelta:
    """Net change of one group over a span of mlog entries."""

    __slots__ = ("count_star_d", "specs")

    def __init__(self, aggs: Sequence[AggSpec]):
        self.count_star_d = 0
        self.specs = {spec.output_name: _SpecDelta() for spec in aggs}


def compute_group_deltas(mv: MViewDef, base: TableSchema,
                         entries: Sequence[MLogEntry]) -> dict[tuple, GroupDelta]:
    group_idx = [base.column_index(g) for g in mv.group_by]
    spec_idx = {spec.output_name: (None if spec.column is None
                                   else base.column_index(spec.column))
                for spec in mv.select_items}
    deltas: dict[tuple, GroupDelta] = {}
    for e in entries:
        key = tuple(e.values[i] for i in group_idx)
        gd = deltas.get(key)
        if gd is None:
            gd = GroupDelta(mv.select_items)
            deltas[key] = gd
        sign = 1 if e.old_new == NEW else -1
        gd.count_star_d += sign
        for spec in mv.select_items:
            sd = gd.specs[spec.output_name]
            if spec.function is AggFunc.COUNT_STAR:
                sd.count_d += sign
                continue
            v = e.values[spec_idx[spec.output_name]]
            if v is None:
                continue
            sd.count_d += sign
            if spec.function in (AggFunc.SUM, AggFunc.AVG):
                sd.sum_d += sign * v
            elif sign > 0:
                sd.news.append(v)
            else:
                sd.olds.append(v)
    return deltas


def apply_delta(state: _SpecState, delta: _SpecDelta,
                rescan: "Optional[callable]" = None) -> _SpecState:
    """Fold one spec's delta into its stored state.

    `rescan` recomputes the group's inputs from base when a removed value
    hit the stored extremum (the dirty-extremum rule for min/max).
    """
    spec = state.spec
    f = spec.function
    out = _SpecState(spec)
    if f is AggFunc.COUNT_STAR:
        out.count = state.count + delta.count_d
        return out
    out.count = state.count + delta.count_d
    if f is AggFunc.COUNT:
        return out
    if f in (AggFunc.SUM, AggFunc.AVG):
        if out.count == 0:
            out.total = None
        else:
            base_total = state.total if state.total is not None else 0
            out.total = base_total + delta.sum_d
        return out
    # min / max
    if out.count == 0:
        out.extreme = None
        return out
    folded = state.extreme if state.count > 0 else None
    for v in delta.news:
        if folded is None:
            folded = v
        elif f is AggFunc.MIN and v < folded:
            folded = v
        elif f is AggFunc.MAX and v > folded:
            folded = v
    # a removed value equal to the candidate may have been its only witness
    if any(v == folded for v in delta.olds):
        out.extreme = _SpecState.from_values(spec, rescan()).extreme
    else:
        out.extreme = folded
    return out


# count(*) state for a group is tracked alongside spec states by callers via
# the count of any COUNT_STAR spec, or reconstructed from row existence.


def group_sort_key(mv: MViewDef, base: TableSchema, group_key: tuple) -> bytes:
    types = [base.column(g).type for g in mv.group_by] or [ColumnType.INT64]
    values = group_key if mv.group_by else (0,)
    return keys.encode_tuple(types, values)


def project_outputs(mv: MViewDef, states: Sequence[_SpecState]) -> list:
    return [st.result() for st in states]
