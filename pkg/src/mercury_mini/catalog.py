"""Table schemas, materialized-view definitions, and their JSON persistence.

Each table and each materialized view persists as one JSON document under
`<data-dir>/catalog/`, field names matching the definition dataclasses.
Lookups are pure reads over the registry; all mutation funnels through the
single-writer database engine.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

from .errors import InvalidSchema, Unsupported
from .types import AggFunc, ColumnType

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_INTERNAL_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_$]*$")

SIMPLE_MAV = "simple_mav"


def _check_ident(name: str, internal: bool = False) -> None:
    pattern = _INTERNAL_IDENT if internal else _IDENT
    if not isinstance(name, str) or not pattern.match(name):
        raise InvalidSchema(f"invalid identifier {name!r}")


class StoreMode(str, Enum):
    ROW = "row"
    COLUMN = "column"
    REDUNDANT = "redundant"


@dataclass(frozen=True)
class ColumnDef:
    name: str
    type: ColumnType
    nullable: bool = True

    def to_json(self) -> dict:
        return {"name": self.name, "type": self.type.value, "nullable": self.nullable}

    @classmethod
    def from_json(cls, doc: dict) -> "ColumnDef":
        return cls(doc["name"], ColumnType(doc["type"]), doc["nullable"])


@dataclass(frozen=True)
class TableSchema:
    name: str
    columns: tuple[ColumnDef, ...]
    pk: tuple[str, ...]
    store_mode: StoreMode = StoreMode.COLUMN

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "pk", tuple(self.pk))

    def validate(self, internal: bool = False) -> None:
        _check_ident(self.name, internal)
        if not self.columns:
            raise InvalidSchema("table needs at least one column")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise InvalidSchema("duplicate column name")
        for c in self.columns:
            _check_ident(c.name, internal)
        if not self.pk:
            raise InvalidSchema("primary key must not be empty")
        by_name = {c.name: c for c in self.columns}
        for k in self.pk:
            col = by_name.get(k)
            if col is None:
                raise InvalidSchema(f"pk column {k!r} not in table")
            # view containers key on group columns, which may be nullable
            if col.nullable and not internal:
                raise InvalidSchema(f"pk column {k!r} must not be nullable")

    # -- convenience lookups ------------------------------------------------

    def column(self, name: str) -> ColumnDef:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def column_index(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise KeyError(name)

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def column_types(self) -> list[ColumnType]:
        return [c.type for c in self.columns]

    @property
    def pk_indexes(self) -> list[int]:
        return [self.column_index(k) for k in self.pk]

    @property
    def pk_types(self) -> list[ColumnType]:
        return [self.column(k).type for k in self.pk]

    def pk_of(self, values: tuple) -> tuple:
        return tuple(values[i] for i in self.pk_indexes)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "columns": [c.to_json() for c in self.columns],
            "pk": list(self.pk),
            "store_mode": self.store_mode.value,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "TableSchema":
        return cls(
            name=doc["name"],
            columns=tuple(ColumnDef.from_json(c) for c in doc["columns"]),
            pk=tuple(doc["pk"]),
            store_mode=StoreMode(doc["store_mode"]),
        )


@dataclass(frozen=True)
class AggSpec:
    function: AggFunc
    column: Optional[str]
    output_name: str

    def validate(self, schema: TableSchema) -> None:
        if self.function is AggFunc.COUNT_STAR:
            if self.column is not None:
                raise InvalidSchema("count(*) takes no column")
            return
        if self.column is None:
            raise InvalidSchema(f"{self.function.value} needs a column")
        col = None
        for c in schema.columns:
            if c.name == self.column:
                col = c
        if col is None:
            raise InvalidSchema(f"unknown aggregate column {self.column!r}")
        if self.function in (AggFunc.SUM, AggFunc.AVG) and not col.type.is_numeric:
            raise InvalidSchema(f"{self.function.value}({self.column}) needs a "
                                "numeric column")

    def to_json(self) -> dict:
        return {"function": self.function.value, "column": self.column,
                "output_name": self.output_name}

    @classmethod
    def from_json(cls, doc: dict) -> "AggSpec":
        return cls(AggFunc(doc["function"]), doc["column"], doc["output_name"])


class RefreshPolicy(str, Enum):
    FULL = "full"
    INCREMENTAL = "incremental"


@dataclass(frozen=True)
class MViewDef:
    name: str
    base_table: str
    kind: str
    select_items: tuple[AggSpec, ...]
    group_by: tuple[str, ...]
    refresh_policy: RefreshPolicy

    def __post_init__(self):
        object.__setattr__(self, "select_items", tuple(self.select_items))
        object.__setattr__(self, "group_by", tuple(self.group_by))

    def validate(self, base: TableSchema) -> None:
        _check_ident(self.name)
        if self.kind != SIMPLE_MAV:
            raise Unsupported(f"view kind {self.kind!r}; only {SIMPLE_MAV} is "
                              "supported")
        if not self.select_items:
            raise InvalidSchema("view needs at least one aggregate")
        outs = [a.output_name for a in self.select_items]
        if len(set(outs)) != len(outs) or set(outs) & set(self.group_by):
            raise InvalidSchema("duplicate output name in view")
        for g in self.group_by:
            if g not in base.column_names:
                raise InvalidSchema(f"unknown group-by column {g!r}")
        for a in self.select_items:
            a.validate(base)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "base_table": self.base_table,
            "kind": self.kind,
            "select_items": [a.to_json() for a in self.select_items],
            "group_by": list(self.group_by),
            "refresh_policy": self.refresh_policy.value,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "MViewDef":
        return cls(
            name=doc["name"],
            base_table=doc["base_table"],
            kind=doc["kind"],
            select_items=tuple(AggSpec.from_json(a) for a in doc["select_items"]),
            group_by=tuple(doc["group_by"]),
            refresh_policy=RefreshPolicy(doc["refresh_policy"]),
        )


class Catalog:
    """In-memory registry mirrored to one JSON file per object."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.tables: dict[str, TableSchema] = {}
        self.mviews: dict[str, MViewDef] = {}
        for path in sorted(self.root.glob("*.json")):
            doc = json.loads(path.read_text())
            if "base_table" in doc:
                mv = MViewDef.from_json(doc)
                self.mviews[mv.name] = mv
            else:
                schema = TableSchema.from_json(doc)
                self.tables[schema.name] = schema

    def _path(self, name: str) -> Path:
        return self.root / f"{name}.json"

    def _write(self, name: str, doc: dict) -> None:
        tmp = self._path(name).with_suffix(".json.tmp")
        tmp.write_text(json.dumps(doc, indent=2))
        tmp.replace(self._path(name))

    def put_table(self, schema: TableSchema) -> None:
        self.tables[schema.name] = schema
        self._write(schema.name, schema.to_json())

    def drop_table(self, name: str) -> None:
        self.tables.pop(name, None)
        self._path(name).unlink(missing_ok=True)

    def put_mview(self, mv: MViewDef) -> None:
        self.mviews[mv.name] = mv
        self._write(mv.name, mv.to_json())

    def drop_mview(self, name: str) -> None:
        self.mviews.pop(name, None)
        self._path(name).unlink(missing_ok=True)

    def has_name(self, name: str) -> bool:
        return name in self.tables or name in self.mviews

    def mviews_on(self, base_table: str) -> list[MViewDef]:
        return [mv for mv in self.mviews.values() if mv.base_table == base_table]
