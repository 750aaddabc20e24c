"""mercury-mini: an embedded hybrid row/column analytical storage engine.

Baseline data lives in per-column encoded SSTables with sketch-carrying
block indexes; everything newer stays in row format and is merged on read
at snapshot granularity.  Materialized aggregate views refresh fully via
hidden-table swap or incrementally from the table mlog.
"""

from .catalog import (
    AggSpec,
    ColumnDef,
    MViewDef,
    RefreshPolicy,
    StoreMode,
    TableSchema,
)
from .engine import Database, QueryResult
from .errors import EngineError
from .storage import Delete, Insert, Snapshot, Update, vertical_split_plan
from .types import AggFunc, CmpOp, ColumnType, Predicate

__version__ = "0.1.0"

__all__ = [
    "AggFunc",
    "AggSpec",
    "CmpOp",
    "ColumnDef",
    "ColumnType",
    "Database",
    "Delete",
    "EngineError",
    "Insert",
    "MViewDef",
    "Predicate",
    "QueryResult",
    "RefreshPolicy",
    "Snapshot",
    "StoreMode",
    "TableSchema",
    "Update",
    "vertical_split_plan",
]
