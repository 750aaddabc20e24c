import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mercury_mini import (
    ColumnDef,
    ColumnType,
    Database,
    StoreMode,
    TableSchema,
)


@pytest.fixture
def db(tmp_path):
    with Database(tmp_path / "data") as database:
        yield database


def make_schema(name="t1", store_mode=StoreMode.COLUMN, pk=("c1",),
                columns=None):
    if columns is None:
        columns = (
            ColumnDef("c1", ColumnType.INT64, nullable=False),
            ColumnDef("c2", ColumnType.INT64, nullable=True),
        )
    return TableSchema(name, columns, pk, store_mode)


def three_col_schema(name="t", store_mode=StoreMode.COLUMN):
    return TableSchema(
        name,
        (
            ColumnDef("pk", ColumnType.INT64, nullable=False),
            ColumnDef("num", ColumnType.INT64, nullable=True),
            ColumnDef("tag", ColumnType.UTF8, nullable=True),
        ),
        ("pk",),
        store_mode,
    )


def seeded(seed):
    return random.Random(seed)
