"""On-disk SSTable format: headers, checksums, directories, lazy reads."""

import struct

import pytest

from conftest import make_schema, three_col_schema

from mercury_mini import ColumnDef, ColumnType, TableSchema
from mercury_mini.errors import CorruptSSTable
from mercury_mini.sstable import (
    ColumnFileReader,
    Record,
    read_row_file,
    write_column_file,
    write_row_file,
)


def test_row_file_roundtrip(tmp_path):
    schema = make_schema()
    records = [
        Record((1, 10), 1, False),
        Record((2, None), 2, False),
        Record((2, None), 5, True),
        Record((3, -7), 3, False),
    ]
    path = tmp_path / "r.sst"
    write_row_file(path, schema, records)
    assert read_row_file(path, schema) == records


def test_header_fields(tmp_path):
    schema = make_schema()
    path = tmp_path / "r.sst"
    write_row_file(path, schema, [Record((1, 2), 1, False)])
    raw = path.read_bytes()
    magic, version, fmt, ncols = struct.unpack_from("<4sHBH", raw)
    assert magic == b"MRCS" and version == 1 and fmt == 0 and ncols == 2


def test_checksum_detects_corruption(tmp_path):
    schema = make_schema()
    path = tmp_path / "r.sst"
    write_row_file(path, schema, [Record((1, 2), 1, False)])
    raw = bytearray(path.read_bytes())
    raw[12] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(CorruptSSTable):
        read_row_file(path, schema)


def test_wrong_format_rejected(tmp_path):
    schema = make_schema()
    path = tmp_path / "r.sst"
    write_row_file(path, schema, [])
    with pytest.raises(CorruptSSTable):
        ColumnFileReader(path, schema)


def test_column_file_roundtrip(tmp_path):
    schema = three_col_schema()
    columns = [
        list(range(100)),
        [None if i % 7 == 0 else i * 3 for i in range(100)],
        [None if i % 11 == 0 else f"tag_{i % 5}" for i in range(100)],
    ]
    path = tmp_path / "c.sst"
    write_column_file(path, schema, columns, block_rows=16)
    reader = ColumnFileReader(path, schema)
    assert reader.block_count == 7
    assert reader.row_count == 100
    for ci in range(3):
        got = []
        for b in range(reader.block_count):
            got.extend(reader.decode_block_column(ci, b))
        assert got == columns[ci]


def test_column_file_directory_sketches(tmp_path):
    schema = make_schema()
    columns = [list(range(64)), [v * 2 for v in range(64)]]
    path = tmp_path / "c.sst"
    write_column_file(path, schema, columns, block_rows=32)
    reader = ColumnFileReader(path, schema)
    entries = reader.directories[0]
    assert [e.row_count for e in entries] == [32, 32]
    assert entries[0].sketch.min == 0 and entries[0].sketch.max == 31
    assert entries[1].sketch.min == 32 and entries[1].sketch.max == 63
    assert entries[0].sketch.sum == sum(range(32))


def test_column_file_empty_table(tmp_path):
    schema = make_schema()
    path = tmp_path / "c.sst"
    write_column_file(path, schema, [[], []], block_rows=8)
    reader = ColumnFileReader(path, schema)
    assert reader.block_count == 0 and reader.row_count == 0


def test_intercol_reference_resolution(tmp_path):
    schema = TableSchema(
        "t",
        (ColumnDef("a", ColumnType.UTF8, nullable=False),
         ColumnDef("b", ColumnType.UTF8, nullable=False)),
        ("a",),
    )
    base = [f"2024-01-{i:02d}" for i in range(1, 31)]
    columns = [base, [v + " 12:00" for v in base]]
    path = tmp_path / "c.sst"
    write_column_file(path, schema, columns, block_rows=10)
    reader = ColumnFileReader(path, schema)
    for b in range(reader.block_count):
        assert reader.decode_block_column(1, b) == columns[1][b * 10:(b + 1) * 10]


def test_block_target_size_derivation(tmp_path):
    from mercury_mini.sstable import default_block_rows

    schema = make_schema()
    # two int64 columns: 8 KiB / 8 bytes = 1024 rows per block
    assert default_block_rows(schema, [[1], [2]]) == 1024
