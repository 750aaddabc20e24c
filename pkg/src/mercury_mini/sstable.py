"""On-disk SSTable files, row format and column format.

Shared layout (all integers little-endian):

  header   magic "MRCS", format_version u16, format u8 (0=row, 1=column),
           column_count u16
  body     row records, or encoded column blocks
  index    row: empty | column: per-column block directory
  footer   index_offset u64, crc32 u32  (crc over every preceding byte)

Row records are length-prefixed and ordered by (pk, version):
  u32 len | version u64 | flags u8 (bit0 tombstone) | column null bitmap |
  non-null values (numeric 8B, utf8 u32 len + bytes)

A column block directory is: block_count u32, then per block
  offset u64 | row_count u32 | encoding_id u8 | sketch (40 bytes).
The bytes at `offset` are the block's null bitmap followed by its encoded
payload.  Block row ranges are aligned across the columns of one file, so a
block ordinal addresses the same row slice in every segment.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import bitmap, encoding
from .catalog import TableSchema
from .encoding import EncodedBlock, EncodingId
from .errors import CorruptSSTable
from .skipindex import Sketch, SKETCH_BYTES
from .types import ColumnType

MAGIC = b"MRCS"
FORMAT_VERSION = 1
FORMAT_ROW = 0
FORMAT_COLUMN = 1

_HEADER = struct.Struct("<4sHBH")
_FOOTER = struct.Struct("<QI")
_DIR_ENTRY = struct.Struct("<QIB")

DEFAULT_BLOCK_BYTES = 8192  # pre-encoding target per column block


@dataclass(frozen=True)
class Record:
    """One row-format record; non-pk values of tombstones are None."""

    values: tuple
    version: int
    tombstone: bool


def _pack_values(schema: TableSchema, values: tuple) -> bytes:
    nulls = bitmap.pack(np.array([v is None for v in values], dtype=bool))
    parts = [nulls.tobytes()]
    for col, v in zip(schema.columns, values):
        if v is None:
            continue
        if col.type is ColumnType.INT64:
            parts.append(struct.pack("<q", v))
        elif col.type is ColumnType.FLOAT64:
            parts.append(struct.pack("<d", v))
        else:
            raw = v.encode("utf-8")
            parts.append(struct.pack("<I", len(raw)) + raw)
    return b"".join(parts)


def _unpack_values(schema: TableSchema, buf: bytes, pos: int) -> tuple[tuple, int]:
    ncols = len(schema.columns)
    nbytes = bitmap.nbytes(ncols)
    nulls = bitmap.unpack(np.frombuffer(buf[pos : pos + nbytes], dtype=np.uint8),
                          ncols)
    pos += nbytes
    out = []
    for i, col in enumerate(schema.columns):
        if nulls[i]:
            out.append(None)
            continue
        if col.type is ColumnType.INT64:
            out.append(struct.unpack_from("<q", buf, pos)[0])
            pos += 8
        elif col.type is ColumnType.FLOAT64:
            out.append(struct.unpack_from("<d", buf, pos)[0])
            pos += 8
        else:
            ln = struct.unpack_from("<I", buf, pos)[0]
            pos += 4
            out.append(buf[pos : pos + ln].decode("utf-8"))
            pos += ln
    return tuple(out), pos


def write_row_file(path: Path, schema: TableSchema,
                   records: Sequence[Record]) -> None:
    body = bytearray(_HEADER.pack(MAGIC, FORMAT_VERSION, FORMAT_ROW,
                                  len(schema.columns)))
    for rec in records:
        flags = 1 if rec.tombstone else 0
        payload = struct.pack("<QB", rec.version, flags) + _pack_values(
            schema, rec.values)
        body += struct.pack("<I", len(payload))
        body += payload
    index_offset = len(body)
    body += struct.pack("<Q", index_offset)
    body += struct.pack("<I", zlib.crc32(bytes(body)))
    Path(path).write_bytes(bytes(body))


def read_row_file(path: Path, schema: TableSchema) -> list[Record]:
    buf = _verified(path, FORMAT_ROW)
    end = len(buf) - _FOOTER.size
    pos = _HEADER.size
    out: list[Record] = []
    while pos < end:
        (length,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        version, flags = struct.unpack_from("<QB", buf, pos)
        values, _ = _unpack_values(schema, buf, pos + 9)
        out.append(Record(values, version, bool(flags & 1)))
        pos += length
    return out


def _verified(path: Path, expect_format: int) -> bytes:
    buf = Path(path).read_bytes()
    if len(buf) < _HEADER.size + _FOOTER.size:
        raise CorruptSSTable(f"{path}: truncated")
    magic, version, fmt, _ncols = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise CorruptSSTable(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise CorruptSSTable(f"{path}: unsupported format version {version}")
    if fmt != expect_format:
        raise CorruptSSTable(f"{path}: wrong storage format")
    _index_offset, crc = _FOOTER.unpack_from(buf, len(buf) - _FOOTER.size)
    if zlib.crc32(buf[:-4]) != crc:
        raise CorruptSSTable(f"{path}: checksum mismatch")
    return buf


@dataclass(frozen=True)
class BlockEntry:
    offset: int
    row_count: int
    encoding_id: EncodingId
    sketch: Sketch


def default_block_rows(schema: TableSchema, columns: Sequence[Sequence]) -> int:
    """Rows per block so the widest column stays near the byte target."""
    widest = 8.0
    for col, values in zip(schema.columns, columns):
        if col.type is ColumnType.UTF8 and values:
            avg = sum(len(v.encode("utf-8")) if v is not None else 0
                      for v in values) / len(values)
            widest = max(widest, avg + 4)
    rows = int(DEFAULT_BLOCK_BYTES // widest)
    return max(16, min(rows, 65535))


def write_column_file(
    path: Path,
    schema: TableSchema,
    columns: Sequence[Sequence],
    block_rows: int | None = None,
    column_groups: Sequence[Sequence[str]] | None = None,
) -> None:
    """Encode each column into aligned blocks and write one virtual SSTable.

    `column_groups` partitions the encoding work (vertical splitting); it
    changes task structure only, never the output bytes.
    """
    n = len(columns[0]) if columns else 0
    if block_rows is None:
        block_rows = default_block_rows(schema, columns)
    bounds = [(i, min(i + block_rows, n)) for i in range(0, n, block_rows)]
    if column_groups is None:
        column_groups = [schema.column_names]

    encoded: dict[str, list[EncodedBlock]] = {c.name: [] for c in schema.columns}
    for group in column_groups:
        for start, end in bounds:
            block_cols = {
                col.name: (col.type, columns[i][start:end])
                for i, col in enumerate(schema.columns)
            }
            for name in group:
                encoded[name].append(encoding.encode_best(block_cols, name))

    body = bytearray(_HEADER.pack(MAGIC, FORMAT_VERSION, FORMAT_COLUMN,
                                  len(schema.columns)))
    directories: list[list[BlockEntry]] = []
    for col in schema.columns:
        entries = []
        for blk in encoded[col.name]:
            offset = len(body)
            body += blk.null_bitmap.tobytes()
            body += encoding.second_compress(blk.payload)
            entries.append(BlockEntry(offset, blk.row_count, blk.encoding_id,
                                      blk.stats))
        directories.append(entries)

    index_offset = len(body)
    for entries in directories:
        body += struct.pack("<I", len(entries))
        for e in entries:
            body += _DIR_ENTRY.pack(e.offset, e.row_count, int(e.encoding_id))
            body += e.sketch.to_bytes()
    body += struct.pack("<Q", index_offset)
    body += struct.pack("<I", zlib.crc32(bytes(body)))
    Path(path).write_bytes(bytes(body))


class ColumnFileReader:
    """Lazy access to one column-format SSTable; blocks decode on demand."""

    def __init__(self, path: Path, schema: TableSchema):
        self.path = Path(path)
        self.schema = schema
        buf = _verified(path, FORMAT_COLUMN)
        self._buf = buf
        index_offset, _crc = _FOOTER.unpack_from(buf, len(buf) - _FOOTER.size)
        pos = index_offset
        self.directories: list[list[BlockEntry]] = []
        for col in schema.columns:
            (count,) = struct.unpack_from("<I", buf, pos)
            pos += 4
            entries = []
            for _ in range(count):
                offset, rows, eid = _DIR_ENTRY.unpack_from(buf, pos)
                pos += _DIR_ENTRY.size
                sketch = Sketch.from_bytes(col.type, buf[pos : pos + SKETCH_BYTES])
                pos += SKETCH_BYTES
                entries.append(BlockEntry(offset, rows, EncodingId(eid), sketch))
            self.directories.append(entries)
        self._decoded: dict[tuple[int, int], list] = {}

    @property
    def block_count(self) -> int:
        return len(self.directories[0]) if self.directories else 0

    @property
    def row_count(self) -> int:
        return sum(e.row_count for e in self.directories[0]) if self.directories else 0

    def block_row_range(self, block: int) -> tuple[int, int]:
        start = sum(e.row_count for e in self.directories[0][:block])
        return start, start + self.directories[0][block].row_count

    def read_block(self, col: int, block: int) -> EncodedBlock:
        entry = self.directories[col][block]
        nbytes = bitmap.nbytes(entry.row_count)
        nulls = bitmap.from_bytes(
            self._buf[entry.offset : entry.offset + nbytes])
        payload = self._payload(col, block, entry, nbytes)
        col_def = self.schema.columns[col]
        blk = EncodedBlock(entry.encoding_id, payload, entry.row_count, nulls,
                           entry.sketch, col_def.type)
        if entry.encoding_id in (EncodingId.INTERCOL_EQ,
                                 EncodingId.INTERCOL_SUBSTR):
            ordinal = encoding.intercol_source_ordinal(blk)
            blk.source_column = self.schema.columns[ordinal].name
        return blk

    def _payload(self, col: int, block: int, entry: BlockEntry,
                 skip: int) -> bytes:
        entries = self.directories[col]
        if block + 1 < len(entries):
            end = entries[block + 1].offset
        elif col + 1 < len(self.directories):
            end = self.directories[col + 1][0].offset
        else:
            end = self._index_offset()
        return encoding.second_decompress(self._buf[entry.offset + skip : end])

    def _index_offset(self) -> int:
        off, _ = _FOOTER.unpack_from(self._buf, len(self._buf) - _FOOTER.size)
        return off

    def decode_block_column(self, col: int, block: int) -> list:
        """Decoded values of one block of one column, resolving intercol refs."""
        key = (col, block)
        cached = self._decoded.get(key)
        if cached is not None:
            return cached
        blk = self.read_block(col, block)
        if blk.encoding_id in (EncodingId.INTERCOL_EQ, EncodingId.INTERCOL_SUBSTR):
            src = encoding.intercol_source_ordinal(blk)
            source_values = self.decode_block_column(src, block)
            values = encoding.decode(blk, source_values)
        else:
            values = encoding.decode(blk)
        self._decoded[key] = values
        return values

    def iter_rows(self, start_block: int = 0):
        """Yield full row tuples in pk order, block by block."""
        for b in range(start_block, self.block_count):
            cols = [self.decode_block_column(c, b)
                    for c in range(len(self.schema.columns))]
            for i in range(len(cols[0])):
                yield tuple(col[i] for col in cols)
