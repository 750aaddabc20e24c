"""Command-line frontend.

    mercury-mini --data-dir DIR <command> ...

Exit codes: 0 success, 2 parse/usage errors, 3 engine errors.
"""

from __future__ import annotations

import argparse
import csv as _csv
import json
import os
import sys
from pathlib import Path

from . import minisql
from .catalog import (
    ColumnDef,
    MViewDef,
    RefreshPolicy,
    SIMPLE_MAV,
    StoreMode,
    TableSchema,
)
from .engine import Database, _parse_cell
from .errors import EngineError, ParseError
from .types import ColumnType

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_ENGINE = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mercury-mini",
        description="embedded hybrid row/column analytical storage engine")
    parser.add_argument("--data-dir",
                        default=os.environ.get("MERCURY_DATA_DIR"),
                        help="database directory (env: MERCURY_DATA_DIR)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("create-table", help="register a new table")
    p.add_argument("name")
    p.add_argument("--columns", required=True,
                   help="comma list of name:type[:null], types "
                        "int64|float64|utf8")
    p.add_argument("--pk", required=True, help="comma list of key columns")
    p.add_argument("--store-mode", default="column",
                   choices=[m.value for m in StoreMode])

    p = sub.add_parser("create-mview", help="register a materialized view")
    p.add_argument("name")
    p.add_argument("--base", required=True)
    p.add_argument("--select", required=True,
                   help="aggregate list, e.g. 'count(c1),sum(c2)'")
    p.add_argument("--group-by", default=None)
    p.add_argument("--refresh", default="incremental",
                   choices=[m.value for m in RefreshPolicy])

    p = sub.add_parser("enable-mlog", help="start change capture on a table")
    p.add_argument("table")

    p = sub.add_parser("ingest", help="bulk-insert a CSV file")
    p.add_argument("table")
    p.add_argument("csv_path")

    p = sub.add_parser("dml", help="single-row insert/update/delete")
    p.add_argument("table")
    p.add_argument("verb", choices=["insert", "update", "delete"])
    p.add_argument("--values", help="comma list of values (insert)")
    p.add_argument("--pk", help="comma list of key values (update/delete)")
    p.add_argument("--set", dest="assignments",
                   help="comma list of col=value (update)")

    p = sub.add_parser("query", help="run a SELECT")
    p.add_argument("text")
    p.add_argument("--json", action="store_true",
                   help="line-delimited JSON records")
    p.add_argument("--stats", action="store_true",
                   help="append scan statistics JSON")

    p = sub.add_parser(
        "admin", help="compact-minor|compact-major|refresh|purge-mlog|stats")
    p.add_argument("verb", choices=["compact-minor", "compact-major",
                                    "refresh", "purge-mlog", "stats"])
    p.add_argument("target")
    p.add_argument("--mode", default=None,
                   choices=[m.value for m in RefreshPolicy])

    p = sub.add_parser(
        "report",
        help="run the built-in measurement studies; writes CSV and figures")
    p.add_argument("--out", default="report")
    p.add_argument("--rows", type=int, default=1_000_000,
                   help="table size for the pushdown benchmark")
    p.add_argument("--quick", action="store_true",
                   help="small sizes for a fast smoke run")
    return parser


def _parse_columns(spec: str) -> list[ColumnDef]:
    out = []
    for part in spec.split(","):
        bits = part.strip().split(":")
        if len(bits) not in (2, 3) or (len(bits) == 3 and bits[2] != "null"):
            raise ParseError(f"bad column spec {part!r}", 0)
        try:
            col_type = ColumnType(bits[1])
        except ValueError:
            raise ParseError(f"unknown type {bits[1]!r}", 0) from None
        out.append(ColumnDef(bits[0], col_type, nullable=len(bits) == 3))
    return out


def _split_csvish(text: str) -> list[str]:
    return next(_csv.reader([text]))


def _parse_pk(db: Database, table: str, text: str) -> tuple:
    schema = db.catalog.tables[table]
    fields = _split_csvish(text)
    return tuple(_parse_cell(db.catalog.tables[table].column(k).type, raw)
                 for k, raw in zip(schema.pk, fields))


def cmd_create_table(db: Database, args) -> int:
    schema = TableSchema(args.name, tuple(_parse_columns(args.columns)),
                         tuple(k.strip() for k in args.pk.split(",")),
                         StoreMode(args.store_mode))
    db.create_table(schema)
    print(json.dumps({"created": args.name}))
    return EXIT_OK


def cmd_create_mview(db: Database, args) -> int:
    probe = minisql.parse(f"SELECT {args.select} FROM {args.base}")
    items = []
    for it in probe.items:
        if it.func is None:
            raise ParseError(f"{it.display!r} is not an aggregate", 0)
        items.append(it)
    from .engine import _agg_spec

    mv = MViewDef(
        name=args.name,
        base_table=args.base,
        kind=SIMPLE_MAV,
        select_items=tuple(_agg_spec(it) for it in items),
        group_by=tuple([args.group_by] if args.group_by else []),
        refresh_policy=RefreshPolicy(args.refresh),
    )
    db.create_mview(mv)
    print(json.dumps({"created": args.name}))
    return EXIT_OK


def cmd_dml(db: Database, args) -> int:
    schema = db.catalog.tables.get(args.table)
    if schema is None:
        raise EngineError(f"unknown table {args.table!r}")
    if args.verb == "insert":
        if args.values is None:
            raise ParseError("insert needs --values", 0)
        fields = _split_csvish(args.values)
        values = tuple(
            None if raw == "" else _parse_cell(col.type, raw)
            for col, raw in zip(schema.columns, fields))
        version = db.insert(args.table, values)
    elif args.verb == "delete":
        if args.pk is None:
            raise ParseError("delete needs --pk", 0)
        version = db.delete(args.table, _parse_pk(db, args.table, args.pk))
    else:
        if args.pk is None or args.assignments is None:
            raise ParseError("update needs --pk and --set", 0)
        assignments = {}
        for part in _split_csvish(args.assignments):
            name, _, raw = part.partition("=")
            if not _:
                raise ParseError(f"bad assignment {part!r}", 0)
            try:
                col = schema.column(name.strip())
            except KeyError:
                raise EngineError(f"unknown column {name.strip()!r}") from None
            assignments[name.strip()] = (None if raw == ""
                                         else _parse_cell(col.type, raw))
        version = db.update(args.table, _parse_pk(db, args.table, args.pk),
                            assignments)
    print(json.dumps({"version": version}))
    return EXIT_OK


def _print_table(columns: list[str], rows: list[tuple]) -> None:
    cells = [[("" if v is None else str(v)) for v in row] for row in rows]
    widths = [len(c) for c in columns]
    for row in cells:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    print("  ".join(c.ljust(w) for c, w in zip(columns, widths)).rstrip())
    for row in cells:
        print("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())


def cmd_query(db: Database, args) -> int:
    result = db.run_query(args.text)
    if args.json:
        for row in result.rows:
            print(json.dumps(dict(zip(result.columns, row))))
    else:
        _print_table(result.columns, result.rows)
    if args.stats:
        stats = result.stats.to_json() if result.stats else {}
        print(json.dumps({"stats": stats}))
    return EXIT_OK


def cmd_admin(db: Database, args) -> int:
    verb = args.verb
    if verb == "compact-minor":
        sid = db.minor_compact(args.target)
        print(json.dumps({"table": args.target, "minor_sstable": sid}))
    elif verb == "compact-major":
        version = db.major_compact(args.target)
        print(json.dumps({"table": args.target, "baseline_version": version}))
    elif verb == "refresh":
        print(json.dumps(db.refresh(args.target, mode=args.mode)))
    elif verb == "purge-mlog":
        print(json.dumps({"table": args.target,
                          "purged": db.purge_mlog(args.target)}))
    else:
        print(json.dumps(db.table_stats(args.target)))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "report":
        from . import report

        report.run_report(Path(args.out), rows=args.rows, quick=args.quick)
        return EXIT_OK
    if not args.data_dir:
        parser.error("--data-dir (or MERCURY_DATA_DIR) is required")
    try:
        with Database(args.data_dir) as db:
            if args.command == "create-table":
                return cmd_create_table(db, args)
            if args.command == "create-mview":
                return cmd_create_mview(db, args)
            if args.command == "enable-mlog":
                db.enable_mlog(args.table)
                print(json.dumps({"mlog": args.table}))
                return EXIT_OK
            if args.command == "ingest":
                count = db.ingest_csv(args.table, args.csv_path)
                print(json.dumps({"table": args.table, "rows": count}))
                return EXIT_OK
            if args.command == "dml":
                return cmd_dml(db, args)
            if args.command == "query":
                return cmd_query(db, args)
            if args.command == "admin":
                return cmd_admin(db, args)
            parser.error(f"unknown command {args.command!r}")
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
