"""Built-in measurement studies behind `mercury-mini report`.

Two studies run against scratch databases and land in the output directory
as CSV plus rendered figures:

  refresh_cost.csv / .png    incremental refresh work vs. delta size for a
                             large grouped view (update-only workload)
  pushdown_bench.csv / .png  columnar pushdown aggregate vs. the row-format
                             baseline path and the no-pushdown executor

The pushdown speedup is hardware-dependent and reported, not asserted.
"""

from __future__ import annotations

import csv
import json
import random
import tempfile
import time
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .catalog import (
    AggSpec,
    ColumnDef,
    MViewDef,
    RefreshPolicy,
    SIMPLE_MAV,
    StoreMode,
    TableSchema,
)
from .engine import Database
from .storage import Update
from .types import AggFunc, CmpOp, ColumnType, Predicate


def refresh_cost_study(out_dir: Path, groups: int = 100_000,
                       ladder: tuple[int, ...] = (1000, 2000, 4000, 8000),
                       seed: int = 7) -> list[dict]:
    """Delta ladder into an M-group view; update-only so the container size
    stays put while entries_processed tracks D."""
    rng = random.Random(seed)
    rows = []
    with tempfile.TemporaryDirectory() as tmp:
        with Database(tmp, use_lock=False) as db:
            schema = TableSchema(
                "base",
                (ColumnDef("id", ColumnType.INT64, nullable=False),
                 ColumnDef("g", ColumnType.INT64, nullable=False),
                 ColumnDef("v", ColumnType.INT64, nullable=False)),
                ("id",), StoreMode.COLUMN)
            db.create_table(schema)
            db._tablet("base").bulk_load(
                [(i, i % groups, i % 97) for i in range(groups)])
            db.enable_mlog("base")
            mv = MViewDef("m_cost", "base", SIMPLE_MAV,
                          (AggSpec(AggFunc.COUNT, "v", "count_v"),
                           AggSpec(AggFunc.SUM, "v", "sum_v")),
                          ("g",), RefreshPolicy.INCREMENTAL)
            db.create_mview(mv)
            for d in ladder:
                # one update emits an Old and a New entry
                workload = [
                    Update((rng.randrange(groups),), {"v": rng.randrange(97)})
                    for _ in range(d // 2)
                ]
                t0 = time.perf_counter()
                measured = db.measure_refresh_cost("m_cost", workload)
                elapsed = (time.perf_counter() - t0) * 1000
                rows.append({
                    "delta_entries": d,
                    "entries_processed": measured["entries_processed"],
                    "groups_touched": measured["groups_touched"],
                    "container_rows": measured["container_rows"],
                    "duration_ms": round(elapsed, 2),
                })

    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "refresh_cost.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    d = [r["delta_entries"] for r in rows]
    ax1.plot(d, [r["entries_processed"] for r in rows], "o-",
             label="entries processed")
    ax1.plot(d, [r["groups_touched"] for r in rows], "s--",
             label="groups touched")
    ax1.set_xlabel("delta entries (D)")
    ax1.set_ylabel("refresh work")
    ax1.legend()
    ax2.plot(d, [r["container_rows"] for r in rows], "o-", color="tab:green")
    ax2.set_xlabel("delta entries (D)")
    ax2.set_ylabel("container rows")
    fig.tight_layout()
    fig.savefig(out_dir / "refresh_cost.png", dpi=120)
    plt.close(fig)
    return rows


def pushdown_bench(out_dir: Path, rows: int = 1_000_000,
                   seed: int = 11) -> list[dict]:
    """Hot-run timing of one aggregate over the three execution paths."""
    rng = random.Random(seed)
    with tempfile.TemporaryDirectory() as tmp:
        with Database(tmp, use_lock=False) as db:
            schema = TableSchema(
                "bench",
                (ColumnDef("id", ColumnType.INT64, nullable=False),
                 ColumnDef("k", ColumnType.INT64, nullable=False),
                 ColumnDef("v", ColumnType.INT64, nullable=False)),
                ("id",), StoreMode.REDUNDANT)
            db.create_table(schema)
            db._tablet("bench").bulk_load(
                [(i, rng.randrange(1000), rng.randrange(10_000))
                 for i in range(rows)])
            # filter on the unsorted column so every block is really decoded
            # and evaluated, not pruned or sketch-answered away
            aggs = [AggSpec(AggFunc.SUM, "v", "sum_v"),
                    AggSpec(AggFunc.COUNT_STAR, None, "n")]
            preds = [Predicate("k", CmpOp.LT, 500)]
            plan = db.plan("bench", predicates=preds, aggs=aggs)

            def timed(fn):
                best = None
                answer = None
                for _ in range(2):  # hot run: best of two
                    t0 = time.perf_counter()
                    answer = fn()
                    elapsed = time.perf_counter() - t0
                    best = elapsed if best is None else min(best, elapsed)
                return answer, best

            col_res, col_s = timed(lambda: db.execute_agg(plan)[0])
            row_res, row_s = timed(lambda: db.execute_row_path(plan)[0])
            exe_res, exe_s = timed(lambda: db.execute_no_pushdown(plan)[0])
            if not (col_res == row_res == exe_res):
                raise AssertionError(
                    f"path disagreement: {col_res} {row_res} {exe_res}")

    results = [
        {"path": "columnar_pushdown", "seconds": round(col_s, 4), "rows": rows},
        {"path": "row_baseline", "seconds": round(row_s, 4), "rows": rows},
        {"path": "no_pushdown_executor", "seconds": round(exe_s, 4),
         "rows": rows},
    ]
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "pushdown_bench.csv").open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(results[0]))
        writer.writeheader()
        writer.writerows(results)

    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ax.bar([r["path"] for r in results], [r["seconds"] for r in results],
           color=["tab:blue", "tab:orange", "tab:red"])
    ax.set_ylabel("seconds (hot run)")
    ax.set_title(f"sum+count over {rows:,} rows, 50% range predicate")
    plt.xticks(rotation=15, ha="right")
    fig.tight_layout()
    fig.savefig(out_dir / "pushdown_bench.png", dpi=120)
    plt.close(fig)
    return results


def run_report(out_dir: Path, rows: int = 1_000_000,
               quick: bool = False) -> None:
    out_dir = Path(out_dir)
    if quick:
        cost = refresh_cost_study(out_dir, groups=2000,
                                  ladder=(200, 400, 800, 1600))
        bench = pushdown_bench(out_dir, rows=min(rows, 50_000))
    else:
        cost = refresh_cost_study(out_dir)
        bench = pushdown_bench(out_dir, rows=rows)
    ratios = [round(b["entries_processed"] / a["entries_processed"], 3)
              for a, b in zip(cost, cost[1:])]
    col = next(r for r in bench if r["path"] == "columnar_pushdown")
    row = next(r for r in bench if r["path"] == "row_baseline")
    speedup = row["seconds"] / col["seconds"] if col["seconds"] else float("inf")
    print(json.dumps({
        "out_dir": str(out_dir),
        "refresh_entry_ratios": ratios,
        "column_vs_row_speedup": round(speedup, 2),
        "files": ["refresh_cost.csv", "refresh_cost.png",
                  "pushdown_bench.csv", "pushdown_bench.png"],
    }))
