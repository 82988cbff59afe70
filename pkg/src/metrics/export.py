"""CSV rows for per-transaction timelines."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable

from .latency import TxnTimeline

CSV_COLUMNS = (
    "run_id",
    "protocol",
    "seed",
    "txn_id",
    "dag_id",
    "submit_t",
    "proposed_t",
    "anchored_t",
    "committed_t",
    "queuing",
    "anchoring",
    "anchor_commit",
    "total",
    "commit_rule",
)

FLOAT_FORMAT = "{:.6f}"


def timeline_rows(run_id: str, protocol: str, seed: int, timelines: Iterable[TxnTimeline]) -> list[list[str]]:
    rows = []
    for t in timelines:
        times = (t.submit_t, t.proposed_t, t.anchored_t, t.committed_t,
                 t.queuing, t.anchoring, t.anchor_commit, t.total)
        rows.append(
            [run_id, protocol, str(seed), str(t.txn_id), str(t.dag_id)]
            + [FLOAT_FORMAT.format(x) for x in times]
            + [t.commit_rule.value]
        )
    return rows


def write_csv(path: str | Path, rows: Iterable[list[str]]) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        writer.writerows(rows)
    return path
