"""Latency decomposition, aggregation and CSV export."""

from .export import CSV_COLUMNS, timeline_rows, write_csv
from .latency import (
    STAGES,
    Decomposition,
    LatencySummary,
    StageStats,
    TxnTimeline,
    aggregate,
    anchor_segments,
    commit_rule_mix,
    decompose,
    format_comparison,
    format_summary,
    summarize,
)

__all__ = [
    "CSV_COLUMNS",
    "Decomposition",
    "LatencySummary",
    "STAGES",
    "StageStats",
    "TxnTimeline",
    "aggregate",
    "anchor_segments",
    "commit_rule_mix",
    "decompose",
    "format_comparison",
    "format_summary",
    "summarize",
    "timeline_rows",
    "write_csv",
]
