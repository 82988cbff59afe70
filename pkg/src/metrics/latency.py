"""Per-transaction latency decomposition into queuing, anchoring and anchor commit.

All times are in message delays. A transaction's timeline is read at the
replica it was submitted to:

    submit_t     client hands the txn to the replica
    proposed_t   the replica includes it in a proposal
    anchored_t   proposal time of the anchor whose segment ordered the txn's node
    committed_t  that anchor's commit time on its DAG
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from ..protocol.types import CommitRule, LogSegment
from ..sim.trace import RunTrace

STAGES = ("queuing", "anchoring", "anchor_commit", "total")


@dataclass(frozen=True)
class TxnTimeline:
    txn_id: int
    replica: int
    dag_id: int
    submit_t: float
    proposed_t: float
    anchored_t: float
    committed_t: float
    commit_rule: CommitRule
    is_anchor: bool = False
    appended_t: Optional[float] = None

    @property
    def queuing(self) -> float:
        return self.proposed_t - self.submit_t

    @property
    def anchoring(self) -> float:
        return self.anchored_t - self.proposed_t

    @property
    def anchor_commit(self) -> float:
        return self.committed_t - self.anchored_t

    @property
    def total(self) -> float:
        # Sum of the stages, so additivity holds bit-for-bit.
        return self.queuing + self.anchoring + self.anchor_commit

    @property
    def interleave_wait(self) -> float:
        """Extra wait for the round-robin global log after the DAG committed."""
        if self.appended_t is None:
            return 0.0
        return self.appended_t - self.committed_t


@dataclass
class Decomposition:
    """Timelines of committed txns; everything else is listed as uncommitted."""

    timelines: list[TxnTimeline] = field(default_factory=list)
    uncommitted: list[int] = field(default_factory=list)

    def __iter__(self):
        return iter(self.timelines)

    def __len__(self) -> int:
        return len(self.timelines)


def decompose(trace: RunTrace) -> Decomposition:
    """Attribute stage stamps to every submitted transaction of `trace`."""
    located: dict[int, dict[tuple[int, tuple[int, int]], tuple[LogSegment, Optional[float]]]] = {}
    result = Decomposition()

    for txn_id in sorted(trace.txns):
        stamp = trace.txns[txn_id]
        if stamp.proposed_t is None or stamp.round is None:
            result.uncommitted.append(txn_id)
            continue
        if stamp.replica not in located:
            located[stamp.replica] = _locate_nodes(trace, stamp.replica)
        hit = located[stamp.replica].get((stamp.dag_id, (stamp.round, stamp.replica)))
        if hit is None:
            result.uncommitted.append(txn_id)
            continue

        segment, appended_t = hit
        anchor = segment.anchor
        anchored_t = trace.proposal_times[(segment.dag_id, anchor.round, anchor.source)]
        result.timelines.append(
            TxnTimeline(
                txn_id=txn_id,
                replica=stamp.replica,
                dag_id=stamp.dag_id,
                submit_t=stamp.submit_t,
                proposed_t=stamp.proposed_t,
                anchored_t=anchored_t,
                committed_t=segment.commit_time,
                commit_rule=segment.via,
                is_anchor=anchor.key == (stamp.round, stamp.replica),
                appended_t=appended_t,
            )
        )
    return result


def _locate_nodes(trace: RunTrace, replica: int):
    appended = {
        (entry.dag_id, entry.segment.anchor): entry.appended_at
        for entry in trace.global_logs.get(replica, [])
    }
    where = {}
    for segment in trace.segments.get(replica, []):
        appended_t = appended.get((segment.dag_id, segment.anchor))
        for key in segment.nodes:
            where.setdefault((segment.dag_id, key), (segment, appended_t))
    return where


# ----------------------------------------------------------------------
# Aggregation
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class StageStats:
    mean: float
    p25: float
    p50: float
    p75: float

    @classmethod
    def from_values(cls, values: Sequence[float]) -> Optional["StageStats"]:
        if len(values) == 0:
            return None
        arr = np.asarray(values, dtype=float)
        p25, p50, p75 = np.percentile(arr, [25, 50, 75])
        return cls(float(np.mean(arr)), float(p25), float(p50), float(p75))


@dataclass
class LatencySummary:
    """Aggregate latency of one or more runs."""

    count: int
    stages: dict[str, StageStats] = field(default_factory=dict)
    non_anchor_anchoring: Optional[StageStats] = None
    interleave_wait: Optional[StageStats] = None
    commit_rule_mix: dict[str, float] = field(default_factory=dict)
    uncommitted: int = 0
    empty: bool = False

    @classmethod
    def empty_summary(cls, uncommitted: int = 0) -> "LatencySummary":
        return cls(count=0, uncommitted=uncommitted, empty=True)

    def mean(self, stage: str) -> float:
        if self.empty:
            return float("nan")
        return self.stages[stage].mean

    def median(self, stage: str) -> float:
        if self.empty:
            return float("nan")
        return self.stages[stage].p50


def commit_rule_mix(rules: Iterable[CommitRule]) -> dict[str, float]:
    rules = list(rules)
    if not rules:
        return {rule.value: 0.0 for rule in CommitRule}
    return {rule.value: sum(1 for r in rules if r is rule) / len(rules) for rule in CommitRule}


def aggregate(
    timelines: Iterable[TxnTimeline],
    segments: Optional[Iterable[LogSegment]] = None,
    uncommitted: int = 0,
) -> LatencySummary:
    """Mean and quartiles per stage; the commit-rule mix counts anchors when
    `segments` are given, otherwise the rule that committed each txn."""
    timelines = list(timelines)
    if not timelines:
        return LatencySummary.empty_summary(uncommitted)

    stages = {stage: StageStats.from_values([getattr(t, stage) for t in timelines]) for stage in STAGES}
    rules = [s.via for s in segments] if segments is not None else [t.commit_rule for t in timelines]
    return LatencySummary(
        count=len(timelines),
        stages=stages,
        non_anchor_anchoring=StageStats.from_values([t.anchoring for t in timelines if not t.is_anchor]),
        interleave_wait=StageStats.from_values([t.interleave_wait for t in timelines]),
        commit_rule_mix=commit_rule_mix(rules),
        uncommitted=uncommitted,
    )


def anchor_segments(trace: RunTrace) -> list[LogSegment]:
    """Committed anchors as seen by the lowest-indexed correct replica."""
    if not trace.correct:
        return []
    return list(trace.segments.get(trace.correct[0], []))


def summarize(trace: RunTrace) -> LatencySummary:
    decomposition = decompose(trace)
    return aggregate(decomposition.timelines, anchor_segments(trace), len(decomposition.uncommitted))


def format_summary(summary: LatencySummary, title: str = "") -> str:
    """Human-readable latency table."""
    lines = [title] if title else []
    if summary.empty:
        lines.append(f"  (no committed transactions; {summary.uncommitted} uncommitted)")
        return "\n".join(lines)

    lines.append(f"  {'stage':<22}{'mean':>9}{'p25':>9}{'p50':>9}{'p75':>9}")
    rows = [(stage, summary.stages[stage]) for stage in STAGES]
    if summary.non_anchor_anchoring is not None:
        rows.append(("anchoring (non-anchor)", summary.non_anchor_anchoring))
    if summary.interleave_wait is not None:
        rows.append(("interleave wait", summary.interleave_wait))
    for name, s in rows:
        lines.append(f"  {name:<22}{s.mean:>9.3f}{s.p25:>9.3f}{s.p50:>9.3f}{s.p75:>9.3f}")
    mix = ", ".join(f"{rule} {share:.1%}" for rule, share in summary.commit_rule_mix.items())
    lines.append(f"  committed txns: {summary.count}, uncommitted: {summary.uncommitted}")
    lines.append(f"  commit rules: {mix}")
    return "\n".join(lines)


def format_comparison(summaries: dict[str, LatencySummary]) -> str:
    """Stage means side by side, one row per label."""
    header = f"{'run':<16}{'queuing':>10}{'anchoring':>11}{'anchor_commit':>15}{'total':>9}{'fast':>8}"
    lines = [header, "-" * len(header)]
    for label, s in summaries.items():
        if s.empty:
            lines.append(f"{label:<16}{'(empty)':>10}")
            continue
        fast = s.commit_rule_mix.get(CommitRule.FAST_DIRECT.value, 0.0)
        lines.append(
            f"{label:<16}{s.mean('queuing'):>10.3f}{s.mean('anchoring'):>11.3f}"
            f"{s.mean('anchor_commit'):>15.3f}{s.mean('total'):>9.3f}{fast:>8.1%}"
        )
    return "\n".join(lines)
