"""Staggered parallel DAGs interleaved into one global log.

Each DAG instance runs in isolation; the orchestrator assigns incoming
transactions to the DAG that proposes soonest and appends per-DAG segments to
the global log in strict round-robin order.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .commit_engine import CommitEngine
from .dag_core import LocalDag
from .types import LogSegment, TxnId

logger = logging.getLogger(__name__)

MAX_DAGS = 8
NOMINAL_ROUND_MD = 3.0   # propose, vote, certificate
ROUND_ESTIMATE_ALPHA = 0.3


@dataclass(frozen=True)
class StaggerConfig:
    """k parallel DAGs, instance i starting at i * offset."""

    k: int = 3
    offset: float = 1.0

    def __post_init__(self):
        if not 1 <= self.k <= MAX_DAGS:
            raise ValueError(f"k must be in [1, {MAX_DAGS}], got {self.k}")
        if self.offset < 0:
            raise ValueError(f"offset must be non-negative, got {self.offset}")

    def start_time(self, dag_id: int) -> float:
        return dag_id * self.offset


@dataclass
class GlobalLog:
    """Round-robin interleave of per-DAG segment streams."""

    k: int
    segments: list[tuple[int, LogSegment]] = field(default_factory=list)
    appended_at: list[float] = field(default_factory=list)
    next_dag: int = 0
    txns: list[TxnId] = field(default_factory=list)
    _seen: set[TxnId] = field(default_factory=set, repr=False)

    def append(self, dag_id: int, segment: LogSegment, now: float) -> tuple[TxnId, ...]:
        """Append a segment; returns the transactions it newly contributes."""
        fresh = tuple(t for t in segment.txns if t not in self._seen)
        self._seen.update(fresh)
        self.txns.extend(fresh)
        self.segments.append((dag_id, segment))
        self.appended_at.append(now)
        return fresh


def advance_global_log(
    gl: GlobalLog, ready: Sequence[deque], now: float = 0.0
) -> list[tuple[int, LogSegment]]:
    """Append ready segments while the DAG whose turn it is has one."""
    appended = []
    while ready[gl.next_dag]:
        dag_id = gl.next_dag
        segment = ready[dag_id].popleft()
        gl.append(dag_id, segment, now)
        appended.append((dag_id, segment))
        gl.next_dag = (dag_id + 1) % gl.k
    return appended


class DagInstance:
    """One replica's DAG, its commit engine, and its pending batch."""

    def __init__(self, dag: LocalDag, engine: CommitEngine, start_time: float, round_timeout: float = 0.0):
        self.dag = dag
        self.engine = engine
        self.start_time = start_time
        self.round_timeout = round_timeout
        self.started = False
        self.pending: list[TxnId] = []
        self.ready: deque[LogSegment] = deque()
        self.last_proposal_at: Optional[float] = None
        self.round_estimate = NOMINAL_ROUND_MD
        self.timer_round = -1

    @property
    def dag_id(self) -> int:
        return self.dag.dag_id

    def next_proposal_estimate(self, now: float) -> float:
        if self.last_proposal_at is None:
            return max(now, self.start_time)
        return max(now, self.last_proposal_at + self.round_estimate)

    def take_batch(self) -> list[TxnId]:
        batch, self.pending = self.pending, []
        return batch

    def note_proposal(self, now: float):
        if self.last_proposal_at is not None:
            observed = now - self.last_proposal_at
            self.round_estimate += ROUND_ESTIMATE_ALPHA * (observed - self.round_estimate)
        self.last_proposal_at = now


class MultiDag:
    """Per-replica orchestrator over k staggered DAG instances."""

    def __init__(self, instances: list[DagInstance]):
        self.instances = instances
        self.global_log = GlobalLog(k=len(instances))
        self.submitted_at: dict[TxnId, float] = {}
        self.assignment: dict[TxnId, int] = {}

    @property
    def k(self) -> int:
        return len(self.instances)

    def submit_txn(self, txn: TxnId, now: float) -> int:
        """Queue `txn` on the DAG with the soonest proposal opportunity."""
        dag_id = min(range(self.k), key=lambda d: (self.instances[d].next_proposal_estimate(now), d))
        self.instances[dag_id].pending.append(txn)
        self.submitted_at[txn] = now
        self.assignment[txn] = dag_id
        return dag_id

    def collect(self, dag_id: int, now: float) -> list[LogSegment]:
        """Drain newly decided segments of one DAG into its ready queue."""
        instance = self.instances[dag_id]
        segments = instance.engine.drain(now)
        instance.ready.extend(segments)
        return segments

    def advance_global_log(self, now: float) -> list[tuple[int, LogSegment]]:
        return advance_global_log(self.global_log, [inst.ready for inst in self.instances], now)
