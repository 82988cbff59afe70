"""Everything a run leaves behind for the oracles and the latency metrics."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

from ..protocol.types import AnchorRef, DagNode, LogSegment, NodeProposal
from .scenario import Scenario

SlotKey = tuple[int, int, int]  # (dag_id, round, source)
BufferedEntry = tuple[int, tuple[int, int], float]  # (dag_id, key, buffered since)


@dataclass
class TxnStamp:
    """Submission and proposal stamps of one transaction at its replica."""

    txn_id: int
    replica: int
    submit_t: float
    dag_id: int
    proposed_t: Optional[float] = None
    round: Optional[int] = None


@dataclass(frozen=True)
class GlobalEntry:
    """One segment appended to a replica's global log."""

    dag_id: int
    segment: LogSegment
    appended_at: float


@dataclass
class RunTrace:
    """Full record of one seeded run."""

    scenario: Scenario
    txns: dict[int, TxnStamp] = field(default_factory=dict)
    proposal_times: dict[SlotKey, float] = field(default_factory=dict)
    segments: dict[int, list[LogSegment]] = field(default_factory=dict)
    global_logs: dict[int, list[GlobalEntry]] = field(default_factory=dict)
    certified: dict[int, dict[SlotKey, str]] = field(default_factory=dict)
    fast_fired: dict[int, set[AnchorRef]] = field(default_factory=dict)
    skipped: dict[int, set[AnchorRef]] = field(default_factory=dict)
    via_consistent: dict[int, bool] = field(default_factory=dict)
    buffered: dict[int, list[BufferedEntry]] = field(default_factory=dict)
    faults: list[str] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)
    events: list[tuple[float, int, str, Optional[int]]] = field(default_factory=list)
    end_time: float = 0.0
    messages_sent: int = 0
    messages_dropped: int = 0

    @property
    def seed(self) -> int:
        return self.scenario.seed

    @property
    def correct(self) -> tuple[int, ...]:
        return self.scenario.correct

    # ------------------------------------------------------------------
    # Recording
    # ------------------------------------------------------------------

    def record_event(self, at: float, dst: int, kind: str, src: Optional[int] = None):
        self.events.append((at, dst, kind, src))

    def record_submit(self, txn: int, replica: int, dag_id: int, now: float):
        self.txns[txn] = TxnStamp(txn, replica, now, dag_id)

    def record_proposal(self, proposal: NodeProposal, now: float):
        self.proposal_times.setdefault((proposal.dag_id, proposal.round, proposal.source), now)
        for txn in proposal.batch:
            stamp = self.txns.get(txn)
            if stamp is not None and stamp.proposed_t is None:
                stamp.proposed_t = now
                stamp.round = proposal.round

    def record_certified(self, replica: int, dag_id: int, node: DagNode):
        self.certified.setdefault(replica, {})[(dag_id, node.round, node.source)] = node.digest

    def record_segment(self, replica: int, segment: LogSegment):
        self.segments.setdefault(replica, []).append(segment)

    def record_global(self, replica: int, appended: list[tuple[int, LogSegment]], now: float):
        log = self.global_logs.setdefault(replica, [])
        log.extend(GlobalEntry(dag_id, segment, now) for dag_id, segment in appended)

    def record_violation(self, replica: int, message: str):
        self.violations.append(f"R{replica}: {message}")

    # ------------------------------------------------------------------
    # Queries
    # ------------------------------------------------------------------

    def segments_on(self, replica: int, dag_id: int) -> list[LogSegment]:
        return [s for s in self.segments.get(replica, []) if s.dag_id == dag_id]

    def global_txns(self, replica: int) -> list[int]:
        out, seen = [], set()
        for entry in self.global_logs.get(replica, []):
            for txn in entry.segment.txns:
                if txn not in seen:
                    seen.add(txn)
                    out.append(txn)
        return out

    def fingerprint(self) -> str:
        """Digest of every replica's segment stream and global log."""
        h = hashlib.sha256()
        for replica in sorted(self.segments):
            for s in self.segments[replica]:
                h.update(
                    f"{replica}|{s.dag_id}|{s.anchor}|{s.via.value}|{s.nodes}|{s.txns}|{s.commit_time!r}\n".encode()
                )
        for replica in sorted(self.global_logs):
            for entry in self.global_logs[replica]:
                h.update(f"{replica}|{entry.dag_id}|{entry.segment.anchor}|{entry.appended_at!r}\n".encode())
        return h.hexdigest()
