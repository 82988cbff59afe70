"""Consensus embedded in one DAG.

Anchors are resolved one at a time by one-shot Bullshark instances, raced
against the fast direct commit rule (2f+1 weak votes). Each resolved anchor
orders its not-yet-ordered causal history as one LogSegment.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

from .dag_core import LocalDag
from .errors import HistoryUnavailable
from .modes import get_protocol_spec
from .reputation import DEFAULT_REPUTATION_WINDOW, AnchorSchedule, ScoreBoard, update_scores
from .types import AnchorRef, AnchorResolution, CommitRule, LogSegment, NodeKey

logger = logging.getLogger(__name__)


@dataclass
class CommitState:
    """Scan position of next_ordered_nodes; the first scan step enters round 0."""

    round: int = -1
    anchors: list[AnchorRef] = field(default_factory=list)
    last_committed: Optional[AnchorRef] = None
    ordered_set: set[NodeKey] = field(default_factory=set)
    candidate: Optional[AnchorRef] = None
    instance: Optional["BullsharkInstance"] = None


class BullsharkInstance:
    """Tentative anchor schedule of one instance: start, then every other round.

    Follow-up anchors are the first candidate of get_anchors(start.round + 2j),
    evaluated against the scoreboard as it was when the instance started.
    """

    def __init__(self, start: AnchorRef, schedule: AnchorSchedule, scores: ScoreBoard):
        self.start = start
        self.schedule = schedule
        self.scores = scores
        self._anchors: dict[int, Optional[AnchorRef]] = {0: start}

    def anchor_at(self, j: int) -> Optional[AnchorRef]:
        if j not in self._anchors:
            vector = self.schedule.get_anchors(self.start.round + 2 * j, self.scores)
            self._anchors[j] = vector[0] if vector else None
        return self._anchors[j]


class CommitEngine:
    """Commit rules and the ordering driver for one LocalDag."""

    def __init__(
        self,
        dag: LocalDag,
        protocol: str = "shoalpp",
        reputation_window: int = DEFAULT_REPUTATION_WINDOW,
        fast_quorum: Optional[int] = None,
    ):
        """
        Initialize the engine at round 0 with an empty scoreboard.

        Args:
            dag: The DAG this engine orders
            protocol: "bullshark", "shoal" or "shoalpp"
            reputation_window: Committed rounds counted by the scoreboard
            fast_quorum: Weak votes needed by the fast rule (default 2f+1)
        """
        spec = get_protocol_spec(protocol)
        self.dag = dag
        self.protocol = protocol
        self.fast_enabled = spec["fast_commit"]
        self.direct_quorum = dag.f + 1
        self.fast_quorum = fast_quorum if fast_quorum is not None else 2 * dag.f + 1
        self.schedule = AnchorSchedule(protocol, dag.n, dag.dag_id)
        self.scores = ScoreBoard(dag.n, reputation_window)
        self.state = CommitState()

        self.segments: list[LogSegment] = []
        self.resolutions: list[AnchorResolution] = []
        self.fast_fired: set[AnchorRef] = set()
        self.skipped: set[AnchorRef] = set()
        self.via_consistent = True

    # ------------------------------------------------------------------
    # Commit rules
    # ------------------------------------------------------------------

    def direct_commit_check(self, a: AnchorRef) -> bool:
        """f+1 certified next-round nodes link to the anchor."""
        return self.dag.links_to(a.key) >= self.direct_quorum

    def fast_commit_check(self, a: AnchorRef) -> bool:
        """2f+1 distinct next-round proposals (weak votes) link to the anchor."""
        return self.dag.weak_vote_count(a.key) >= self.fast_quorum

    def _direct_rule(self, a: AnchorRef, allow_fast: bool) -> Optional[CommitRule]:
        if allow_fast and self.fast_commit_check(a):
            return CommitRule.FAST_DIRECT
        if self.direct_commit_check(a):
            return CommitRule.DIRECT
        return None

    def run_bullshark(
        self, start: AnchorRef, instance: Optional[BullsharkInstance] = None
    ) -> Optional[AnchorResolution]:
        """Resolve the first anchor ordered by the instance starting at `start`.

        Returns None while undecided or while the histories needed to decide
        are still being fetched.
        """
        instance = instance or BullsharkInstance(start, self.schedule, self.scores)
        top = self.dag.highest_round()

        decided = None
        j = 0
        while start.round + 2 * j <= top:
            a = instance.anchor_at(j)
            if a is not None:
                rule = self._direct_rule(a, allow_fast=self.fast_enabled and j > 0)
                if rule is not None:
                    decided = (j, a, rule)
                    break
            j += 1
        if decided is None:
            return None

        j, current, rule = decided
        committed = [(current, rule)]
        skipped = []
        try:
            for i in range(j - 1, -1, -1):
                a = instance.anchor_at(i)
                if a is None:
                    continue
                if self.dag.reaches(current.key, a.key):
                    committed.append((a, CommitRule.INDIRECT))
                    current = a
                else:
                    skipped.append(a)
        except HistoryUnavailable:
            return None

        first, via = committed[-1]
        before = tuple(sorted(a for a in skipped if a.round < first.round))
        return AnchorResolution(committed=first, via=via, skipped=before)

    # ------------------------------------------------------------------
    # Ordering
    # ------------------------------------------------------------------

    def order_segment(
        self,
        a: AnchorRef,
        now: float,
        via: CommitRule = CommitRule.DIRECT,
        skipped: tuple[AnchorRef, ...] = (),
    ) -> LogSegment:
        """Causal history of `a` minus already ordered nodes, as a segment.

        Raises HistoryUnavailable while part of the history is missing.
        """
        keys = sorted(self.dag.history_keys(a.key, exclude=self.state.ordered_set))
        txns = []
        seen = set()
        for key in keys:
            for txn in self.dag.nodes[key].batch:
                if txn not in seen:
                    seen.add(txn)
                    txns.append(txn)
        return LogSegment(
            anchor=a,
            txns=tuple(txns),
            nodes=tuple(keys),
            commit_time=now,
            via=via,
            dag_id=self.dag.dag_id,
            skipped=skipped,
        )

    def skip_to(self, a: AnchorRef):
        """Jump the scan to `a`'s round; its round's other candidates stay pending."""
        cs = self.state
        cs.round = a.round
        cs.anchors = [x for x in self.schedule.get_anchors(a.round, self.scores) if x != a]

    def next_ordered_nodes(self, now: float) -> Optional[LogSegment]:
        """Return the next segment, or None while the current candidate is undecided."""
        cs = self.state
        while True:
            if cs.candidate is None:
                if not cs.anchors:
                    cs.round += 1
                    cs.anchors = self.schedule.get_anchors(cs.round, self.scores)
                    continue
                cs.candidate = cs.anchors.pop(0)
                if cs.candidate.key in cs.ordered_set:
                    cs.candidate = None
                    continue
                cs.instance = BullsharkInstance(cs.candidate, self.schedule, self.scores)

            candidate = cs.candidate
            if self.fast_enabled and self.fast_commit_check(candidate):
                resolution = AnchorResolution(committed=candidate, via=CommitRule.FAST_DIRECT)
            else:
                resolution = self.run_bullshark(candidate, cs.instance)
            if resolution is None:
                return None

            decided = resolution.committed
            try:
                segment = self.order_segment(decided, now, resolution.via, resolution.skipped)
            except HistoryUnavailable:
                return None

            if resolution.via is CommitRule.FAST_DIRECT and decided == candidate:
                self.fast_fired.add(candidate)
            self.skipped.update(resolution.skipped)
            if decided != candidate:
                self.skip_to(decided)
            cs.candidate = None
            cs.instance = None
            if not segment.nodes:
                continue
            self._emit(segment, resolution)
            return segment

    def _emit(self, segment: LogSegment, resolution: AnchorResolution):
        cs = self.state
        cs.ordered_set.update(segment.nodes)
        cs.last_committed = segment.anchor
        self.scores = update_scores(self.scores, segment)
        self.segments.append(segment)
        self.resolutions.append(resolution)

        if resolution.via is CommitRule.DIRECT:
            self.via_consistent &= self.direct_commit_check(segment.anchor)
        elif resolution.via is CommitRule.FAST_DIRECT:
            self.via_consistent &= self.fast_commit_check(segment.anchor)

        self.dag.compact(segment.anchor.round, segment.commit_time)
        floor = self.dag.floor
        if floor and len(cs.ordered_set) > 4 * self.dag.n * self.dag.history_window:
            cs.ordered_set = {k for k in cs.ordered_set if k[0] >= floor}

        logger.debug("R%d d%d commits %s via %s (%d nodes, %d txns, skipped %s)",
                     self.dag.replica, self.dag.dag_id, segment.anchor, resolution.via.value,
                     len(segment.nodes), len(segment.txns), [str(s) for s in resolution.skipped])

    def drain(self, now: float) -> list[LogSegment]:
        """Pull every segment decidable at `now`."""
        out = []
        while True:
            segment = self.next_ordered_nodes(now)
            if segment is None:
                return out
            out.append(segment)
