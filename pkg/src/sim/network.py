"""Discrete-event network: seeded delays, drops with retransmission, crashes, GST.

Time is measured in message delays (md). Events at equal times are delivered
in scheduling order; a broadcast schedules destinations in index order.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

import numpy as np

from ..protocol.types import NodeProposal
from .scenario import Scenario

logger = logging.getLogger(__name__)

MAX_RETRANSMITS = 64


@dataclass(order=True)
class SimEvent:
    """One timestamped delivery to replica `dst`."""

    deliver_at: float
    seq: int
    dst: int = field(compare=False)
    kind: str = field(compare=False)
    payload: Any = field(default=None, compare=False)
    src: Optional[int] = field(default=None, compare=False)


class EventQueue:
    """Min-heap of SimEvents ordered by (time, insertion sequence)."""

    def __init__(self):
        self._heap: list[SimEvent] = []
        self._seq = 0

    def push(self, deliver_at: float, dst: int, kind: str, payload: Any = None, src: Optional[int] = None) -> SimEvent:
        event = SimEvent(deliver_at, self._seq, dst, kind, payload, src)
        self._seq += 1
        heapq.heappush(self._heap, event)
        return event

    def pop(self) -> SimEvent:
        return heapq.heappop(self._heap)

    def peek_time(self) -> Optional[float]:
        return self._heap[0].deliver_at if self._heap else None

    def __len__(self) -> int:
        return len(self._heap)


class Network:
    """Partial-synchrony adversary shared by every replica of one run."""

    def __init__(
        self,
        scenario: Scenario,
        queue: EventQueue,
        delay_rng: np.random.Generator,
        drop_rng: np.random.Generator,
    ):
        """
        Initialize the network from a resolved scenario.

        Args:
            scenario: Resolved, validated scenario
            queue: Event queue all deliveries are scheduled on
            delay_rng: Stream for uniform and pre-GST delays
            drop_rng: Stream for Bernoulli drop draws
        """
        self.scenario = scenario
        self.queue = queue
        self.delay_rng = delay_rng
        self.drop_rng = drop_rng
        self.crashed_at: dict[int, float] = {}
        self.sent = 0
        self.dropped = 0
        self.suppressed = 0
        for replica, t in scenario.crashes:
            self.crash(replica, t)

    # ------------------------------------------------------------------
    # Adversary
    # ------------------------------------------------------------------

    def crash(self, replica: int, t: float):
        """Silence every send of `replica` from time `t` on."""
        self.crashed_at[replica] = min(t, self.crashed_at.get(replica, t))

    def is_crashed(self, replica: int, t: float) -> bool:
        crash_t = self.crashed_at.get(replica)
        return crash_t is not None and t >= crash_t

    def drop_filter(self, src: int, dst: int) -> bool:
        """Bernoulli(drop_rate) on the egress of the configured replicas."""
        sc = self.scenario
        if src == dst or sc.drop_rate <= 0:
            return False
        if sc.drop_replicas and src not in sc.drop_replicas:
            return False
        return bool(self.drop_rng.random() < sc.drop_rate)

    def delay(self, src: int, dst: int, now: float) -> float:
        if src == dst:
            return 0.0
        sc = self.scenario
        if sc.delay == "uniform":
            lo, hi = sc.delay_range
            base = float(self.delay_rng.uniform(lo, hi))
        elif sc.delay == "matrix":
            base = sc.delay_matrix[src][dst]
        else:
            base = sc.delay_value
        if now < sc.gst and sc.pre_gst_cap > 0:
            base += float(self.delay_rng.uniform(0.0, sc.pre_gst_cap))
        return base

    # ------------------------------------------------------------------
    # Sending
    # ------------------------------------------------------------------

    def send(self, src: int, dst: int, kind: str, payload: Any, now: float) -> Optional[SimEvent]:
        """Schedule one point-to-point message, retransmitting dropped copies."""
        if self.is_crashed(src, now):
            self.suppressed += 1
            return None
        t = now
        attempts = 0
        while attempts < MAX_RETRANSMITS and self.drop_filter(src, dst):
            self.dropped += 1
            attempts += 1
            t += self.scenario.retransmit_interval
        if self.is_crashed(src, t):
            self.suppressed += 1
            return None
        self.sent += 1
        return self.queue.push(t + self.delay(src, dst, t), dst, kind, payload, src)

    def broadcast(self, src: int, kind: str, payload: Any, now: float, dsts: Optional[Iterable[int]] = None):
        targets = range(self.scenario.n) if dsts is None else sorted(dsts)
        for dst in targets:
            self.send(src, dst, kind, payload, now)

    def schedule_local(self, replica: int, at: float, kind: str, payload: Any = None) -> SimEvent:
        """Timers and client submissions; never dropped or delayed."""
        return self.queue.push(at, replica, kind, payload)


def equivocate(proposal: NodeProposal, quorum: int) -> tuple[NodeProposal, NodeProposal]:
    """Two digest-distinct proposals for the same (round, source) slot.

    The second variant drops the lowest parent when more than a quorum is held,
    otherwise it differs in its nonce.
    """
    if len(proposal.parents) > quorum:
        kept = frozenset(sorted(proposal.parents)[1:])
        variant = NodeProposal(
            round=proposal.round,
            source=proposal.source,
            batch=proposal.batch,
            parents=kept,
            dag_id=proposal.dag_id,
            nonce=proposal.nonce,
        )
    else:
        variant = NodeProposal(
            round=proposal.round,
            source=proposal.source,
            batch=proposal.batch,
            parents=proposal.parents,
            dag_id=proposal.dag_id,
            nonce=proposal.nonce + 1,
        )
    return proposal, variant


def split_halves(n: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Destination halves for the two equivocation variants."""
    half = n // 2
    return tuple(range(half)), tuple(range(half, n))
