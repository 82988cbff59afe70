"""Per-replica view of one certified, round-based DAG.

Implements the four-step certification procedure (propose, vote, certify,
insert), weak-vote bookkeeping for the fast commit rule, and round advancement
with an optional round timeout. Every method is a synchronous transition driven
by the simulator's event loop.
"""

from __future__ import annotations

import logging
from collections import deque
from typing import Iterable, Optional

import numpy as np

from .errors import HistoryUnavailable, MalformedProposal, ProtocolViolation, RoundNotReady
from .types import (
    Certificate,
    DagDelta,
    DagNode,
    NodeKey,
    NodeProposal,
    ReplicaId,
    TxnId,
    Vote,
)

logger = logging.getLogger(__name__)

# Slack for float comparisons of simulated time.
TIME_EPSILON = 1e-9


class LocalDag:
    """One replica's copy of one DAG instance."""

    def __init__(
        self,
        n: int,
        f: int,
        replica: ReplicaId,
        dag_id: int = 0,
        history_window: int = 100,
    ):
        """
        Initialize an empty DAG at round 0.

        Args:
            n: Number of replicas (3f + 1)
            f: Fault tolerance threshold
            replica: Identity of the replica owning this view
            dag_id: Index of this DAG among the k staggered instances
            history_window: Rounds retained below the latest committed anchor
        """
        if n != 3 * f + 1:
            raise ValueError(f"n must equal 3f+1, got n={n}, f={f}")
        self.n = n
        self.f = f
        self.quorum = n - f
        self.replica = replica
        self.dag_id = dag_id
        self.history_window = history_window

        self.nodes: dict[NodeKey, DagNode] = {}
        self.rounds: dict[int, dict[ReplicaId, DagNode]] = {}
        self.inserted_at: dict[NodeKey, float] = {}
        self.weak_votes: dict[NodeKey, set[ReplicaId]] = {}
        self.seen_proposals: dict[NodeKey, str] = {}

        self.current_round = 0
        self.round_entered_at = 0.0
        self.proposed_rounds: set[int] = set()
        self.floor = 0  # rounds below this are compacted

        # Certification state for proposals authored here, keyed by digest
        self.my_proposals: dict[str, NodeProposal] = {}
        self.votes: dict[str, set[ReplicaId]] = {}
        self.certified: set[str] = set()

        # Certified nodes waiting on missing parents
        self.buffered: dict[NodeKey, DagNode] = {}
        self.buffered_at: dict[NodeKey, float] = {}
        self.waiting_on: dict[NodeKey, set[NodeKey]] = {}

        self.txn_proposed_at: dict[TxnId, float] = {}
        self.faults: list[str] = []

    # ------------------------------------------------------------------
    # Step 1: propose
    # ------------------------------------------------------------------

    def create_proposal(
        self,
        batch: Iterable[TxnId],
        now: float,
        nonce: int = 0,
        max_parents: Optional[int] = None,
        rng: Optional[np.random.Generator] = None,
    ) -> NodeProposal:
        """Build this replica's proposal for the current round.

        Parents are every certificate held for the previous round (at least
        n - f), or the first `max_parents` of them by arrival when capped.
        Records the proposal time of every included transaction.
        """
        r = self.current_round
        if r in self.proposed_rounds:
            raise RoundNotReady(f"replica {self.replica} already proposed in round {r}")

        if r == 0:
            parents = frozenset()
        else:
            prev = self.rounds.get(r - 1, {})
            if len(prev) < self.quorum:
                raise RoundNotReady(
                    f"round not ready: {len(prev)} certificates in round {r - 1}, need {self.quorum}"
                )
            held = list(prev.values())
            if max_parents is not None and len(held) > max_parents:
                held = self.first_arrivals(r - 1, max(max_parents, self.quorum), rng)
            parents = frozenset(node.certificate.ref for node in held)

        proposal = NodeProposal(
            round=r,
            source=self.replica,
            batch=tuple(batch),
            parents=parents,
            dag_id=self.dag_id,
            nonce=nonce,
        )
        self.proposed_rounds.add(r)
        self.my_proposals[proposal.digest] = proposal
        for txn in proposal.batch:
            self.txn_proposed_at.setdefault(txn, now)
        logger.debug("R%d d%d proposes round %d with %d parents, %d txns",
                     self.replica, self.dag_id, r, len(parents), len(proposal.batch))
        return proposal

    def register_variant(self, proposal: NodeProposal):
        """Track an extra self-authored proposal so its votes can be certified."""
        self.my_proposals[proposal.digest] = proposal

    # ------------------------------------------------------------------
    # Step 2: vote (and record weak votes)
    # ------------------------------------------------------------------

    def validate_proposal(self, p: NodeProposal):
        if p.dag_id != self.dag_id:
            raise MalformedProposal(f"proposal for dag {p.dag_id} delivered to dag {self.dag_id}")
        if not 0 <= p.source < self.n:
            raise MalformedProposal(f"unknown source {p.source}")
        if p.round == 0:
            if p.parents:
                raise MalformedProposal("round 0 proposal with parents")
            return
        if not self.quorum <= len(p.parents) <= self.n:
            raise MalformedProposal(f"round {p.round} proposal with {len(p.parents)} parents")
        if len(p.parent_keys) != len(p.parents):
            raise MalformedProposal("parents name duplicate sources")
        for parent in p.parents:
            if parent.round != p.round - 1 or not 0 <= parent.source < self.n:
                raise MalformedProposal(f"parent {parent.key} not in round {p.round - 1}")

    def on_receive_proposal(self, p: NodeProposal) -> Optional[Vote]:
        """Vote for the first proposal seen from (round, source).

        Voting does not require the proposal's causal history to be held locally.
        """
        try:
            self.validate_proposal(p)
        except MalformedProposal as e:
            logger.warning("R%d d%d rejects proposal from R%d: %s", self.replica, self.dag_id, p.source, e)
            return None

        key = p.key
        if p.round < self.floor:
            return None
        seen = self.seen_proposals.get(key)
        if seen is not None:
            if seen != p.digest:
                fault = f"equivocation by R{p.source} in round {p.round} (dag {self.dag_id})"
                self.faults.append(fault)
                logger.warning("R%d observed %s", self.replica, fault)
            return None

        self.seen_proposals[key] = p.digest
        for parent_key in p.parent_keys:
            self.weak_votes.setdefault(parent_key, set()).add(p.source)
        return Vote(round=p.round, source=p.source, digest=p.digest, voter=self.replica, dag_id=self.dag_id)

    # ------------------------------------------------------------------
    # Step 3: certify
    # ------------------------------------------------------------------

    def on_receive_vote(self, v: Vote) -> Optional[Certificate]:
        """Collect votes for an own proposal; emit the certificate once at n - f."""
        proposal = self.my_proposals.get(v.digest)
        if proposal is None or v.digest in self.certified:
            return None
        voters = self.votes.setdefault(v.digest, set())
        voters.add(v.voter)
        if len(voters) < self.quorum:
            return None
        self.certified.add(v.digest)
        return Certificate(
            round=proposal.round,
            source=proposal.source,
            digest=proposal.digest,
            signers=frozenset(voters),
            dag_id=self.dag_id,
        )

    # ------------------------------------------------------------------
    # Step 4: insert
    # ------------------------------------------------------------------

    def has_node(self, key: NodeKey) -> bool:
        """True if `key` is inserted or lies below the compaction floor."""
        return key in self.nodes or key[0] < self.floor

    def on_receive_certificate(self, node: DagNode, now: float = 0.0) -> DagDelta:
        """Insert a certified node, buffering it while parents are missing."""
        cert = node.certificate
        if len(cert.signers) < self.quorum or not node.is_consistent() or cert.dag_id != self.dag_id:
            logger.warning("R%d d%d drops invalid certificate for %s", self.replica, self.dag_id, node.key)
            return DagDelta()

        key = node.key
        if key[0] < self.floor:
            return DagDelta()
        existing = self.nodes.get(key) or self.buffered.get(key)
        if existing is not None:
            if existing.digest != node.digest:
                raise ProtocolViolation(
                    f"conflicting certified nodes at round {key[0]} source {key[1]} "
                    f"(dag {self.dag_id}): {existing.digest} vs {node.digest}"
                )
            return DagDelta()

        missing = [pk for pk in node.parent_keys if not self.has_node(pk)]
        if missing:
            self.buffered[key] = node
            self.buffered_at.setdefault(key, now)
            fetch = []
            for pk in missing:
                self.waiting_on.setdefault(pk, set()).add(key)
                if pk not in self.buffered:
                    fetch.append(pk)
            return DagDelta(fetch=sorted(fetch))

        delta = DagDelta()
        self._insert(node, now, delta)
        return delta

    def _insert(self, node: DagNode, now: float, delta: DagDelta):
        stack = [node]
        while stack:
            current = stack.pop()
            key = current.key
            self.buffered.pop(key, None)
            self.buffered_at.pop(key, None)
            self.nodes[key] = current
            self.rounds.setdefault(key[0], {})[key[1]] = current
            self.inserted_at[key] = now
            delta.inserted.append(current)
            for child_key in sorted(self.waiting_on.pop(key, ())):
                child = self.buffered.get(child_key)
                if child is not None and all(self.has_node(pk) for pk in child.parent_keys):
                    stack.append(child)

    def missing_parents(self) -> list[NodeKey]:
        """Parents that buffered nodes still wait for and nobody has delivered."""
        return sorted(k for k in self.waiting_on if not self.has_node(k) and k not in self.buffered)

    # ------------------------------------------------------------------
    # Round advancement
    # ------------------------------------------------------------------

    def certs_in_round(self, r: int) -> int:
        return len(self.rounds.get(r, {}))

    def try_advance_round(self, now: float, timeout: float = 0.0) -> Optional[int]:
        """Enter the next round once n - f certificates of the current round are held.

        With a timeout, also wait until either all n certificates arrived or the
        timeout (measured from round entry) expired.
        """
        count = self.certs_in_round(self.current_round)
        if count < self.quorum:
            return None
        if timeout > 0 and count < self.n and now - self.round_entered_at < timeout - TIME_EPSILON:
            return None
        self.current_round += 1
        self.round_entered_at = now
        return self.current_round

    def timeout_deadline(self, timeout: float) -> float:
        return self.round_entered_at + timeout

    # ------------------------------------------------------------------
    # Queries
    # ------------------------------------------------------------------

    def highest_round(self) -> int:
        return max(self.rounds) if self.rounds else -1

    def first_arrivals(self, r: int, count: int, rng: Optional[np.random.Generator] = None) -> list[DagNode]:
        """The `count` earliest inserted certificates of round `r`.

        Certificates inserted at the same instant are ranked by a permutation
        drawn from `rng`, or by delivery order without one.
        """
        held = list(self.rounds.get(r, {}).values())
        ties = rng.permutation(len(held)) if rng is not None else np.arange(len(held))
        ranked = sorted(range(len(held)), key=lambda i: (self.inserted_at[held[i].key], int(ties[i])))
        return [held[i] for i in ranked[:count]]

    def links_to(self, key: NodeKey) -> int:
        """Number of certified next-round nodes listing `key` as a parent."""
        return sum(1 for node in self.rounds.get(key[0] + 1, {}).values() if key in node.parent_keys)

    def weak_vote_count(self, key: NodeKey) -> int:
        return len(self.weak_votes.get(key, ()))

    def history_keys(self, key: NodeKey, exclude: Optional[set[NodeKey]] = None) -> set[NodeKey]:
        """Keys reachable from `key` (inclusive), not descending into `exclude`.

        Raises HistoryUnavailable when an ancestor above the floor is missing.
        """
        exclude = exclude or set()
        if key in exclude:
            return set()
        if key not in self.nodes:
            raise HistoryUnavailable([key])
        seen = {key}
        queue = deque([key])
        missing = []
        while queue:
            node = self.nodes[queue.popleft()]
            for pk in node.parent_keys:
                if pk in seen or pk in exclude or pk[0] < self.floor:
                    continue
                if pk not in self.nodes:
                    missing.append(pk)
                    continue
                seen.add(pk)
                queue.append(pk)
        if missing:
            raise HistoryUnavailable(sorted(set(missing)))
        return seen

    def causal_history(self, key: NodeKey) -> list[DagNode]:
        """All retained ancestors of `key` and the node itself, ordered by (round, source)."""
        return [self.nodes[k] for k in sorted(self.history_keys(key))]

    def reaches(self, start: NodeKey, target: NodeKey) -> bool:
        """True if `target` is in the causal history of `start`."""
        if start == target:
            return True
        if start not in self.nodes:
            raise HistoryUnavailable([start])
        seen = {start}
        queue = deque([start])
        while queue:
            node = self.nodes[queue.popleft()]
            for pk in node.parent_keys:
                if pk == target:
                    return True
                if pk in seen or pk[0] <= target[0] or pk[0] < self.floor:
                    continue
                if pk not in self.nodes:
                    raise HistoryUnavailable([pk])
                seen.add(pk)
                queue.append(pk)
        return False

    # ------------------------------------------------------------------
    # Bounded history
    # ------------------------------------------------------------------

    def compact(self, committed_round: int, now: float = 0.0) -> DagDelta:
        """Drop rounds more than `history_window` below the latest committed anchor.

        The floor is a function of the committed anchor sequence alone. Buffered
        nodes left waiting only on compacted parents are inserted.
        """
        delta = DagDelta()
        floor = committed_round - self.history_window
        if floor <= self.floor:
            return delta
        for r in [r for r in self.rounds if r < floor]:
            for source in self.rounds.pop(r):
                self.nodes.pop((r, source), None)
                self.inserted_at.pop((r, source), None)
        for table in (self.weak_votes, self.seen_proposals, self.buffered, self.buffered_at, self.waiting_on):
            for k in [k for k in table if k[0] < floor]:
                del table[k]
        self.floor = floor

        for key in sorted(self.buffered):
            node = self.buffered.get(key)
            if node is not None and all(self.has_node(pk) for pk in node.parent_keys):
                self._insert(node, now, delta)
        if delta.inserted:
            logger.debug("R%d d%d compaction to round %d released %d buffered nodes",
                         self.replica, self.dag_id, floor, len(delta.inserted))
        return delta
