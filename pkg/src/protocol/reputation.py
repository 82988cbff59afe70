"""Leader reputation and per-round anchor candidate vectors.

Scores are derived only from committed segments, so every replica with the
same ordered prefix computes the same vectors.
"""

from __future__ import annotations

from typing import Optional

from .modes import get_protocol_spec
from .types import AnchorRef, LogSegment, ReplicaId

DEFAULT_REPUTATION_WINDOW = 10
ELIGIBILITY_THRESHOLD = 1


class ScoreBoard:
    """Per-replica activity scores over the last `window` committed rounds."""

    def __init__(
        self,
        n: int,
        window: int = DEFAULT_REPUTATION_WINDOW,
        committed: Optional[dict[int, frozenset[ReplicaId]]] = None,
        derived_from: Optional[AnchorRef] = None,
    ):
        self.n = n
        self.window = window
        self.committed = committed or {}
        self.derived_from = derived_from
        self.scores = self._compute()

    def _compute(self) -> dict[ReplicaId, int]:
        scores = {r: 0 for r in range(self.n)}
        if not self.committed:
            return scores
        # The highest committed round may still be partially ordered; leave it out.
        hi = max(self.committed)
        for rnd, sources in self.committed.items():
            if hi - self.window <= rnd < hi:
                for source in sources:
                    scores[source] += 1
        return scores

    @property
    def has_history(self) -> bool:
        return bool(self.committed)

    def updated(self, segment: LogSegment) -> "ScoreBoard":
        committed = dict(self.committed)
        for rnd, source in segment.nodes:
            committed[rnd] = committed.get(rnd, frozenset()) | {source}
        if committed:
            oldest = max(committed) - self.window - 1
            committed = {r: s for r, s in committed.items() if r >= oldest}
        return ScoreBoard(self.n, self.window, committed, segment.anchor)

    def order(self, round: int) -> list[ReplicaId]:
        """Replicas by score, equal scores rotating round-robin with the round."""
        return sorted(range(self.n), key=lambda r: (-self.scores[r], (r - round) % self.n))

    def __repr__(self) -> str:
        return f"ScoreBoard({self.scores}, derived_from={self.derived_from})"


def update_scores(sb: ScoreBoard, segment: LogSegment) -> ScoreBoard:
    """Return the scoreboard after applying the next committed segment."""
    return sb.updated(segment)


class AnchorSchedule:
    """Maps rounds to ordered anchor candidate vectors for one protocol mode."""

    def __init__(self, protocol: str, n: int, dag_id: int = 0, threshold: int = ELIGIBILITY_THRESHOLD):
        self.protocol = protocol
        self.policy = get_protocol_spec(protocol)["anchors"]
        self.n = n
        self.f = (n - 1) // 3
        self.dag_id = dag_id
        self.threshold = threshold

    def get_anchors(self, round: int, sb: ScoreBoard) -> list[AnchorRef]:
        if round < 0:
            return []
        if self.policy == "round_robin_odd":
            if round % 2 == 0:
                return []
            return [AnchorRef(round, (round // 2) % self.n, self.dag_id)]

        order = sb.order(round)
        if self.policy == "reputation_leader":
            return [AnchorRef(round, order[0], self.dag_id)]

        if not sb.has_history:
            eligible = order
        else:
            eligible = [r for r in order if sb.scores[r] >= self.threshold]
            if len(eligible) < 2 * self.f + 1:
                eligible = order[: 2 * self.f + 1]
        return [AnchorRef(round, r, self.dag_id) for r in eligible]


def get_anchors(round: int, sb: ScoreBoard, mode: str, dag_id: int = 0) -> list[AnchorRef]:
    """Eligible anchors for `round` under protocol `mode`."""
    return AnchorSchedule(mode, sb.n, dag_id).get_anchors(round, sb)
