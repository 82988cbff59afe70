"""Exhaustive small-case check that a fast-committed anchor is never skipped.

Setting: n = 4, rounds 0 and 1 fully certified, anchor a in round 1. An
observer replica counts weak votes for a from the round-2 proposals it
received; a checker replica holds some certified DAG and runs the one-shot
Bullshark instance starting at a. Enumerated:

  * which round-2 proposals link a (2^4 patterns),
  * at most one faulty replica, which either equivocates in round 2 (the
    certified variant and the variant the observer saw link a independently)
    or crashes right after proposing in round 2 (observer sees the proposal,
    it is never certified),
  * every admissible parent set of the instance's round-3 anchor among the
    certified round-2 nodes.

Rounds 3 to 6 are built from every live replica, so the instance decides at
the checker: through the round-3 anchor, or through the round-5 anchor when
the round-3 one belongs to a crashed replica. A case is a counterexample when
the observer's fast rule fires for a while the checker's instance skips a.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterator, Optional

from ..protocol.commit_engine import BullsharkInstance, CommitEngine
from ..protocol.dag_core import LocalDag
from ..protocol.types import AnchorRef, AnchorResolution, Certificate, CertificateRef, DagNode, NodeProposal
from .oracles import OracleResult, fast_commit_never_skipped

logger = logging.getLogger(__name__)

N = 4
F = 1
OBSERVER = 0
CHECKER = 2
PROTOCOL = "shoalpp"
FAULT_KINDS = ("equivocate", "crash")
TOP_ROUND = 6


@dataclass(frozen=True)
class EnumerationCase:
    """One adversarial configuration."""

    links: tuple[bool, ...]                 # round-2 proposal of replica i links the anchor
    faulty: Optional[int] = None
    fault_kind: Optional[str] = None
    certified_link: Optional[bool] = None   # equivocator's certified variant links the anchor
    observer_link: Optional[bool] = None    # variant (or crashed proposal) the observer saw
    anchor_parents: tuple[int, ...] = ()    # round-2 sources the round-3 anchor references

    def __str__(self) -> str:
        fault = "fault-free" if self.faulty is None else (
            f"R{self.faulty} {self.fault_kind} (certified link={self.certified_link}, "
            f"observer link={self.observer_link})"
        )
        return f"links={list(map(int, self.links))}, {fault}, anchor parents={list(self.anchor_parents)}"


@dataclass
class EnumerationResult:
    fast_quorum: int
    cases: int = 0
    fired: int = 0
    undecided: int = 0
    counterexamples: list[EnumerationCase] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.counterexamples and not self.undecided


def _certify(proposal: NodeProposal, signers=(0, 1, 2)) -> DagNode:
    cert = Certificate(proposal.round, proposal.source, proposal.digest, frozenset(signers), proposal.dag_id)
    return DagNode(cert, proposal)


def _proposal(round: int, source: int, parents: list[DagNode], nonce: int = 0) -> NodeProposal:
    refs = frozenset(CertificateRef(p.round, p.source, p.digest) for p in parents)
    return NodeProposal(round=round, source=source, batch=(), parents=refs, nonce=nonce)


def _base_rounds() -> tuple[list[DagNode], list[DagNode]]:
    r0 = [_certify(_proposal(0, s, [])) for s in range(N)]
    r1 = [_certify(_proposal(1, s, r0)) for s in range(N)]
    return r0, r1


def _round2(source: int, link: bool, r1: list[DagNode], anchor: AnchorRef, nonce: int = 0) -> NodeProposal:
    parents = r1 if link else [p for p in r1 if p.key != anchor.key]
    return _proposal(2, source, parents, nonce)


def iter_cases() -> Iterator[EnumerationCase]:
    """All configurations except the anchor parent sets (those depend on certification)."""
    for links in itertools.product((False, True), repeat=N):
        yield EnumerationCase(links)
        for faulty in range(N):
            for kind in FAULT_KINDS:
                certified_opts = (False, True) if kind == "equivocate" else (None,)
                for certified_link in certified_opts:
                    for observer_link in (False, True):
                        yield EnumerationCase(links, faulty, kind, certified_link, observer_link)


def observer_fires(case: EnumerationCase, anchor: AnchorRef, fast_quorum: int) -> bool:
    """Feed the observer every round-2 proposal it would see; test the fast rule."""
    _, r1 = _base_rounds()
    dag = LocalDag(N, F, OBSERVER)
    engine = CommitEngine(dag, PROTOCOL, fast_quorum=fast_quorum)
    for source in range(N):
        link = case.links[source]
        if source == case.faulty:
            link = case.observer_link
        dag.on_receive_proposal(_round2(source, link, r1, anchor))
    return engine.fast_commit_check(anchor)


def checker_resolution(
    case: EnumerationCase, anchor: AnchorRef, fast_quorum: int
) -> Optional[AnchorResolution]:
    """Build the checker's certified DAG and run the instance starting at `anchor`."""
    r0, r1 = _base_rounds()
    dag = LocalDag(N, F, CHECKER)
    engine = CommitEngine(dag, PROTOCOL, fast_quorum=fast_quorum)
    for node in r0 + r1:
        dag.on_receive_certificate(node)

    round2 = {}
    for source in case.anchor_parents:
        link = case.links[source]
        if source == case.faulty:
            link = case.certified_link
        round2[source] = _certify(_round2(source, link, r1, anchor, nonce=1 if source == case.faulty else 0))
    for node in round2.values():
        dag.on_receive_certificate(node)

    live = [s for s in range(N) if not (case.fault_kind == "crash" and s == case.faulty)]
    previous = [round2[s] for s in case.anchor_parents]
    for r in range(3, TOP_ROUND + 1):
        current = [_certify(_proposal(r, s, previous)) for s in live]
        for node in current:
            dag.on_receive_certificate(node)
        previous = current

    instance = BullsharkInstance(anchor, engine.schedule, engine.scores)
    return engine.run_bullshark(anchor, instance)


def checker_skips(case: EnumerationCase, anchor: AnchorRef, fast_quorum: int) -> bool:
    resolution = checker_resolution(case, anchor, fast_quorum)
    return resolution is not None and anchor in resolution.skipped


def certified_sources(case: EnumerationCase) -> list[int]:
    if case.fault_kind == "crash":
        return [s for s in range(N) if s != case.faulty]
    return list(range(N))


def enumerate_fast_commit(fast_quorum: int = 2 * F + 1) -> EnumerationResult:
    """Run every case; collect those where a fast-committed anchor is skipped."""
    anchor = AnchorRef(1, 1)
    result = EnumerationResult(fast_quorum)
    quorum = N - F
    for base in iter_cases():
        fires = observer_fires(base, anchor, fast_quorum)
        sources = certified_sources(base)
        for size in range(quorum, len(sources) + 1):
            for parents in itertools.combinations(sources, size):
                case = EnumerationCase(
                    base.links, base.faulty, base.fault_kind, base.certified_link, base.observer_link, parents
                )
                result.cases += 1
                if not fires:
                    continue
                result.fired += 1
                resolution = checker_resolution(case, anchor, fast_quorum)
                if resolution is None:
                    result.undecided += 1
                elif anchor in resolution.skipped:
                    result.counterexamples.append(case)

    logger.info(
        "fast-commit enumeration (quorum %d): %d cases, fast rule fired in %d, %d undecided, %d counterexamples",
        fast_quorum, result.cases, result.fired, result.undecided, len(result.counterexamples),
    )
    return result


def case_oracle(case: EnumerationCase, fast_quorum: int) -> OracleResult:
    """Evaluate one case through the same oracle used on run traces."""
    anchor = AnchorRef(1, 1)
    fired = {OBSERVER: {anchor}} if observer_fires(case, anchor, fast_quorum) else {}
    skipped = {CHECKER: {anchor}} if checker_skips(case, anchor, fast_quorum) else {}
    return fast_commit_never_skipped(fired, skipped, correct=(OBSERVER, CHECKER))
