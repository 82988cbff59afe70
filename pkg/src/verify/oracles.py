"""Safety oracles evaluated over finished run traces."""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

from ..protocol.types import AnchorRef
from ..sim.trace import RunTrace

logger = logging.getLogger(__name__)

# Txns submitted, or nodes buffered, this close to the end of a run may legitimately still be in flight.
COMPLETENESS_SLACK = 30.0


@dataclass(frozen=True)
class OracleResult:
    name: str
    passed: bool
    witness: str = ""
    seed: Optional[int] = None

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        where = f" (seed {self.seed})" if self.seed is not None else ""
        tail = f": {self.witness}" if self.witness else ""
        return f"[{status}] {self.name}{where}{tail}"


@dataclass
class OracleReport:
    results: list[OracleResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def failed(self) -> list[OracleResult]:
        return [r for r in self.results if not r.passed]

    def failing_seeds(self) -> list[int]:
        return sorted({r.seed for r in self.failed() if r.seed is not None})

    def by_name(self, name: str) -> list[OracleResult]:
        return [r for r in self.results if r.name == name]

    def format(self) -> str:
        """One line per oracle; failures list their witnesses."""
        names = list(dict.fromkeys(r.name for r in self.results))
        lines = []
        for name in names:
            results = self.by_name(name)
            bad = [r for r in results if not r.passed]
            if not bad:
                lines.append(f"[PASS] {name} ({len(results)} checked)")
            else:
                lines.append(f"[FAIL] {name} ({len(bad)}/{len(results)} failed)")
                lines.extend(f"    {r}" for r in bad[:5])
        return "\n".join(lines)


# ----------------------------------------------------------------------
# Individual oracles
# ----------------------------------------------------------------------


def _first_divergence(a: Sequence, b: Sequence) -> Optional[int]:
    for i, (x, y) in enumerate(zip(a, b)):
        if x != y:
            return i
    return None


def prefix_agreement(trace: RunTrace) -> OracleResult:
    """Correct replicas' segment streams (per DAG and global) are prefixes of each other."""
    correct = trace.correct
    streams: dict[str, dict[int, list]] = defaultdict(dict)
    for replica in correct:
        for dag_id in range(trace.scenario.k):
            streams[f"dag {dag_id}"][replica] = [
                (s.anchor, s.nodes) for s in trace.segments_on(replica, dag_id)
            ]
        streams["global log"][replica] = [
            (e.dag_id, e.segment.anchor, e.segment.nodes) for e in trace.global_logs.get(replica, [])
        ]

    for label, per_replica in streams.items():
        for i, r1 in enumerate(correct):
            for r2 in correct[i + 1:]:
                at = _first_divergence(per_replica[r1], per_replica[r2])
                if at is not None:
                    return OracleResult(
                        "prefix_agreement", False,
                        f"{label}: R{r1} and R{r2} diverge at position {at}: "
                        f"{per_replica[r1][at][:2]} vs {per_replica[r2][at][:2]}",
                        trace.seed,
                    )
    return OracleResult("prefix_agreement", True, seed=trace.seed)


def exactly_once(trace: RunTrace, require_complete: bool = False) -> OracleResult:
    """Every node is ordered at most once per replica; optionally every txn is ordered."""
    for replica in trace.correct:
        seen: dict[tuple[int, tuple[int, int]], str] = {}
        for s in trace.segments.get(replica, []):
            for key in s.nodes:
                slot = (s.dag_id, key)
                if slot in seen:
                    return OracleResult(
                        "exactly_once", False,
                        f"R{replica} orders node {slot} under {seen[slot]} and again under {s.anchor}",
                        trace.seed,
                    )
                seen[slot] = str(s.anchor)
        txns = trace.global_txns(replica)
        if len(txns) != len(set(txns)):
            return OracleResult("exactly_once", False, f"R{replica} global log repeats a txn", trace.seed)

    if require_complete:
        deadline = trace.end_time - COMPLETENESS_SLACK
        expected = sorted(t for t, stamp in trace.txns.items() if stamp.submit_t <= deadline)
        for replica in trace.correct:
            ordered = set(trace.global_txns(replica))
            missing = [t for t in expected if t not in ordered]
            if missing:
                return OracleResult(
                    "exactly_once", False,
                    f"R{replica} never ordered {len(missing)} txns, first {missing[:5]}",
                    trace.seed,
                )
    return OracleResult("exactly_once", True, seed=trace.seed)


def fast_commit_never_skipped(
    fast_fired: dict[int, set[AnchorRef]],
    skipped: dict[int, set[AnchorRef]],
    correct: Iterable[int],
    seed: Optional[int] = None,
) -> OracleResult:
    """No anchor fast-committed at one correct replica is skipped at another."""
    correct = list(correct)
    fired = set().union(*(fast_fired.get(r, set()) for r in correct)) if correct else set()
    for replica in correct:
        clash = sorted(fired & skipped.get(replica, set()))
        if clash:
            return OracleResult(
                "fast_commit_never_skipped", False,
                f"R{replica} skips fast-committed anchor {clash[0]}",
                seed,
            )
    return OracleResult("fast_commit_never_skipped", True, seed=seed)


def non_equivocation(trace: RunTrace) -> OracleResult:
    """All correct replicas hold the same certified digest per slot."""
    if trace.violations:
        return OracleResult("non_equivocation", False, trace.violations[0], trace.seed)
    slots: dict[tuple[int, int, int], tuple[int, str]] = {}
    for replica in trace.correct:
        for slot, digest in trace.certified.get(replica, {}).items():
            prior = slots.setdefault(slot, (replica, digest))
            if prior[1] != digest:
                return OracleResult(
                    "non_equivocation", False,
                    f"slot {slot}: R{prior[0]} certified {prior[1]}, R{replica} certified {digest}",
                    trace.seed,
                )
    return OracleResult("non_equivocation", True, seed=trace.seed)


def via_consistency(trace: RunTrace) -> OracleResult:
    """Direct and fast commits were backed by their rule when recorded."""
    bad = [r for r in trace.correct if not trace.via_consistent.get(r, True)]
    if bad:
        return OracleResult("via_consistency", False, f"inconsistent commit rule at R{bad[0]}", trace.seed)
    return OracleResult("via_consistency", True, seed=trace.seed)


def fetch_liveness(trace: RunTrace, slack: float = COMPLETENESS_SLACK) -> OracleResult:
    """Nodes buffered on missing parents were inserted, barring the last `slack` md."""
    deadline = trace.end_time - slack
    for replica in trace.correct:
        stuck = [entry for entry in trace.buffered.get(replica, []) if entry[2] <= deadline]
        if stuck:
            dag_id, key, since = stuck[0]
            return OracleResult(
                "fetch_liveness", False,
                f"R{replica} still waits on parents of {key} (dag {dag_id}), buffered at {since:.2f}",
                trace.seed,
            )
    return OracleResult("fetch_liveness", True, seed=trace.seed)


def determinism(traces: Sequence[RunTrace]) -> list[OracleResult]:
    """Traces of the same scenario and seed must be identical."""
    groups: dict[str, list[RunTrace]] = defaultdict(list)
    for trace in traces:
        groups[trace.scenario.fingerprint()].append(trace)
    results = []
    for group in groups.values():
        prints = {t.fingerprint() for t in group}
        seed = group[0].seed
        if len(prints) > 1:
            results.append(OracleResult("determinism", False, f"{len(prints)} distinct traces for one seed", seed))
        else:
            results.append(OracleResult("determinism", True, seed=seed))
    return results


# ----------------------------------------------------------------------
# Report
# ----------------------------------------------------------------------


def check_oracles(
    traces: Sequence[RunTrace],
    replay: Optional[Callable[[RunTrace], RunTrace]] = None,
    require_complete: bool = False,
) -> OracleReport:
    """Evaluate every oracle over `traces`.

    Args:
        traces: Finished runs
        replay: Optional re-runner; its output for the first trace is added to
            the determinism comparison
        require_complete: Also require every early-enough txn to be ordered
    """
    report = OracleReport()
    for trace in traces:
        report.results.append(prefix_agreement(trace))
        report.results.append(exactly_once(trace, require_complete))
        report.results.append(
            fast_commit_never_skipped(trace.fast_fired, trace.skipped, trace.correct, trace.seed)
        )
        report.results.append(non_equivocation(trace))
        report.results.append(via_consistency(trace))
        if not trace.scenario.faulty:
            report.results.append(fetch_liveness(trace))

    compared = list(traces)
    if replay is not None and traces:
        compared.append(replay(traces[0]))
    report.results.extend(determinism(compared))

    for result in report.failed():
        logger.warning("oracle violation: %s", result)
    return report
