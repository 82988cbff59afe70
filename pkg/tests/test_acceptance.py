"""Headline latency numbers and robustness on the canonical configuration.

Canonical: n = 4, fixed 1 md delays, uniform arrivals, 180 md runs (60 nominal
rounds). The quick tests use three seeds; the `slow` ones use twenty.
"""

from functools import lru_cache

import numpy as np
import pytest

from src.metrics import aggregate, anchor_segments, decompose
from src.metrics.latency import LatencySummary
from src.protocol.types import CommitRule
from src.sim import Scenario, run

QUICK_SEEDS = (0, 1, 2)
FULL_SEEDS = tuple(range(20))


@lru_cache(maxsize=None)
def batch(scenario: Scenario, seeds: tuple[int, ...]) -> tuple[LatencySummary, tuple]:
    timelines, segments, traces = [], [], []
    for seed in seeds:
        trace = run(scenario.with_overrides(seed=seed), record_events=False)
        timelines.extend(decompose(trace).timelines)
        segments.extend(anchor_segments(trace))
        traces.append(trace)
    return aggregate(timelines, segments), tuple(traces)


def summary(protocol: str, seeds=QUICK_SEEDS, **overrides) -> LatencySummary:
    return batch(Scenario(protocol=protocol, **overrides), tuple(seeds))[0]


def median_total(scenario: Scenario, seeds=QUICK_SEEDS) -> float:
    _, traces = batch(scenario, tuple(seeds))
    return float(np.median([t.total for trace in traces for t in decompose(trace)]))


class TestLatencyTotals:
    def test_bullshark(self):
        assert summary("bullshark").mean("total") == pytest.approx(12.0, abs=1.0)

    def test_shoal(self):
        assert summary("shoal").mean("total") == pytest.approx(10.5, abs=1.0)

    def test_shoalpp(self):
        assert summary("shoalpp").mean("total") == pytest.approx(4.5, abs=0.5)

    def test_ordering_of_modes(self):
        totals = [summary(p).mean("total") for p in ("bullshark", "shoal", "shoalpp")]
        assert totals == sorted(totals, reverse=True)

    @pytest.mark.slow
    @pytest.mark.parametrize(
        "protocol,expected,tolerance",
        [("bullshark", 12.0, 1.0), ("shoal", 10.5, 1.0), ("shoalpp", 4.5, 0.5)],
    )
    def test_twenty_seeds(self, protocol, expected, tolerance):
        assert summary(protocol, FULL_SEEDS).mean("total") == pytest.approx(expected, abs=tolerance)


class TestStages:
    def test_shoalpp_queuing(self):
        assert summary("shoalpp").mean("queuing") == pytest.approx(0.5, abs=0.1)

    def test_shoalpp_anchor_commit(self):
        assert summary("shoalpp").mean("anchor_commit") == pytest.approx(4.0, abs=0.3)

    def test_shoalpp_anchors_everything(self):
        assert summary("shoalpp").mean("anchoring") == pytest.approx(0.0, abs=0.1)

    def test_bullshark_anchoring(self):
        assert summary("bullshark").mean("anchoring") == pytest.approx(4.5, abs=0.5)

    @pytest.mark.parametrize("protocol", ["bullshark", "shoal"])
    def test_baseline_anchor_commit(self, protocol):
        assert summary(protocol).mean("anchor_commit") == pytest.approx(6.0, abs=0.5)

    def test_shoal_anchors_non_anchor_nodes_sooner_than_bullshark(self):
        shoal = summary("shoal").non_anchor_anchoring.mean
        assert 3.0 <= shoal < 4.5
        assert shoal < summary("bullshark").non_anchor_anchoring.mean

    def test_shoal_anchoring(self):
        assert summary("shoal").mean("anchoring") == pytest.approx(3.0, abs=0.5)

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_staggering_divides_queuing(self, k):
        s = summary("shoalpp", k=k, offset=3.0 / k)
        assert s.mean("queuing") == pytest.approx(1.5 / k, abs=0.1)

    def test_fast_rule_dominates(self):
        mix = summary("shoalpp").commit_rule_mix
        assert mix[CommitRule.FAST_DIRECT.value] >= 0.95


class TestRobustness:
    def test_shoalpp_keeps_committing_with_a_crash(self):
        crashed = summary("shoalpp", crashes=((3, 0.0),))
        assert crashed.count > 0
        assert crashed.mean("total") < 2 * summary("shoalpp").mean("total")

        _, traces = batch(Scenario(protocol="shoalpp", crashes=((3, 0.0),)), QUICK_SEEDS)
        for trace in traces:
            rounds = {s.anchor.round for s in trace.segments_on(0, 0)}
            assert len(rounds) >= 0.9 * (max(rounds) + 1)

    def test_bullshark_skips_the_crashed_leader(self):
        _, traces = batch(Scenario(protocol="bullshark", crashes=((3, 0.0),)), QUICK_SEEDS)
        for trace in traces:
            skipped = trace.skipped[0]
            assert skipped
            assert {a.source for a in skipped} == {3}

    def test_drops_inflate_latency_moderately(self):
        base = median_total(Scenario(protocol="shoalpp"))
        dropped = median_total(Scenario(protocol="shoalpp", drop_rate=0.01, drop_replicas=(1,)))
        assert dropped < 1.5 * base
