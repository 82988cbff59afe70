"""Commit rules, one-shot Bullshark instances and the ordering driver."""

import pytest

from src.protocol.commit_engine import CommitEngine
from src.protocol.dag_core import LocalDag
from src.protocol.types import AnchorRef, AnchorResolution, CommitRule

from .dag_builders import F, N, build_dag, full_layout, insert_all, propose, weak_vote


def engine_for(protocol: str, fast_quorum=None) -> CommitEngine:
    return CommitEngine(LocalDag(N, F, replica=0), protocol, fast_quorum=fast_quorum)


class TestCommitRules:
    def test_direct_needs_f_plus_one_links(self):
        engine = engine_for("bullshark")
        layout = full_layout(2)
        layout[2] = {0: None, 1: (1, 2, 3), 2: (1, 2, 3)}
        insert_all(engine.dag, build_dag(layout).values())
        assert not engine.direct_commit_check(AnchorRef(1, 0))

        layout[2][1] = None
        engine = engine_for("bullshark")
        insert_all(engine.dag, build_dag(layout).values())
        assert engine.direct_commit_check(AnchorRef(1, 0))

    def test_fast_needs_two_f_plus_one_weak_votes(self):
        engine = engine_for("shoalpp")
        layout = full_layout(3)
        layout[2] = {0: None, 1: None, 2: (1, 2, 3), 3: (1, 2, 3)}
        nodes = build_dag(layout)
        weak_vote(engine.dag, [n for k, n in nodes.items() if k[0] == 2])
        assert not engine.fast_commit_check(AnchorRef(1, 0))
        assert engine.fast_commit_check(AnchorRef(1, 1))

    def test_fast_counts_first_received_variant_of_equivocator(self):
        engine = engine_for("shoalpp")
        nodes = build_dag(full_layout(2))
        round1 = [nodes[(1, s)] for s in range(N)]
        without = [nodes[(1, s)] for s in (1, 2, 3)]
        dag = engine.dag
        dag.on_receive_proposal(propose(2, 0, round1))
        dag.on_receive_proposal(propose(2, 1, round1))
        dag.on_receive_proposal(propose(2, 3, round1, nonce=0))
        dag.on_receive_proposal(propose(2, 3, without, nonce=1))
        assert dag.weak_vote_count((1, 0)) == 3
        assert engine.fast_commit_check(AnchorRef(1, 0))

    def test_fast_quorum_is_configurable(self):
        engine = engine_for("shoalpp", fast_quorum=2)
        nodes = build_dag(full_layout(3))
        weak_vote(engine.dag, [nodes[(2, 0)], nodes[(2, 1)]])
        assert engine.fast_commit_check(AnchorRef(1, 3))


class TestRunBullshark:
    def _layout(self, link_via_round2: bool):
        # Anchor (1,0) is linked by only one round-2 node, (2,0).
        layout = full_layout(2)
        layout[2] = {0: None, 1: (1, 2, 3), 2: (1, 2, 3), 3: (1, 2, 3)}
        layout[3] = {s: ((0, 1, 2) if link_via_round2 else (1, 2, 3)) for s in range(N)}
        layout[4] = {s: None for s in range(N)}
        return layout

    def test_indirect_commit_through_next_anchor(self):
        engine = engine_for("bullshark")
        insert_all(engine.dag, build_dag(self._layout(True)).values())
        resolution = engine.run_bullshark(AnchorRef(1, 0))
        assert resolution.committed == AnchorRef(1, 0)
        assert resolution.via is CommitRule.INDIRECT
        assert resolution.skipped == ()

    def test_skips_unreachable_anchor(self):
        engine = engine_for("bullshark")
        insert_all(engine.dag, build_dag(self._layout(False)).values())
        resolution = engine.run_bullshark(AnchorRef(1, 0))
        assert resolution.committed == AnchorRef(3, 1)
        assert resolution.via is CommitRule.DIRECT
        assert resolution.skipped == (AnchorRef(1, 0),)

    def test_undecided_without_enough_rounds(self):
        engine = engine_for("bullshark")
        layout = self._layout(False)
        del layout[4]
        insert_all(engine.dag, build_dag(layout).values())
        assert engine.run_bullshark(AnchorRef(1, 0)) is None

    def test_direct_commit_of_start(self):
        engine = engine_for("bullshark")
        insert_all(engine.dag, build_dag(full_layout(3)).values())
        resolution = engine.run_bullshark(AnchorRef(1, 0))
        assert resolution == AnchorResolution(AnchorRef(1, 0), CommitRule.DIRECT, ())


class TestNextOrderedNodes:
    def test_bullshark_orders_anchor_history(self):
        engine = engine_for("bullshark")
        insert_all(engine.dag, build_dag(full_layout(3), {(0, 2): [5], (1, 0): [6, 5]}).values())
        segment = engine.next_ordered_nodes(now=6.0)
        assert segment.anchor == AnchorRef(1, 0)
        assert segment.nodes == ((0, 0), (0, 1), (0, 2), (0, 3), (1, 0))
        assert segment.txns == (5, 6)
        assert segment.via is CommitRule.DIRECT
        assert segment.commit_time == 6.0
        assert engine.next_ordered_nodes(now=6.0) is None

    def test_second_segment_only_holds_new_nodes(self):
        engine = engine_for("bullshark")
        nodes = build_dag(full_layout(5))
        insert_all(engine.dag, nodes.values())
        first, second = engine.drain(now=0.0)
        assert second.anchor == AnchorRef(3, 1)
        assert set(second.nodes).isdisjoint(first.nodes)
        assert set(second.nodes) == {(1, 1), (1, 2), (1, 3), (2, 0), (2, 1), (2, 2), (2, 3), (3, 1)}

    def test_shoalpp_fast_commits_every_eligible_anchor(self):
        engine = engine_for("shoalpp")
        nodes = build_dag(full_layout(3))
        insert_all(engine.dag, nodes.values())
        weak_vote(engine.dag, [n for k, n in nodes.items() if k[0] in (1, 2)])

        segments = engine.drain(now=4.0)
        assert [s.anchor for s in segments[:4]] == [AnchorRef(0, s) for s in range(N)]
        assert all(s.via is CommitRule.FAST_DIRECT for s in segments)
        assert all(len(s.nodes) == 1 for s in segments)
        assert engine.fast_fired == {s.anchor for s in segments}

        ordered = [k for s in segments for k in s.nodes]
        assert len(ordered) == len(set(ordered))

    def test_skip_to_moves_scan_to_committed_round(self):
        engine = engine_for("shoalpp")
        # (0,3) never exists; the instance commits the round-2 anchor instead.
        layout = {r: {s: None for s in (0, 1, 2)} for r in range(5)}
        insert_all(engine.dag, build_dag(layout).values())
        segments = engine.drain(now=10.0)
        skipped = {a for s in segments for a in s.skipped}
        assert AnchorRef(0, 3) in skipped
        assert AnchorRef(0, 3) in engine.skipped
        assert engine.state.round >= 2
        assert not (engine.fast_fired & engine.skipped)

    @pytest.mark.parametrize("protocol", ["bullshark", "shoal", "shoalpp"])
    def test_every_node_ordered_once(self, protocol):
        engine = engine_for(protocol)
        nodes = build_dag(full_layout(8))
        insert_all(engine.dag, nodes.values())
        weak_vote(engine.dag, [n for k, n in nodes.items() if k[0] >= 1])
        ordered = [k for s in engine.drain(now=0.0) for k in s.nodes]
        assert len(ordered) == len(set(ordered))
        assert {(r, s) for r in range(5) for s in range(N)} <= set(ordered)

    def test_history_is_compacted_behind_commits(self):
        engine = CommitEngine(LocalDag(N, F, replica=0, history_window=2), "shoal")
        insert_all(engine.dag, build_dag(full_layout(8)).values())
        segments = engine.drain(now=0.0)
        assert segments
        assert engine.dag.floor == segments[-1].anchor.round - 2
        assert min(k[0] for k in engine.dag.nodes) == engine.dag.floor
