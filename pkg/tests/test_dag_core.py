"""Certification, insertion and round advancement of a single LocalDag."""

import numpy as np
import pytest

from src.protocol.dag_core import LocalDag
from src.protocol.errors import HistoryUnavailable, ProtocolViolation, RoundNotReady
from src.protocol.types import Vote

from .dag_builders import F, N, build_dag, certify, full_layout, insert_all, propose


class TestCreateProposal:
    def test_genesis_round_has_no_parents(self, dag):
        p = dag.create_proposal([7], now=0.0)
        assert p.round == 0
        assert p.parents == frozenset()
        assert dag.txn_proposed_at[7] == 0.0

    def test_parents_are_the_quorum_of_previous_round(self, dag):
        nodes = build_dag({0: {0: None, 1: None, 2: None}})
        insert_all(dag, nodes.values())
        dag.create_proposal([], now=0.0)
        assert dag.try_advance_round(now=3.0) == 1
        p = dag.create_proposal([1, 2], now=3.0)
        assert p.round == 1
        assert len(p.parents) == 3
        assert {ref.key for ref in p.parents} == {(0, 0), (0, 1), (0, 2)}

    def test_all_held_certificates_become_parents(self, dag):
        insert_all(dag, build_dag(full_layout(1)).values())
        dag.create_proposal([], now=0.0)
        dag.try_advance_round(now=3.0, timeout=3.5)
        p = dag.create_proposal([], now=3.0)
        assert len(p.parents) == N

    def test_capped_parents_take_the_earliest_certificates(self, dag):
        nodes = build_dag(full_layout(1))
        dag.on_receive_certificate(nodes[(0, 2)], now=2.0)
        for s in (0, 1, 3):
            dag.on_receive_certificate(nodes[(0, s)], now=3.0)
        dag.create_proposal([], now=0.0)
        dag.try_advance_round(now=3.0)
        p = dag.create_proposal([], now=3.0, max_parents=dag.quorum)
        assert {ref.key for ref in p.parents} == {(0, 2), (0, 0), (0, 1)}

    def test_simultaneous_certificates_are_ranked_by_the_seeded_stream(self):
        def proposal(seed):
            dag = LocalDag(N, F, replica=0)
            insert_all(dag, build_dag(full_layout(1)).values(), now=3.0)
            dag.create_proposal([], now=0.0)
            dag.try_advance_round(now=3.0)
            return dag.create_proposal([], now=3.0, max_parents=dag.quorum, rng=np.random.default_rng(seed))

        picks = {frozenset(ref.key for ref in proposal(seed).parents) for seed in range(20)}
        assert all(len(p) == N - F for p in picks)
        assert len(picks) > 1
        assert proposal(7).parents == proposal(7).parents

    def test_round_not_ready(self, dag):
        insert_all(dag, build_dag({0: {0: None, 1: None}}).values())
        dag.create_proposal([], now=0.0)
        dag.current_round = 1
        with pytest.raises(RoundNotReady):
            dag.create_proposal([], now=3.0)

    def test_one_proposal_per_round(self, dag):
        dag.create_proposal([], now=0.0)
        with pytest.raises(RoundNotReady):
            dag.create_proposal([], now=0.0)

    def test_digest_is_a_function_of_contents(self):
        a = propose(0, 1, batch=[1, 2])
        b = propose(0, 1, batch=[1, 2])
        c = propose(0, 1, batch=[2, 1])
        assert a.digest == b.digest
        assert a.digest != c.digest


class TestVoting:
    def test_first_proposal_gets_a_vote_and_weak_votes(self, dag):
        nodes = build_dag(full_layout(3))
        insert_all(dag, [n for k, n in nodes.items() if k[0] < 2])
        vote = dag.on_receive_proposal(nodes[(2, 2)].proposal)
        assert vote == Vote(round=2, source=2, digest=nodes[(2, 2)].digest, voter=0)
        for s in range(N):
            assert dag.weak_vote_count((1, s)) == 1

    def test_voting_does_not_need_history(self, dag):
        nodes = build_dag(full_layout(3))
        assert dag.on_receive_proposal(nodes[(2, 1)].proposal) is not None

    def test_equivocating_proposal_is_ignored(self, dag):
        nodes = build_dag(full_layout(2))
        first = propose(2, 3, [nodes[(1, s)] for s in range(N)])
        second = propose(2, 3, [nodes[(1, s)] for s in (0, 1, 2)])
        assert dag.on_receive_proposal(first) is not None
        assert dag.on_receive_proposal(second) is None
        assert dag.weak_vote_count((1, 3)) == 1
        assert dag.weak_vote_count((1, 0)) == 1
        assert dag.faults

    def test_redelivery_is_idempotent(self, dag):
        p = propose(0, 2)
        assert dag.on_receive_proposal(p) is not None
        assert dag.on_receive_proposal(p) is None

    def test_malformed_proposal_rejected(self, dag):
        nodes = build_dag(full_layout(2))
        bad = propose(2, 1, [nodes[(1, 0)], nodes[(1, 1)]])
        assert dag.on_receive_proposal(bad) is None
        assert dag.weak_vote_count((1, 0)) == 0


class TestCertify:
    def test_certificate_at_quorum_of_distinct_voters(self, dag):
        p = dag.create_proposal([1], now=0.0)
        assert dag.on_receive_vote(Vote(0, 0, p.digest, voter=0)) is None
        assert dag.on_receive_vote(Vote(0, 0, p.digest, voter=0)) is None
        assert dag.on_receive_vote(Vote(0, 0, p.digest, voter=1)) is None
        cert = dag.on_receive_vote(Vote(0, 0, p.digest, voter=3))
        assert cert is not None
        assert cert.signers == frozenset({0, 1, 3})
        assert dag.on_receive_vote(Vote(0, 0, p.digest, voter=2)) is None

    def test_vote_for_unknown_digest_ignored(self, dag):
        assert dag.on_receive_vote(Vote(0, 0, "deadbeef", voter=1)) is None


class TestInsert:
    def test_missing_parent_buffers_and_fetch_delivers_both(self, dag):
        nodes = build_dag(full_layout(2))
        insert_all(dag, [n for k, n in nodes.items() if k != (0, 3) and k[0] == 0])
        delta = dag.on_receive_certificate(nodes[(1, 0)])
        assert not delta.inserted
        assert delta.fetch == [(0, 3)]
        assert (1, 0) in dag.buffered

        delta = dag.on_receive_certificate(nodes[(0, 3)])
        assert [n.key for n in delta.inserted] == [(0, 3), (1, 0)]
        assert not dag.buffered

    def test_conflicting_certificate_is_a_violation(self, dag):
        node = certify(propose(0, 1, batch=[1]))
        other = certify(propose(0, 1, batch=[2]))
        dag.on_receive_certificate(node)
        with pytest.raises(ProtocolViolation):
            dag.on_receive_certificate(other)

    def test_under_signed_certificate_dropped(self, dag):
        node = certify(propose(0, 1), signers=(0, 1))
        assert not dag.on_receive_certificate(node)
        assert not dag.has_node((0, 1))


class TestAdvanceRound:
    def _dag_with_round0(self, sources):
        dag = LocalDag(N, F, replica=0)
        dag.create_proposal([], now=0.0)
        insert_all(dag, build_dag({0: {s: None for s in sources}}).values())
        return dag

    def test_no_timeout_advances_at_quorum(self):
        dag = self._dag_with_round0((0, 1, 2))
        assert dag.try_advance_round(now=1.0, timeout=0.0) == 1

    def test_timeout_waits_for_missing_certificate(self):
        dag = self._dag_with_round0((0, 1, 2))
        assert dag.try_advance_round(now=1.0, timeout=2.0) is None
        assert dag.try_advance_round(now=2.0, timeout=2.0) == 1
        assert dag.round_entered_at == 2.0

    def test_all_certificates_advance_immediately(self):
        dag = self._dag_with_round0(range(N))
        assert dag.try_advance_round(now=1.0, timeout=2.0) == 1

    def test_below_quorum_never_advances(self):
        dag = self._dag_with_round0((0, 1))
        assert dag.try_advance_round(now=100.0, timeout=0.0) is None


class TestCausalHistory:
    def test_sorted_reachable_ancestors(self, dag):
        layout = full_layout(3)
        layout[2] = {0: (0, 1, 2), 1: None, 2: None, 3: None}
        layout[3] = {1: (0, 2, 3)}
        nodes = build_dag(layout)
        insert_all(dag, nodes.values())

        history = dag.causal_history((3, 1))
        keys = [n.key for n in history]
        assert keys == sorted(keys)

        # brute-force reachability
        reach, frontier = {(3, 1)}, [(3, 1)]
        while frontier:
            key = frontier.pop()
            for pk in nodes[key].parent_keys:
                if pk not in reach:
                    reach.add(pk)
                    frontier.append(pk)
        assert set(keys) == reach
        assert (2, 1) not in reach

    def test_missing_ancestor_raises(self, dag):
        nodes = build_dag(full_layout(2))
        insert_all(dag, [n for k, n in nodes.items() if k != (0, 2)])
        with pytest.raises(HistoryUnavailable):
            dag.causal_history((1, 0))

    def test_reaches(self, dag):
        layout = full_layout(2)
        layout[2] = {0: (0, 1, 2)}
        insert_all(dag, build_dag(layout).values())
        assert dag.reaches((2, 0), (0, 3))
        assert not dag.reaches((2, 0), (1, 3))


class TestCompaction:
    def test_round_advance_keeps_history(self):
        dag = LocalDag(N, F, replica=0, history_window=2)
        nodes = build_dag(full_layout(5))
        for r in range(5):
            insert_all(dag, [n for k, n in nodes.items() if k[0] == r])
            dag.try_advance_round(now=float(r))
        assert dag.current_round == 5
        assert dag.floor == 0
        assert (0, 0) in dag.nodes

    def test_floor_follows_the_committed_anchor(self):
        dag = LocalDag(N, F, replica=0, history_window=2)
        insert_all(dag, build_dag(full_layout(5)).values())
        dag.compact(committed_round=4)
        assert dag.floor == 2
        assert all(k[0] >= 2 for k in dag.nodes)
        assert dag.has_node((0, 0))
        assert dag.causal_history((4, 0))[0].key == (2, 0)

        dag.compact(committed_round=3)
        assert dag.floor == 2

    def test_nodes_waiting_on_compacted_parents_are_released(self):
        dag = LocalDag(N, F, replica=0, history_window=2)
        nodes = build_dag(full_layout(4))
        insert_all(dag, [n for k, n in nodes.items() if k != (2, 3)], now=1.0)
        assert set(dag.buffered_at) == {(3, s) for s in range(N)}

        delta = dag.compact(committed_round=5, now=9.0)
        assert sorted(n.key for n in delta.inserted) == [(3, s) for s in range(N)]
        assert not dag.buffered
        assert not dag.buffered_at
        assert dag.inserted_at[(3, 0)] == 9.0
