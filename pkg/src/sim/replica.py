"""One simulated replica: wires network events into its DAG instances."""

from __future__ import annotations

import logging
from typing import Any, Optional

import numpy as np

from ..protocol.commit_engine import CommitEngine
from ..protocol.dag_core import LocalDag
from ..protocol.errors import ProtocolViolation
from ..protocol.modes import get_protocol_spec
from ..protocol.multi_dag import DagInstance, MultiDag
from ..protocol.types import DagNode, FetchRequest, FetchResponse, NodeKey, NodeProposal, Vote
from .network import Network, SimEvent, equivocate, split_halves
from .scenario import Scenario
from .trace import RunTrace

logger = logging.getLogger(__name__)


class Replica:
    """Event handlers for one replica and its k DAG instances."""

    def __init__(
        self,
        rid: int,
        scenario: Scenario,
        network: Network,
        trace: RunTrace,
        fetch_rng: np.random.Generator,
        parent_rng: Optional[np.random.Generator] = None,
    ):
        self.rid = rid
        self.scenario = scenario
        self.network = network
        self.trace = trace
        self.fetch_rng = fetch_rng
        self.parent_rng = parent_rng
        self.equivocator = rid in scenario.equivocators
        self.parent_cap = None
        if get_protocol_spec(scenario.protocol)["parents"] == "first_quorum" and not scenario.round_timeout:
            self.parent_cap = scenario.n - scenario.f

        stagger = scenario.stagger
        instances = []
        for d in range(scenario.k):
            dag = LocalDag(scenario.n, scenario.f, rid, d, scenario.history_window)
            engine = CommitEngine(dag, scenario.protocol, scenario.reputation_window, scenario.fast_quorum)
            instances.append(DagInstance(dag, engine, stagger.start_time(d), scenario.round_timeout))
        self.multi = MultiDag(instances)
        self.fetch_armed = [False] * scenario.k
        self.advance_pending = [False] * scenario.k

        self._handlers = {
            "txn": self._on_txn,
            "start": self._on_start,
            "advance": self._on_advance,
            "timer": self._on_timer,
            "proposal": self._on_proposal,
            "vote": self._on_vote,
            "cert": self._on_cert,
            "fetch_req": self._on_fetch_req,
            "fetch_resp": self._on_fetch_resp,
            "fetch_retry": self._on_fetch_retry,
        }

    @property
    def instances(self) -> list[DagInstance]:
        return self.multi.instances

    def handle(self, event: SimEvent):
        now = event.deliver_at
        if self.network.is_crashed(self.rid, now):
            return
        self._handlers[event.kind](event.payload, now)

    # ------------------------------------------------------------------
    # Local events
    # ------------------------------------------------------------------

    def _on_txn(self, txn: int, now: float):
        dag_id = self.multi.submit_txn(txn, now)
        self.trace.record_submit(txn, self.rid, dag_id, now)

    def _on_start(self, dag_id: int, now: float):
        inst = self.instances[dag_id]
        inst.started = True
        inst.dag.round_entered_at = now
        self._advance(inst, now)

    def _on_timer(self, dag_id: int, now: float):
        self._advance(self.instances[dag_id], now)

    def _on_advance(self, dag_id: int, now: float):
        self.advance_pending[dag_id] = False
        self._advance(self.instances[dag_id], now)

    def _request_advance(self, inst: DagInstance, now: float):
        # Runs after every delivery already queued for this instant.
        if not self.advance_pending[inst.dag_id]:
            self.advance_pending[inst.dag_id] = True
            self.network.schedule_local(self.rid, now, "advance", inst.dag_id)

    # ------------------------------------------------------------------
    # Certification
    # ------------------------------------------------------------------

    def _on_proposal(self, p: NodeProposal, now: float):
        inst = self.instances[p.dag_id]
        vote = inst.dag.on_receive_proposal(p)
        if vote is not None:
            self.network.send(self.rid, p.source, "vote", vote, now)
            self._poll(inst, now)

    def _on_vote(self, v: Vote, now: float):
        dag = self.instances[v.dag_id].dag
        cert = dag.on_receive_vote(v)
        if cert is not None:
            node = DagNode(cert, dag.my_proposals[cert.digest])
            self.network.broadcast(self.rid, "cert", node, now)

    def _on_cert(self, node: DagNode, now: float):
        self._insert_nodes(self.instances[node.certificate.dag_id], [node], now)

    def _insert_nodes(self, inst: DagInstance, nodes: list[DagNode], now: float):
        inserted = False
        for node in nodes:
            try:
                delta = inst.dag.on_receive_certificate(node, now)
            except ProtocolViolation as e:
                logger.error("R%d: %s", self.rid, e)
                self.trace.record_violation(self.rid, str(e))
                continue
            for added in delta.inserted:
                self.trace.record_certified(self.rid, inst.dag_id, added)
            if delta.fetch:
                self._request_fetch(inst, delta.fetch, node, now)
            inserted |= bool(delta.inserted)
        if inserted:
            self._request_advance(inst, now)
            self._poll(inst, now)

    # ------------------------------------------------------------------
    # Rounds
    # ------------------------------------------------------------------

    def _advance(self, inst: DagInstance, now: float):
        if not inst.started:
            return
        dag = inst.dag
        while True:
            if dag.current_round not in dag.proposed_rounds:
                self._propose(inst, now)
            if dag.try_advance_round(now, inst.round_timeout) is None:
                break
        if (
            inst.round_timeout > 0
            and inst.timer_round != dag.current_round
            and dag.certs_in_round(dag.current_round) >= dag.quorum
        ):
            inst.timer_round = dag.current_round
            self.network.schedule_local(self.rid, dag.timeout_deadline(inst.round_timeout), "timer", inst.dag_id)

    def _propose(self, inst: DagInstance, now: float):
        dag = inst.dag
        proposal = dag.create_proposal(inst.take_batch(), now, max_parents=self.parent_cap, rng=self.parent_rng)
        inst.note_proposal(now)
        self.trace.record_proposal(proposal, now)
        if not self.equivocator:
            self.network.broadcast(self.rid, "proposal", proposal, now)
            return
        first, second = equivocate(proposal, dag.quorum)
        dag.register_variant(second)
        low, high = split_halves(dag.n)
        self.network.broadcast(self.rid, "proposal", first, now, low)
        self.network.broadcast(self.rid, "proposal", second, now, high)

    # ------------------------------------------------------------------
    # Fetching
    # ------------------------------------------------------------------

    def _pick_peer(self, candidates) -> Optional[int]:
        peers = sorted(p for p in candidates if p != self.rid)
        if not peers:
            return None
        return peers[int(self.fetch_rng.integers(len(peers)))]

    def _request_fetch(self, inst: DagInstance, keys: list[NodeKey], child: DagNode, now: float):
        peer = self._pick_peer(child.certificate.signers)
        if peer is not None:
            request = FetchRequest(tuple(keys), self.rid, inst.dag_id)
            self.network.send(self.rid, peer, "fetch_req", request, now)
        self._arm_fetch_retry(inst, now)

    def _arm_fetch_retry(self, inst: DagInstance, now: float):
        if not self.fetch_armed[inst.dag_id]:
            self.fetch_armed[inst.dag_id] = True
            at = now + self.scenario.retransmit_interval
            self.network.schedule_local(self.rid, at, "fetch_retry", inst.dag_id)

    def _on_fetch_retry(self, dag_id: int, now: float):
        inst = self.instances[dag_id]
        self.fetch_armed[dag_id] = False
        missing = inst.dag.missing_parents()
        if not missing:
            return
        peer = self._pick_peer(range(self.scenario.n))
        if peer is not None:
            self.network.send(self.rid, peer, "fetch_req", FetchRequest(tuple(missing), self.rid, dag_id), now)
        self._arm_fetch_retry(inst, now)

    def _on_fetch_req(self, req: FetchRequest, now: float):
        dag = self.instances[req.dag_id].dag
        held = []
        for key in req.keys:
            node = dag.nodes.get(key) or dag.buffered.get(key)
            if node is not None:
                held.append(node)
        if held:
            self.network.send(self.rid, req.requester, "fetch_resp", FetchResponse(tuple(held), req.dag_id), now)

    def _on_fetch_resp(self, resp: FetchResponse, now: float):
        self._insert_nodes(self.instances[resp.dag_id], list(resp.nodes), now)

    # ------------------------------------------------------------------
    # Ordering
    # ------------------------------------------------------------------

    def _poll(self, inst: DagInstance, now: float):
        segments = self.multi.collect(inst.dag_id, now)
        if not segments:
            return
        for segment in segments:
            self.trace.record_segment(self.rid, segment)
        appended = self.multi.advance_global_log(now)
        if appended:
            self.trace.record_global(self.rid, appended, now)

    def snapshot(self) -> dict[str, Any]:
        """End-of-run protocol state copied onto the trace."""
        fast, skipped, via_ok, faults, buffered = set(), set(), True, [], []
        for inst in self.instances:
            fast |= inst.engine.fast_fired
            skipped |= inst.engine.skipped
            via_ok &= inst.engine.via_consistent
            faults.extend(inst.dag.faults)
            buffered.extend((inst.dag_id, key, since) for key, since in sorted(inst.dag.buffered_at.items()))
        return {
            "fast_fired": fast,
            "skipped": skipped,
            "via_consistent": via_ok,
            "faults": faults,
            "buffered": buffered,
        }
