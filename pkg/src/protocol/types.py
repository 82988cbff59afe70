"""Message and value types shared by the DAG, commit and simulation layers."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum

ReplicaId = int
TxnId = int
NodeKey = tuple[int, int]  # (round, source)


@dataclass(frozen=True, order=True)
class CertificateRef:
    """Edge to a certified node of the previous round."""

    round: int
    source: ReplicaId
    digest: str

    @property
    def key(self) -> NodeKey:
        return (self.round, self.source)


def proposal_digest(
    round: int,
    source: ReplicaId,
    batch: tuple[TxnId, ...],
    parents: frozenset[CertificateRef],
    dag_id: int = 0,
    nonce: int = 0,
) -> str:
    """Hash of a proposal; a pure function of its contents."""
    edges = ",".join(f"{p.round}:{p.source}:{p.digest}" for p in sorted(parents))
    txns = ",".join(str(t) for t in batch)
    material = f"{dag_id}|{round}|{source}|{nonce}|{txns}|{edges}"
    return hashlib.sha256(material.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class NodeProposal:
    """A signed proposal <round, batch, edges> broadcast by `source`."""

    round: int
    source: ReplicaId
    batch: tuple[TxnId, ...]
    parents: frozenset[CertificateRef]
    dag_id: int = 0
    nonce: int = 0
    digest: str = field(init=False, compare=False)

    def __post_init__(self):
        object.__setattr__(
            self,
            "digest",
            proposal_digest(self.round, self.source, self.batch, self.parents, self.dag_id, self.nonce),
        )

    @property
    def key(self) -> NodeKey:
        return (self.round, self.source)

    @property
    def parent_keys(self) -> frozenset[NodeKey]:
        return frozenset(p.key for p in self.parents)


@dataclass(frozen=True)
class Vote:
    """A replica's signed vote for the proposal (round, source, digest)."""

    round: int
    source: ReplicaId
    digest: str
    voter: ReplicaId
    dag_id: int = 0


@dataclass(frozen=True)
class Certificate:
    """n - f matching votes for one proposal; signatures are plain signer ids."""

    round: int
    source: ReplicaId
    digest: str
    signers: frozenset[ReplicaId]
    dag_id: int = 0

    @property
    def key(self) -> NodeKey:
        return (self.round, self.source)

    @property
    def ref(self) -> CertificateRef:
        return CertificateRef(self.round, self.source, self.digest)


@dataclass(frozen=True)
class DagNode:
    """A certified proposal; the batch travels inline with the certificate."""

    certificate: Certificate
    proposal: NodeProposal

    @property
    def round(self) -> int:
        return self.proposal.round

    @property
    def source(self) -> ReplicaId:
        return self.proposal.source

    @property
    def key(self) -> NodeKey:
        return self.proposal.key

    @property
    def digest(self) -> str:
        return self.proposal.digest

    @property
    def parent_keys(self) -> frozenset[NodeKey]:
        return self.proposal.parent_keys

    @property
    def batch(self) -> tuple[TxnId, ...]:
        return self.proposal.batch

    def is_consistent(self) -> bool:
        return self.certificate.digest == self.proposal.digest and self.certificate.key == self.proposal.key


@dataclass(frozen=True, order=True)
class AnchorRef:
    """An anchor candidate slot: (round, source) on DAG `dag_id`."""

    round: int
    source: ReplicaId
    dag_id: int = 0

    @property
    def key(self) -> NodeKey:
        return (self.round, self.source)

    def __str__(self) -> str:
        return f"d{self.dag_id}:r{self.round}:R{self.source}"


class CommitRule(str, Enum):
    FAST_DIRECT = "FastDirect"
    DIRECT = "Direct"
    INDIRECT = "Indirect"


@dataclass(frozen=True)
class AnchorResolution:
    """Outcome of one one-shot Bullshark instance."""

    committed: AnchorRef
    via: CommitRule
    skipped: tuple[AnchorRef, ...] = ()


@dataclass(frozen=True)
class LogSegment:
    """Newly ordered nodes and transactions emitted for one committed anchor."""

    anchor: AnchorRef
    txns: tuple[TxnId, ...]
    nodes: tuple[NodeKey, ...]
    commit_time: float
    via: CommitRule
    dag_id: int = 0
    skipped: tuple[AnchorRef, ...] = ()


@dataclass
class DagDelta:
    """Nodes made insertable by one certificate, plus parents to fetch."""

    inserted: list[DagNode] = field(default_factory=list)
    fetch: list[NodeKey] = field(default_factory=list)

    def __bool__(self) -> bool:
        return bool(self.inserted or self.fetch)


@dataclass(frozen=True)
class FetchRequest:
    keys: tuple[NodeKey, ...]
    requester: ReplicaId
    dag_id: int = 0


@dataclass(frozen=True)
class FetchResponse:
    nodes: tuple[DagNode, ...]
    dag_id: int = 0
