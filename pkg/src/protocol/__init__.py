"""DAG certification, commit rules, reputation and multi-DAG interleaving."""

from .commit_engine import BullsharkInstance, CommitEngine, CommitState
from .dag_core import LocalDag
from .errors import (
    HistoryUnavailable,
    MalformedProposal,
    ProtocolError,
    ProtocolViolation,
    RoundNotReady,
)
from .modes import PROTOCOL_SPECS, PROTOCOLS, get_protocol_spec
from .multi_dag import DagInstance, GlobalLog, MultiDag, StaggerConfig, advance_global_log
from .reputation import AnchorSchedule, ScoreBoard, get_anchors, update_scores
from .types import (
    AnchorRef,
    AnchorResolution,
    Certificate,
    CertificateRef,
    CommitRule,
    DagDelta,
    DagNode,
    FetchRequest,
    FetchResponse,
    LogSegment,
    NodeProposal,
    Vote,
)

__all__ = [
    "AnchorRef",
    "AnchorResolution",
    "AnchorSchedule",
    "BullsharkInstance",
    "Certificate",
    "CertificateRef",
    "CommitEngine",
    "CommitRule",
    "CommitState",
    "DagDelta",
    "DagInstance",
    "DagNode",
    "FetchRequest",
    "FetchResponse",
    "GlobalLog",
    "HistoryUnavailable",
    "LocalDag",
    "LogSegment",
    "MalformedProposal",
    "MultiDag",
    "NodeProposal",
    "PROTOCOLS",
    "PROTOCOL_SPECS",
    "ProtocolError",
    "ProtocolViolation",
    "RoundNotReady",
    "ScoreBoard",
    "StaggerConfig",
    "Vote",
    "advance_global_log",
    "get_anchors",
    "get_protocol_spec",
    "update_scores",
]
