"""Protocol errors raised by the DAG and commit state machines."""


class ProtocolError(Exception):
    """Base class for protocol-level errors."""


class RoundNotReady(ProtocolError):
    """A proposal was requested before the previous round had a quorum."""


class MalformedProposal(ProtocolError):
    """A proposal failed structural validation (parent count, rounds)."""


class HistoryUnavailable(ProtocolError, LookupError):
    """Part of a node's causal history is not held locally yet."""

    def __init__(self, missing):
        self.missing = missing
        super().__init__(f"history unavailable, missing {missing}")


class ProtocolViolation(ProtocolError):
    """Two distinct certified nodes for one (round, source) slot.

    Cannot happen with at most f faulty replicas; the harness surfaces it.
    """
