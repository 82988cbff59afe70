"""Safety oracles, the fast-commit enumerator and randomized scenarios."""

from .enumeration import (
    EnumerationCase,
    EnumerationResult,
    case_oracle,
    checker_resolution,
    enumerate_fast_commit,
    iter_cases,
)
from .oracles import (
    OracleReport,
    OracleResult,
    check_oracles,
    determinism,
    exactly_once,
    fast_commit_never_skipped,
    fetch_liveness,
    non_equivocation,
    prefix_agreement,
    via_consistency,
)
from .randomized import random_scenario

__all__ = [
    "EnumerationCase",
    "EnumerationResult",
    "OracleReport",
    "OracleResult",
    "case_oracle",
    "check_oracles",
    "checker_resolution",
    "determinism",
    "enumerate_fast_commit",
    "exactly_once",
    "fast_commit_never_skipped",
    "fetch_liveness",
    "iter_cases",
    "non_equivocation",
    "prefix_agreement",
    "random_scenario",
    "via_consistency",
]
