"""Seeded scenario configuration.

Scenario files are TOML with four optional tables; every key has a default:

    [protocol]  mode, k, offset, round_timeout, fast_quorum
    [network]   n, f, delay, delay_value, delay_range, delay_matrix,
                drop_rate, drop_replicas, retransmit_interval, gst, pre_gst_cap
    [faults]    crash = [[replica, time], ...], equivocate = [replica, ...]
    [run]       duration, seed, rate, window, reputation_window, name

Unset protocol knobs (k, offset, round_timeout, f) resolve from the protocol
preset when the scenario is run, so overriding `mode` picks up the new preset.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - Python 3.10 backport
    import tomli as tomllib

from ..protocol.modes import PROTOCOLS, get_protocol_spec
from ..protocol.multi_dag import MAX_DAGS, StaggerConfig

DELAY_MODELS = ("fixed", "uniform", "matrix")


class ScenarioError(ValueError):
    """Invalid or unreadable scenario configuration."""


@dataclass(frozen=True)
class Scenario:
    """Configuration of one seeded run."""

    protocol: str = "shoalpp"
    n: int = 4
    f: Optional[int] = None
    k: Optional[int] = None
    offset: Optional[float] = None
    round_timeout: Optional[float] = None
    fast_quorum: Optional[int] = None

    delay: str = "fixed"
    delay_value: float = 1.0
    delay_range: tuple[float, float] = (0.5, 2.0)
    delay_matrix: Optional[tuple[tuple[float, ...], ...]] = None
    drop_rate: float = 0.0
    drop_replicas: tuple[int, ...] = ()  # empty: every sender drops
    retransmit_interval: float = 4.0
    gst: float = 0.0
    pre_gst_cap: float = 5.0

    crashes: tuple[tuple[int, float], ...] = ()
    equivocators: tuple[int, ...] = ()

    duration: float = 180.0
    seed: int = 0
    rate: float = 4.0  # transactions per md, system-wide
    arrival_fraction: float = 0.8
    history_window: int = 100
    reputation_window: int = 10
    name: str = ""

    # ------------------------------------------------------------------
    # Construction
    # ------------------------------------------------------------------

    @classmethod
    def from_settings(cls, settings: dict[str, Any]) -> "Scenario":
        """Build a scenario from the nested tables of a scenario file."""
        try:
            proto = settings.get("protocol", {})
            net = settings.get("network", {})
            faults = settings.get("faults", {})
            run = settings.get("run", {})

            matrix = net.get("delay_matrix")
            return cls(
                protocol=proto.get("mode", "shoalpp"),
                k=proto.get("k"),
                offset=_opt_float(proto.get("offset")),
                round_timeout=_opt_float(proto.get("round_timeout")),
                fast_quorum=proto.get("fast_quorum"),
                n=int(net.get("n", 4)),
                f=net.get("f"),
                delay=net.get("delay", "fixed"),
                delay_value=float(net.get("delay_value", 1.0)),
                delay_range=tuple(float(x) for x in net.get("delay_range", (0.5, 2.0))),
                delay_matrix=tuple(tuple(float(x) for x in row) for row in matrix) if matrix else None,
                drop_rate=float(net.get("drop_rate", 0.0)),
                drop_replicas=tuple(int(r) for r in net.get("drop_replicas", ())),
                retransmit_interval=float(net.get("retransmit_interval", 4.0)),
                gst=float(net.get("gst", 0.0)),
                pre_gst_cap=float(net.get("pre_gst_cap", 5.0)),
                crashes=tuple((int(r), float(t)) for r, t in faults.get("crash", ())),
                equivocators=tuple(int(r) for r in faults.get("equivocate", ())),
                duration=float(run.get("duration", 180.0)),
                seed=int(run.get("seed", 0)),
                rate=float(run.get("rate", 4.0)),
                history_window=int(run.get("window", 100)),
                reputation_window=int(run.get("reputation_window", 10)),
                name=str(run.get("name", "")),
            )
        except (TypeError, ValueError, AttributeError) as e:
            raise ScenarioError(f"malformed scenario settings: {e}") from e

    def with_overrides(self, **overrides) -> "Scenario":
        """Return a copy with the given fields replaced; None values are ignored."""
        fields = {f.name for f in dataclasses.fields(self)}
        unknown = set(overrides) - fields
        if unknown:
            raise ScenarioError(f"unknown scenario fields: {sorted(unknown)}")
        return dataclasses.replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def resolved(self) -> "Scenario":
        """Fill unset protocol knobs from the protocol preset and n."""
        spec = get_protocol_spec(self.protocol) if self.protocol in PROTOCOLS else {}
        return dataclasses.replace(
            self,
            f=self.f if self.f is not None else (self.n - 1) // 3,
            k=self.k if self.k is not None else spec.get("k", 1),
            offset=self.offset if self.offset is not None else spec.get("offset", 0.0),
            round_timeout=self.round_timeout if self.round_timeout is not None else spec.get("round_timeout", 0.0),
        )

    # ------------------------------------------------------------------
    # Validation
    # ------------------------------------------------------------------

    @property
    def faulty(self) -> frozenset[int]:
        return frozenset(r for r, _ in self.crashes) | frozenset(self.equivocators)

    @property
    def correct(self) -> tuple[int, ...]:
        return tuple(r for r in range(self.n) if r not in self.faulty)

    @property
    def stagger(self) -> StaggerConfig:
        sc = self.resolved()
        return StaggerConfig(sc.k, sc.offset)

    def validate(self) -> "Scenario":
        """Raise ScenarioError unless the resolved scenario is runnable."""
        sc = self.resolved()
        if sc.protocol not in PROTOCOLS:
            raise ScenarioError(f"Unknown protocol mode: {sc.protocol}")
        if sc.n < 1 or sc.f < 0 or sc.n != 3 * sc.f + 1:
            raise ScenarioError(f"n must equal 3f+1, got n={sc.n}, f={sc.f}")
        if not 1 <= sc.k <= MAX_DAGS:
            raise ScenarioError(f"k must be in [1, {MAX_DAGS}], got {sc.k}")
        if sc.offset < 0 or sc.round_timeout < 0:
            raise ScenarioError("offset and round_timeout must be non-negative")
        if sc.fast_quorum is not None and not 1 <= sc.fast_quorum <= sc.n:
            raise ScenarioError(f"fast_quorum must be in [1, {sc.n}], got {sc.fast_quorum}")

        if sc.delay not in DELAY_MODELS:
            raise ScenarioError(f"Unknown delay model: {sc.delay} (expected one of {DELAY_MODELS})")
        if sc.delay == "fixed" and sc.delay_value <= 0:
            raise ScenarioError("delay_value must be positive")
        if sc.delay == "uniform":
            lo, hi = sc.delay_range
            if lo <= 0 or hi < lo:
                raise ScenarioError(f"bad delay_range {sc.delay_range}")
        if sc.delay == "matrix":
            m = sc.delay_matrix
            if m is None or len(m) != sc.n or any(len(row) != sc.n for row in m):
                raise ScenarioError(f"delay_matrix must be {sc.n}x{sc.n}")
            if any(m[i][j] <= 0 for i in range(sc.n) for j in range(sc.n) if i != j):
                raise ScenarioError("delay_matrix entries must be positive")

        if not 0 <= sc.drop_rate < 1:
            raise ScenarioError(f"drop_rate must be in [0, 1), got {sc.drop_rate}")
        if sc.retransmit_interval <= 0:
            raise ScenarioError("retransmit_interval must be positive")
        if sc.gst < 0 or sc.pre_gst_cap < 0:
            raise ScenarioError("gst and pre_gst_cap must be non-negative")

        replicas = [r for r, _ in sc.crashes] + list(sc.equivocators) + list(sc.drop_replicas)
        bad = [r for r in replicas if not 0 <= r < sc.n]
        if bad:
            raise ScenarioError(f"unknown replicas {bad} for n={sc.n}")
        if any(t < 0 for _, t in sc.crashes):
            raise ScenarioError("crash times must be non-negative")
        if len(sc.faulty) > sc.f:
            raise ScenarioError(
                f"{len(sc.faulty)} faulty replicas (crash + equivocate) exceed f={sc.f}"
            )

        if sc.duration <= 0:
            raise ScenarioError("duration must be positive")
        if sc.rate < 0 or not 0 < sc.arrival_fraction <= 1:
            raise ScenarioError("rate must be non-negative and arrival_fraction in (0, 1]")
        if sc.history_window < 2 or sc.reputation_window < 1:
            raise ScenarioError("window must be >= 2 and reputation_window >= 1")
        return sc

    # ------------------------------------------------------------------
    # Echo
    # ------------------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def fingerprint(self) -> str:
        material = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(material.encode()).hexdigest()[:12]

    @property
    def label(self) -> str:
        return self.name or self.protocol


def _opt_float(value) -> Optional[float]:
    return None if value is None else float(value)


def load_scenario(path: str | Path) -> Scenario:
    """Read a TOML scenario file."""
    path = Path(path)
    try:
        with open(path, "rb") as f:
            settings = tomllib.load(f)
    except OSError as e:
        raise ScenarioError(f"cannot read scenario {path}: {e}") from e
    except tomllib.TOMLDecodeError as e:
        raise ScenarioError(f"cannot parse scenario {path}: {e}") from e
    scenario = Scenario.from_settings(settings)
    if not scenario.name:
        scenario = scenario.with_overrides(name=path.stem)
    return scenario
