"""Seeded discrete-event simulation of replicas over an adversarial network."""

from .network import EventQueue, Network, SimEvent, equivocate, split_halves
from .replica import Replica
from .runner import run, schedule_arrivals
from .scenario import DELAY_MODELS, Scenario, ScenarioError, load_scenario
from .trace import GlobalEntry, RunTrace, TxnStamp

__all__ = [
    "DELAY_MODELS",
    "EventQueue",
    "GlobalEntry",
    "Network",
    "Replica",
    "RunTrace",
    "Scenario",
    "ScenarioError",
    "SimEvent",
    "TxnStamp",
    "equivocate",
    "load_scenario",
    "run",
    "schedule_arrivals",
    "split_halves",
]
