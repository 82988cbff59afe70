"""Seeded random adversarial scenarios for the safety suite."""

from __future__ import annotations

import numpy as np

from ..protocol.modes import PROTOCOLS
from ..sim.scenario import Scenario


def random_scenario(seed: int, n: int = 4, duration: float = 60.0) -> Scenario:
    """Uniform delays in [0.5, 2], up to 5% drops, at most f faulty replicas, random GST."""
    rng = np.random.default_rng(seed)
    f = (n - 1) // 3
    protocol = PROTOCOLS[int(rng.integers(len(PROTOCOLS)))]

    faulty = [int(r) for r in rng.permutation(n)[: int(rng.integers(f + 1))]]
    crashes, equivocators = [], []
    for replica in faulty:
        if not equivocators and rng.random() < 0.5:
            equivocators.append(replica)
        else:
            crashes.append((replica, round(float(rng.uniform(0.0, duration / 2)), 3)))

    drop_rate = round(float(rng.uniform(0.0, 0.05)), 4) if rng.random() < 0.5 else 0.0
    drop_replicas = tuple(int(r) for r in rng.permutation(n)[: int(rng.integers(1, n + 1))])
    gst = round(float(rng.uniform(0.0, duration / 3)), 3) if rng.random() < 0.5 else 0.0

    return Scenario(
        protocol=protocol,
        n=n,
        f=f,
        delay="uniform",
        delay_range=(0.5, 2.0),
        drop_rate=drop_rate,
        drop_replicas=drop_replicas,
        gst=gst,
        pre_gst_cap=3.0,
        crashes=tuple(sorted(crashes)),
        equivocators=tuple(sorted(equivocators)),
        duration=duration,
        seed=seed,
        rate=2.0,
        name=f"random-{seed}",
    )
