import pytest

from src.protocol.dag_core import LocalDag
from src.sim.scenario import Scenario

from .dag_builders import F, N


@pytest.fixture
def dag() -> LocalDag:
    return LocalDag(N, F, replica=0)


@pytest.fixture
def short_scenario() -> Scenario:
    """Fault-free shoalpp run of about 20 rounds per DAG."""
    return Scenario(protocol="shoalpp", n=4, duration=60.0, rate=2.0, seed=1)


@pytest.fixture
def out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("DAGDELAY_OUTPUT_DIR", str(tmp_path / "outputs"))
    return tmp_path / "outputs"
