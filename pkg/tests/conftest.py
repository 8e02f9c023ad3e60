import numpy as np
import pytest

from orplan.core import Block, Instance, Surgery, SurgeryType
from orplan.ingest import ScenarioSet

COST_G = 26.0 / 1.5


@pytest.fixture
def toy_instance() -> Instance:
    """One surgery, one block: L=480, c_o=26, c_g=26/1.5, d in [60, 240],
    e in [0, 240]; schedule cost 100, reject cost 500."""
    t = SurgeryType("T", 150.0, 50.0, 60.0, 240.0, 1.0)
    s = Surgery(0, t, 100.0, 500.0)
    b = Block(0, "OR1", "Mon", t, 480.0, 26.0, COST_G, 0.0, 240.0, 120.0)
    return Instance((t,), (s,), (b,))


@pytest.fixture
def toy_scenarios() -> ScenarioSet:
    """Single sample at d=120, e=60."""
    return ScenarioSet(d=np.array([[120.0]]), e=np.array([[60.0]]))
