import sys
import numpy as np
import pytest

from udncoord.channel import draw_fading
from udncoord.topology import Scenario, generate_topology, snapshot_rng


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_snapshot(K=8, M=8, index=0, seed=7, **kw):
    sc = Scenario(K=K, M=M, seed=seed, **kw)
    r = snapshot_rng(seed, index)
    topo = generate_topology(sc, r)
    return sc, topo, draw_fading(topo, sc, r)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.REPORT:
        terminalreporter.section("acceptance criteria")
        for line in mod.REPORT:
            terminalreporter.write_line(line)
