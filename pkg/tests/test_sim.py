import json
import math
from dataclasses import replace

import numpy as np
import pytest

from udncoord import sim
from udncoord.channel import ChannelRealization
from udncoord.errors import ConfigError
from udncoord.sim import CSV_COLUMNS, Campaign, run_campaign, run_snapshot
from udncoord.strategies import run_strategy
from udncoord.topology import Scenario

from conftest import make_snapshot


def test_snapshot_determinism():
    sc = Scenario(K=6, M=6, strategy="LocalPowCoord", seed=3)
    a, b = run_snapshot(sc, 4), run_snapshot(sc, 4)
    assert np.array_equal(a.rates, b.rates)
    assert a.pairing.serving == b.pairing.serving
    assert not np.array_equal(a.rates, run_snapshot(sc, 5).rates)


def test_single_snapshot_mean():
    sc = Scenario(K=4, M=4, seed=1)
    res = run_campaign(Campaign(sc, strategies=("Local",), n_snapshots=1))
    rec = res.records[0]
    assert rec.mean_worse_rate == run_snapshot(sc, 0).worse_rate
    assert rec.se_worse_rate == 0.0 and rec.n_ok == 1


def test_record_count_and_csv_layout():
    c = Campaign(Scenario(K=4, M=4), km_pairs=[(4, 4), (4, 2)], snr_ref_db=(10, 20),
                 strategies=("Local", "LocalPowCoord"), n_snapshots=2)
    res = run_campaign(c)
    assert len(res.records) == 2 * 2 * 2
    lines = [l for l in res.to_csv().splitlines() if not l.startswith("#")]
    assert lines[0].split(",") == list(CSV_COLUMNS)
    assert len(lines) == 9
    assert res.record(4, 2, 20, "Local").n_ok == 2
    doc = json.loads(res.to_json())
    assert doc["config"]["km_pairs"] == [[4, 4], [4, 2]]


def test_invalid_campaign():
    with pytest.raises(ConfigError):
        Campaign(Scenario(K=4, M=4), km_pairs=[(9, 2)])
    with pytest.raises(ConfigError):
        Campaign(Scenario(K=4, M=4), n_snapshots=0)


def test_failures_excluded_from_means(monkeypatch):
    calls = {"n": 0}

    def flaky(H, topology, scenario, bisection=None):
        calls["n"] += 1
        if calls["n"] == 2:
            from udncoord.errors import SolverNumericalFailure
            from udncoord.strategies import StrategyError
            raise StrategyError(scenario.strategy, SolverNumericalFailure("injected"))
        return run_strategy(H, topology, scenario, bisection)

    monkeypatch.setattr(sim, "run_strategy", flaky)
    res = run_campaign(Campaign(Scenario(K=4, M=4, seed=2), strategies=("Local",), n_snapshots=3))
    rec = res.records[0]
    assert (rec.n_ok, rec.n_fail) == (2, 1)
    ok = [run_snapshot(Scenario(K=4, M=4, seed=2), i).worse_rate for i in (0, 2)]
    assert rec.mean_worse_rate == pytest.approx(np.mean(ok))
    assert rec.failures[0][0] == 1 and "injected" in rec.failures[0][1]
    assert res.failure_rate == pytest.approx(1 / 3)


def test_parallel_equals_serial():
    c = Campaign(Scenario(K=4, M=4, seed=9), strategies=("Local", "CoordPr"), n_snapshots=4)
    assert run_campaign(c, threads=1).to_csv() == run_campaign(c, threads=2).to_csv()


def test_coordpr_dominates_local_in_mean():
    c = Campaign(Scenario(K=6, M=6, seed=5), strategies=("Local", "CoordPr"), n_snapshots=6)
    res = run_campaign(c)
    assert res.record(6, 6, 10, "CoordPr").mean_worse_rate >= res.record(6, 6, 10, "Local").mean_worse_rate


def test_standard_error_scaling():
    base = Scenario(K=8, M=8, seed=11)
    se = [run_campaign(Campaign(base, strategies=("Local",), n_snapshots=n)).records[0].se_worse_rate
          for n in (300, 600)]
    assert se[1] / se[0] == pytest.approx(1 / math.sqrt(2), rel=0.2)


def test_relabeling_invariance():
    sc, topo, H = make_snapshot(K=6, M=6, index=1)
    perm_ue, perm_an = np.random.default_rng(0).permutation(6), np.random.default_rng(1).permutation(6)
    topo2 = replace(topo, ue_positions=topo.ue_positions[perm_ue], an_positions=topo.an_positions[perm_an])
    rows = np.concatenate([np.arange(m * 4, m * 4 + 4) for m in perm_an])
    H2 = ChannelRealization(H.H[rows][:, perm_ue], 4)
    for s in ("Local", "LocalPowCoord", "CoordPr"):
        a = run_strategy(H, topo, replace(sc, strategy=s)).worse_rate
        b = run_strategy(H2, topo2, replace(sc, strategy=s)).worse_rate
        assert a == pytest.approx(b, abs=2e-3)
