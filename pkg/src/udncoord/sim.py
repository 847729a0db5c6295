"""Monte-Carlo campaigns over deployment snapshots."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from .channel import draw_fading
from .errors import ConfigError
from .precoding import BisectionConfig
from .strategies import StrategyError, StrategyOutcome, run_strategy
from .topology import Scenario, Strategy, generate_topology, snapshot_rng

log = logging.getLogger(__name__)

CSV_COLUMNS = ("K", "M", "L", "snr_ref_db", "strategy", "n_ok", "n_fail",
               "mean_worse_rate", "se_worse_rate", "mean_sum_rate", "se_sum_rate")
MAX_FAILURE_RATE = 0.01


@dataclass(frozen=True)
class Campaign:
    base: Scenario
    km_pairs: tuple = ()
    snr_ref_db: tuple = ()
    strategies: tuple = ()
    n_snapshots: int | None = None
    master_seed: int | None = None
    epsilon: float = 1e-3
    retain_snapshots: bool = False

    def __post_init__(self):
        base = self.base
        object.__setattr__(self, "km_pairs", tuple(tuple(int(v) for v in p) for p in self.km_pairs)
                           or ((base.K, base.M),))
        object.__setattr__(self, "snr_ref_db", tuple(float(v) for v in self.snr_ref_db) or (base.snr_ref_db,))
        object.__setattr__(self, "strategies", tuple(Strategy(s) for s in self.strategies) or (base.strategy,))
        if self.n_snapshots is None:
            object.__setattr__(self, "n_snapshots", base.n_snapshots)
        if self.master_seed is None:
            object.__setattr__(self, "master_seed", base.seed)
        if self.n_snapshots < 1:
            raise ConfigError("n_snapshots must be positive")
        for K, M in self.km_pairs:
            if M < math.ceil(K / base.L):
                raise ConfigError(f"(K={K}, M={M}) violates M >= ceil(K/L)")
        for s in self.scenarios():
            pass  # validates every cell

    def scenarios(self):
        """One scenario per (K, M, snr) cell, strategy left at the base value."""
        for K, M in self.km_pairs:
            for snr in self.snr_ref_db:
                yield replace(self.base, K=K, M=M, snr_ref_db=snr, n_snapshots=self.n_snapshots,
                              seed=self.master_seed)

    def to_dict(self) -> dict:
        base = asdict(self.base)
        base["strategy"] = self.base.strategy.value
        return {
            "base": base,
            "km_pairs": [list(p) for p in self.km_pairs],
            "snr_ref_db": list(self.snr_ref_db),
            "strategies": [s.value for s in self.strategies],
            "n_snapshots": self.n_snapshots,
            "master_seed": self.master_seed,
            "epsilon": self.epsilon,
        }


@dataclass
class CellRecord:
    K: int
    M: int
    L: int
    snr_ref_db: float
    strategy: Strategy
    n_ok: int
    n_fail: int
    mean_worse_rate: float
    std_worse_rate: float
    se_worse_rate: float
    mean_sum_rate: float
    std_sum_rate: float
    se_sum_rate: float
    worse_rates: list | None = None
    sum_rates: list | None = None
    failures: list = field(default_factory=list)


@dataclass
class CampaignResult:
    campaign: Campaign
    records: list
    diagnostics: dict = field(default_factory=dict)

    def record(self, K, M, snr_ref_db, strategy) -> CellRecord:
        strategy = Strategy(strategy)
        for r in self.records:
            if (r.K, r.M, r.snr_ref_db, r.strategy) == (K, M, float(snr_ref_db), strategy):
                return r
        raise KeyError((K, M, snr_ref_db, strategy))

    @property
    def failure_rate(self) -> float:
        total = sum(r.n_ok + r.n_fail for r in self.records)
        return sum(r.n_fail for r in self.records) / total if total else 0.0

    def to_csv(self, config: dict | None = None) -> str:
        """CSV text; ``config`` (default: the campaign) is embedded as a comment line."""
        config = self.campaign.to_dict() if config is None else config
        buf = io.StringIO()
        buf.write(f"# udncoord {__version__}\n")
        buf.write(f"# config {json.dumps(config, sort_keys=True)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.records:
            w.writerow([r.K, r.M, r.L, repr(r.snr_ref_db), r.strategy.value, r.n_ok, r.n_fail,
                        repr(r.mean_worse_rate), repr(r.se_worse_rate),
                        repr(r.mean_sum_rate), repr(r.se_sum_rate)])
        return buf.getvalue()

    def to_json(self, config: dict | None = None) -> str:
        config = self.campaign.to_dict() if config is None else config
        recs = []
        for r in self.records:
            d = asdict(r)
            d["strategy"] = r.strategy.value
            recs.append({k: v for k, v in d.items() if v is not None})
        return json.dumps({"version": __version__, "config": config, "records": recs},
                          indent=2, sort_keys=True, allow_nan=True)


def run_snapshot(scenario: Scenario, snapshot_index: int,
                 bisection: BisectionConfig | None = None) -> StrategyOutcome:
    """Topology draw, fading draw and strategy, all from the stream of ``(seed, index)``.

    Solver failures come back as outcomes with ``failure`` set.
    """
    rng = snapshot_rng(scenario.seed, snapshot_index)
    topology = generate_topology(scenario, rng)
    H = draw_fading(topology, scenario, rng)
    try:
        return run_strategy(H, topology, scenario, bisection)
    except StrategyError as exc:
        log.warning("snapshot %d failed: %s", snapshot_index, exc)
        return StrategyOutcome(scenario.strategy, None, None, np.full(scenario.K, np.nan),
                               failure=str(exc))


def _work(args):
    scenario, strategies, index, epsilon = args
    cfg = BisectionConfig(epsilon=epsilon)
    out = []
    for strategy in strategies:
        t0 = time.perf_counter()
        o = run_snapshot(replace(scenario, strategy=strategy), index, cfg)
        out.append((o.worse_rate, o.sum_rate, o.failure, time.perf_counter() - t0))
    return out


def _stats(values: np.ndarray):
    n = values.size
    if n == 0:
        return math.nan, math.nan, math.nan
    mean = float(np.mean(values))
    std = float(np.std(values, ddof=1)) if n > 1 else 0.0
    return mean, std, std / math.sqrt(n)


def run_campaign(campaign: Campaign, threads: int = 1, progress=None) -> CampaignResult:
    """Evaluate every (cell, strategy) over ``n_snapshots`` common-seed snapshots.

    Work is split per (cell, snapshot); results land in a pre-indexed table, so
    the aggregation order and therefore the output never depend on ``threads``.
    """
    t_start = time.perf_counter()
    cells = list(campaign.scenarios())
    n = campaign.n_snapshots
    jobs = [(sc, campaign.strategies, i, campaign.epsilon) for sc in cells for i in range(n)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_work, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    else:
        results = []
        for j, job in enumerate(jobs):
            results.append(_work(job))
            if progress:
                progress(j + 1, len(jobs))
    records = []
    solve_time = 0.0
    for c, sc in enumerate(cells):
        rows = results[c * n:(c + 1) * n]
        for s, strategy in enumerate(campaign.strategies):
            worse = np.array([r[s][0] for r in rows])
            total = np.array([r[s][1] for r in rows])
            failures = [(i, r[s][2]) for i, r in enumerate(rows) if r[s][2] is not None]
            solve_time += sum(r[s][3] for r in rows)
            ok = np.array([r[s][2] is None for r in rows])
            mw, sw, ew = _stats(worse[ok])
            ms, ss, es = _stats(total[ok])
            records.append(CellRecord(
                sc.K, sc.M, sc.L, sc.snr_ref_db, strategy, int(ok.sum()), int((~ok).sum()),
                mw, sw, ew, ms, ss, es,
                worse.tolist() if campaign.retain_snapshots else None,
                total.tolist() if campaign.retain_snapshots else None,
                failures))
    diagnostics = {
        "wall_clock_s": time.perf_counter() - t_start,
        "solver_time_s": solve_time,
        "strategy_calls": len(jobs) * len(campaign.strategies),
        "threads": threads,
    }
    return CampaignResult(campaign, records, diagnostics)
