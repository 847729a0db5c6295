"""Pairing plus precoding for each coordination strategy.

=================  ==========  ==============================================
strategy           b_max       precoding
=================  ==========  ==============================================
Local              K           per-AN zero-forcing, equal power split
CoordPr            K           centralized max-min SINR, single serving AN
LocalPowCoord      K           per-AN zero-forcing beams, coordinated powers
JPcon              ceil(K/L)   centralized max-min SINR over all active ANs
=================  ==========  ==============================================
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import ChannelRealization, PrecodingMatrix, SupportCase, rates
from .errors import BracketError, UDNError
from .pairing import PairingProblem, PairingSolution, build_costs, solve_pairing
from .precoding import BisectionConfig, bisection_max_min_sinr, local_power_coordinated, zf_local
from .topology import Scenario, Strategy, Topology

P_BUDGET = 1.0  # total power is normalized; snr_ref sets the operating point


class StrategyError(UDNError):
    """A pairing or precoding failure, tagged with the strategy that hit it."""

    def __init__(self, strategy: Strategy, cause: Exception):
        super().__init__(f"{strategy.value}: {type(cause).__name__}: {cause}")
        self.strategy = strategy
        self.cause = cause


@dataclass
class StrategyOutcome:
    strategy: Strategy
    pairing: PairingSolution | None
    W: PrecodingMatrix | None
    rates: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    failure: str | None = None

    @property
    def worse_rate(self) -> float:
        return float(np.min(self.rates)) if self.failure is None else float("nan")

    @property
    def sum_rate(self) -> float:
        return float(np.sum(self.rates)) if self.failure is None else float("nan")


def pair(topology: Topology, scenario: Scenario) -> PairingSolution:
    problem = PairingProblem(build_costs(topology), scenario.b_max, scenario.u_max, scenario.L)
    return solve_pairing(problem)


def run_strategy(H: ChannelRealization, topology: Topology, scenario: Scenario,
                 bisection: BisectionConfig | None = None) -> StrategyOutcome:
    """Apply ``scenario.strategy`` to one snapshot; failures raise :class:`StrategyError`."""
    strategy = scenario.strategy
    cfg = bisection or BisectionConfig()
    diag: dict = {}
    try:
        t0 = time.perf_counter()
        pairing = pair(topology, scenario)
        diag["pairing_s"] = time.perf_counter() - t0
        diag["pairing_nodes"] = pairing.stats.get("nodes", 1)
        diag["active_ans"] = len(pairing.active_set)
        t0 = time.perf_counter()
        if strategy is Strategy.LOCAL:
            W = zf_local(H, pairing, P_BUDGET)
        elif strategy is Strategy.LOCAL_POW_COORD:
            W, _ = local_power_coordinated(H, pairing, P_BUDGET, cfg.epsilon)
        else:
            case = SupportCase.JOINT_ACTIVE if strategy is Strategy.JP_CON else SupportCase.SINGLE_SERVING
            while True:
                try:
                    res = bisection_max_min_sinr(H, pairing, case, P_BUDGET, cfg, scenario.power_form)
                    break
                except BracketError:
                    if cfg.theta_ub is None:
                        raise
                    cfg = replace(cfg, theta_ub=2.0 * cfg.theta_ub)
            W = res.W
            diag["theta"] = res.theta
            diag["bisection_iters"] = res.iterations
            diag["ipm_iters"] = sum(p[2] for p in res.probes)
        diag["precoding_s"] = time.perf_counter() - t0
    except UDNError as exc:
        raise StrategyError(strategy, exc) from exc
    return StrategyOutcome(strategy, pairing, W, rates(H, W), diag)
