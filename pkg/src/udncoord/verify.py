"""Self-check suites comparing the solvers against independent oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .channel import ChannelRealization, SupportCase
from .pairing import PairingProblem, PairingSolution, enumerate_pairing_oracle, solve_pairing
from .precoding import BisectionConfig, bisection_max_min_sinr, power_coordination
from .sim import run_snapshot
from .topology import Scenario, Strategy

VERIFY_SEED = 20240601


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name:<28s} {self.detail}"


def random_pairing_problem(rng: np.random.Generator, max_k: int = 6, max_m: int = 6) -> PairingProblem:
    K = int(rng.integers(1, max_k + 1))
    M = int(rng.integers(1, max_m + 1))
    u = int(rng.integers(1, 5))
    while min(M, K) * u < K:  # resample until some assignment exists
        M = int(rng.integers(1, max_m + 1))
        u = int(rng.integers(1, 5))
    b_lo = math.ceil(K / u)
    b = int(rng.integers(b_lo, K + 1))
    costs = rng.exponential(1.0, size=(K, M)) * rng.choice([1.0, 10.0, 100.0])
    return PairingProblem(costs, b, u)


def check_pairing(n: int = 60, seed: int = VERIFY_SEED) -> CheckResult:
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(n):
        p = random_pairing_problem(rng)
        if solve_pairing(p).objective != enumerate_pairing_oracle(p).objective:
            bad += 1
    return CheckResult("ILP vs enumeration", bad == 0, f"{n - bad}/{n} exact")


def single_ue_channel(rng: np.random.Generator, L: int = 4) -> ChannelRealization:
    scale = 10.0 ** rng.uniform(-1, 2)
    h = (rng.standard_normal((L, 1)) + 1j * rng.standard_normal((L, 1))) * math.sqrt(scale / 2)
    return ChannelRealization(h, L)


def check_single_ue(n: int = 10, seed: int = VERIFY_SEED, epsilon: float = 1e-3) -> CheckResult:
    rng = np.random.default_rng(seed + 1)
    pairing = PairingSolution((0,), 1, 0.0)
    worst = 0.0
    for _ in range(n):
        H = single_ue_channel(rng)
        exact = float(np.linalg.norm(H.H) ** 2)
        res = bisection_max_min_sinr(H, pairing, SupportCase.SINGLE_SERVING,
                                     cfg=BisectionConfig(epsilon=epsilon))
        worst = max(worst, abs(res.theta - exact) / exact)
    ok = worst <= 1e-3 + epsilon
    return CheckResult("bisection single UE", ok, f"max rel err {worst:.2e}")


def scalar_pair(rng: np.random.Generator) -> ChannelRealization:
    """Two single-antenna ANs, each serving one UE."""
    g = 10.0 ** rng.uniform(-0.5, 1.5, size=(2, 2))
    g[0, 0] *= 4.0
    g[1, 1] *= 4.0
    phase = np.exp(2j * np.pi * rng.random((2, 2)))
    return ChannelRealization(np.sqrt(g) * phase, 1)


def grid_max_min(G: np.ndarray, cap: float, n: int = 401) -> float:
    """Brute-force max-min SINR over a power grid, refined once around the best point."""
    def search(lo0, hi0, lo1, hi1):
        p0 = np.linspace(lo0, hi0, n)[:, None]
        p1 = np.linspace(lo1, hi1, n)[None, :]
        s0 = G[0, 0] * p0 / (1.0 + G[0, 1] * p1)
        s1 = G[1, 1] * p1 / (1.0 + G[1, 0] * p0)
        v = np.minimum(s0, s1)
        i, j = np.unravel_index(np.argmax(v), v.shape)
        return float(v[i, j]), float(p0[i, 0]), float(p1[0, j])

    best, a, b = search(0.0, cap, 0.0, cap)
    step = cap / (n - 1)
    refined, _, _ = search(max(a - step, 0.0), min(a + step, cap), max(b - step, 0.0), min(b + step, cap))
    return max(best, refined)


def check_scalar_pairs(n: int = 5, seed: int = VERIFY_SEED, epsilon: float = 1e-3) -> CheckResult:
    """K=2 scalar instances: bisection and power coordination against the grid."""
    rng = np.random.default_rng(seed + 2)
    pairing = PairingSolution((0, 1), 2, 0.0)
    worst = 0.0
    for _ in range(n):
        H = scalar_pair(rng)
        G = np.abs(H.H.T) ** 2  # G[k, i]: gain from AN i to UE k
        ref = grid_max_min(G, 0.5)
        theta = bisection_max_min_sinr(H, pairing, SupportCase.SINGLE_SERVING,
                                       cfg=BisectionConfig(epsilon=epsilon)).theta
        p = power_coordination(G, pairing, 1.0, epsilon)
        pc = float(np.min(np.diag(G) * p / (1.0 + (G * p).sum(axis=1) - np.diag(G) * p)))
        worst = max(worst, abs(theta - ref) / ref, abs(pc - ref) / ref)
    return CheckResult("K=2 scalar grid", worst <= 0.01, f"max rel err {worst:.2e}")


def check_power_coordination_fixture() -> CheckResult:
    G = np.array([[1.0, 0.5], [0.5, 1.0]])
    pairing = PairingSolution((0, 1), 2, 0.0)
    p = power_coordination(G, pairing, 2.0, 1e-9)
    s = np.diag(G) * p / (1.0 + (G * p).sum(axis=1) - np.diag(G) * p)
    ok = np.allclose(p, 1.0, atol=1e-9) and np.allclose(s, 2.0 / 3.0, atol=1e-8)
    return CheckResult("power coordination fixture", bool(ok), f"p={np.round(p, 6).tolist()}")


def check_dominance(n: int = 10, seed: int = VERIFY_SEED, epsilon: float = 1e-3,
                    solver_epsilon: float | None = None) -> CheckResult:
    """Per-snapshot ordering CoordPr >= LocalPowCoord >= Local at K=M=8.

    ``solver_epsilon`` overrides the bisection tolerance handed to the solvers
    only; the oracle slack stays tied to ``epsilon``.
    """
    eps_rate = epsilon / math.log(2.0)
    cfg = BisectionConfig(epsilon=epsilon if solver_epsilon is None else solver_epsilon)
    base = Scenario(K=8, M=8, seed=seed)
    bad = 0
    for i in range(n):
        r = {s: run_snapshot(replace(base, strategy=s), i, cfg).worse_rate
             for s in (Strategy.LOCAL, Strategy.LOCAL_POW_COORD, Strategy.COORD_PR)}
        ok = (r[Strategy.COORD_PR] >= r[Strategy.LOCAL_POW_COORD] - 2 * eps_rate
              and r[Strategy.LOCAL_POW_COORD] >= r[Strategy.LOCAL] - 2 * eps_rate)
        bad += not ok
    return CheckResult("dominance ordering", bad == 0, f"{n - bad}/{n} snapshots ordered")


def run_all(solver_epsilon: float | None = None) -> list:
    return [
        check_pairing(),
        check_single_ue(),
        check_scalar_pairs(),
        check_power_coordination_fixture(),
        check_dominance(solver_epsilon=solver_epsilon),
    ]
