"""Precoders for the four coordination strategies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization, PrecodingMatrix, SupportCase, effective_gains, per_an_power, sinrs
from .conic import FeasibilityInstance, SINRProgram, check_sinr_feasibility, support_sets
from .errors import BracketError, RankDeficientLocalChannel
from .pairing import PairingSolution

RANK_TOL = 1e-10


@dataclass(frozen=True)
class BisectionConfig:
    theta_lb: float = 0.0
    theta_ub: float | None = None  # None: interference-free single-link bound
    epsilon: float = 1e-3
    max_iters: int = 200

    def __post_init__(self):
        if self.theta_lb < 0 or (self.theta_ub is not None and self.theta_ub <= self.theta_lb):
            raise ValueError("need 0 <= theta_lb < theta_ub")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass
class BisectionResult:
    theta: float  # min SINR achieved by W, never below theta_lb
    W: PrecodingMatrix
    iterations: int
    theta_ub: float
    theta_lb: float = 0.0
    probes: list = field(default_factory=list)


def zf_directions(H: ChannelRealization, pairing: PairingSolution) -> PrecodingMatrix:
    """Unit-norm per-AN zero-forcing directions built from local CSI only."""
    L = H.L
    W = np.zeros((H.M * L, H.K), dtype=complex)
    for m, ues in pairing.served.items():
        Hm = H.H[m * L:(m + 1) * L, list(ues)]  # (L, |U_m|)
        sv = np.linalg.svd(Hm, compute_uv=False)
        if sv[-1] <= RANK_TOL * max(sv[0], np.finfo(float).tiny):
            raise RankDeficientLocalChannel(f"local channel of AN {m} has rank < {len(ues)}")
        # columns of pinv(Hm^H): Hm^H D = I, so D kills intra-AN cross terms
        D = Hm @ np.linalg.inv(Hm.conj().T @ Hm)
        D /= np.linalg.norm(D, axis=0)
        W[m * L:(m + 1) * L, list(ues)] = D
    return PrecodingMatrix(W, SupportCase.SINGLE_SERVING, L)


def zf_local(H: ChannelRealization, pairing: PairingSolution, p_budget: float = 1.0) -> PrecodingMatrix:
    """Local zero-forcing with the AN power cap split equally among co-AN UEs."""
    D = zf_directions(H, pairing)
    cap = p_budget / len(pairing.active_set)
    p = np.array([cap / len(pairing.served[m]) for m in pairing.serving])
    return PrecodingMatrix(D.W * np.sqrt(p)[None, :], SupportCase.SINGLE_SERVING, H.L)


def single_link_bound(H: ChannelRealization, pairing: PairingSolution, case: SupportCase,
                      p_budget: float = 1.0) -> float:
    """Common-SINR upper bound: the weakest UE's interference-free SINR at full AN power."""
    cap = p_budget / len(pairing.active_set)
    bounds = []
    for k, ans in enumerate(support_sets(pairing, case)):
        amp = sum(np.linalg.norm(H.block(m, k)) for m in ans)
        bounds.append(cap * amp ** 2)
    return float(min(bounds))


def bisection_max_min_sinr(H: ChannelRealization, pairing: PairingSolution, support_case: SupportCase,
                           p_budget: float = 1.0, cfg: BisectionConfig = BisectionConfig(),
                           power_form: str = "squared") -> BisectionResult:
    """Largest common SINR (to within ``cfg.epsilon``) and a precoder achieving it."""
    support_case = SupportCase(support_case)
    program = SINRProgram(H, pairing, support_case, p_budget, power_form)
    probes = []

    def probe(theta):
        res = check_sinr_feasibility(
            FeasibilityInstance(H, pairing, support_case, theta, p_budget, power_form), program=program)
        probes.append((theta, res.feasible, res.iterations))
        return res

    if cfg.theta_ub is None:
        ub = single_link_bound(H, pairing, support_case, p_budget)
        # no common SINR above the bound exists, so the bound itself needs no probe
        ub = ub * (1.0 + 1e-9) + 1e-300
    else:
        ub = float(cfg.theta_ub)
        if probe(ub).feasible:
            raise BracketError(f"theta_ub={ub:.6g} is feasible")
    lb = float(cfg.theta_lb)
    W = PrecodingMatrix(np.zeros_like(H.H), support_case, H.L)
    if lb > 0:
        res = probe(lb)
        if not res.feasible:
            raise BracketError(f"theta_lb={lb:.6g} is infeasible")
        W = res.W
    it = 0
    while ub - lb > cfg.epsilon and it < cfg.max_iters:
        mid = 0.5 * (lb + ub)
        res = probe(mid)
        if res.feasible:
            lb, W = mid, res.W
        else:
            ub = mid
        it += 1
    W = _fill_power(H, W, pairing, p_budget, power_form)
    # the witness is certified, so its own min SINR is a valid (and tighter) answer
    achieved = min_sinr(H, W) if np.any(W.W) else 0.0
    return BisectionResult(max(lb, achieved), W, it, ub, lb, probes)


def _fill_power(H, W: PrecodingMatrix, pairing, p_budget, power_form) -> PrecodingMatrix:
    """Scale the whole matrix up until the tightest AN hits its cap (never lowers any SINR)."""
    cap = p_budget / len(pairing.active_set)
    power = per_an_power(W, power_form)
    peak = power.max()
    if peak <= 0:
        return W
    c = math.sqrt(cap / peak)
    if c <= 1.0:
        return W
    return PrecodingMatrix(W.W * c, W.support_case, W.L)


# ----------------------------------------------------------------------------
# power coordination over fixed beams


def _groups(pairing: PairingSolution):
    return [np.array(ues) for ues in pairing.served.values()]


def _min_sinr(G: np.ndarray, p: np.ndarray) -> float:
    rx = G * p[None, :]
    sig = np.diag(rx)
    return float(np.min(sig / (1.0 + rx.sum(axis=1) - sig)))


def minimal_powers(G: np.ndarray, theta: float, groups, cap: float, max_iters: int = 200):
    """Smallest power vector giving every UE SINR ``theta``, or None if it breaks a cap.

    Fixed-point iteration of the standard interference function from p = 0; the
    iterates grow monotonically, so crossing a cap proves infeasibility. A direct
    linear solve settles slowly converging cases exactly.
    """
    K = G.shape[0]
    diag = np.diag(G)
    cross = G - np.diag(diag)
    p = np.zeros(K)
    limit = cap * (1.0 + 1e-12)

    def over(v):
        return any(v[g].sum() > limit for g in groups)

    for _ in range(max_iters):
        nxt = theta * (1.0 + cross @ p) / diag
        if over(nxt):
            return None
        if np.max(np.abs(nxt - p)) <= 1e-13 * max(np.max(nxt), 1e-300):
            return nxt
        p = nxt
    F = theta * cross / diag[:, None]
    try:
        sol = np.linalg.solve(np.eye(K) - F, theta / diag)
    except np.linalg.LinAlgError:
        return None
    # a nonnegative solution exists iff the spectral radius of F is below one
    if not np.all(np.isfinite(sol)) or np.any(sol < 0) or over(sol):
        return None
    return sol


def power_coordination(eff_gains: np.ndarray, pairing: PairingSolution, p_budget: float = 1.0,
                       epsilon: float = 1e-3, max_iters: int = 200) -> np.ndarray:
    """Max-min SINR per-UE powers over fixed beams under per-AN sum-power caps."""
    G = np.asarray(eff_gains, dtype=float)
    K = G.shape[0]
    if G.shape != (K, K) or K != pairing.K:
        raise ValueError("effective gain matrix must be K x K")
    if np.any(np.diag(G) <= 0):
        raise ValueError("every UE needs a positive effective gain from its own beam")
    groups = _groups(pairing)
    cap = p_budget / len(groups)
    p_eq = np.empty(K)
    for g in groups:
        p_eq[g] = cap / len(g)
    # equal split is feasible, so it seeds the lower end of the bracket
    lb, best = _min_sinr(G, p_eq), p_eq
    ub = min(cap * G[k, k] for k in range(K)) * (1.0 + 1e-12)
    it = 0
    while ub - lb > epsilon and it < max_iters:
        mid = 0.5 * (lb + ub)
        p = minimal_powers(G, mid, groups, cap)
        if p is None:
            ub = mid
        else:
            lb, best = mid, p
        it += 1
    return _fill_groups(G, best, groups, cap)


def _fill_groups(G, p, groups, cap):
    """Raise the whole vector, then each AN in turn, without lowering the worst SINR."""
    p = p * min(cap / p[g].sum() for g in groups)
    target = _min_sinr(G, p)
    for g in groups:
        room = cap / p[g].sum()
        if room <= 1.0 + 1e-12:
            continue

        def ok(f):
            q = p.copy()
            q[g] *= f
            return _min_sinr(G, q) >= target

        if ok(room):
            p[g] *= room
            continue
        lo, hi = 1.0, room
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if ok(mid):
                lo = mid
            else:
                hi = mid
        p[g] *= lo
    return p


def local_power_coordinated(H: ChannelRealization, pairing: PairingSolution, p_budget: float = 1.0,
                            epsilon: float = 1e-3):
    """ZF beams from local CSI with powers coordinated over the effective gains."""
    D = zf_directions(H, pairing)
    p = power_coordination(effective_gains(H, D), pairing, p_budget, epsilon)
    return PrecodingMatrix(D.W * np.sqrt(p)[None, :], SupportCase.SINGLE_SERVING, H.L), p


def min_sinr(H: ChannelRealization, W: PrecodingMatrix) -> float:
    return float(np.min(sinrs(H, W)))
