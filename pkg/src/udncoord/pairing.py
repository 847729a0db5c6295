"""UE-to-AN pairing as a binary integer program.

Each UE gets exactly one serving AN, at most ``b_max`` ANs may be active and
each active AN serves at most ``u_max`` UEs; the total association cost is
minimized.

For a fixed active set the problem is a capacitated assignment, which
:func:`scipy.optimize.linear_sum_assignment` solves exactly once every AN
column is replicated ``u_max`` times. :func:`solve_pairing` runs a depth-first
branch and bound over the AN activation variables; node bounds come from a
Lagrangian relaxation of the one-AN-per-UE constraints (each AN then
independently keeps its ``u_max`` most profitable UEs) and from the plain
capacitated assignment that ignores ``b_max``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ConfigError, Infeasible, InstanceTooLarge
from .topology import Topology, link_distances, normalized_gain

ENUMERATION_CAP = 10**7


@dataclass(frozen=True)
class PairingProblem:
    costs: np.ndarray  # (K, M)
    b_max: int
    u_max: int
    L: int | None = None

    def __post_init__(self):
        c = np.array(self.costs, dtype=float)
        if c.ndim != 2 or c.size == 0:
            raise ConfigError("costs must be a non-empty K x M matrix")
        if not np.all(np.isfinite(c)) or np.any(c < 0):
            raise ConfigError("costs must be finite and nonnegative")
        c.setflags(write=False)
        object.__setattr__(self, "costs", c)
        K = c.shape[0]
        if not 1 <= self.b_max <= K:
            raise ConfigError(f"b_max={self.b_max} outside [1, K={K}]")
        if self.u_max < 1:
            raise ConfigError("u_max must be >= 1")
        if self.L is not None:
            if self.u_max > self.L:
                raise ConfigError(f"u_max={self.u_max} exceeds L={self.L}")
            if self.b_max < math.ceil(K / self.L):
                raise ConfigError(f"b_max={self.b_max} below ceil(K/L)={math.ceil(K / self.L)}")

    @property
    def K(self) -> int:
        return self.costs.shape[0]

    @property
    def M(self) -> int:
        return self.costs.shape[1]


@dataclass(frozen=True)
class PairingSolution:
    serving: tuple  # serving AN per UE
    M: int
    objective: float
    stats: dict = field(default_factory=dict, compare=False)

    @property
    def K(self) -> int:
        return len(self.serving)

    @property
    def rho(self) -> np.ndarray:
        r = np.zeros((self.K, self.M), dtype=int)
        r[np.arange(self.K), list(self.serving)] = 1
        return r

    @property
    def alpha(self) -> np.ndarray:
        a = np.zeros(self.M, dtype=int)
        a[list(self.active_set)] = 1
        return a

    @property
    def active_set(self) -> tuple:
        return tuple(sorted(set(self.serving)))

    @property
    def served(self) -> dict:
        """AN index -> tuple of UEs it serves (active ANs only)."""
        out: dict = {m: [] for m in self.active_set}
        for k, m in enumerate(self.serving):
            out[m].append(k)
        return {m: tuple(v) for m, v in out.items()}

    def to_json(self, problem: PairingProblem | None = None) -> str:
        doc = {"rho": self.rho.tolist(), "alpha": self.alpha.tolist(), "objective": self.objective}
        if problem is not None:
            doc.update(costs=problem.costs.tolist(), b_max=problem.b_max, u_max=problem.u_max)
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "PairingSolution":
        d = json.loads(text)
        rho = np.asarray(d["rho"], dtype=int)
        if np.any(rho.sum(axis=1) != 1):
            raise ValueError("rho must have exactly one 1 per row")
        return cls(tuple(int(m) for m in rho.argmax(axis=1)), rho.shape[1], float(d["objective"]))


def problem_from_json(text: str) -> PairingProblem:
    d = json.loads(text)
    return PairingProblem(np.asarray(d["costs"], dtype=float), int(d["b_max"]), int(d["u_max"]))


def build_costs(topology: Topology) -> np.ndarray:
    """Inverse normalized path gain, ``(d/d_edge)**alpha``."""
    return 1.0 / normalized_gain(link_distances(topology), topology)


def objective_of(costs: np.ndarray, serving) -> float:
    """Association cost, always summed in UE order so equal assignments compare exactly."""
    total = 0.0
    for k, m in enumerate(serving):
        total += float(costs[k, m])
    return total


def _assign(costs: np.ndarray, ans: np.ndarray, u_max: int):
    """Exact capacitated assignment of every UE to one of ``ans``; None if capacity is short."""
    K = costs.shape[0]
    if len(ans) * u_max < K:
        return None
    cols = np.repeat(ans, u_max)
    rows, picked = linear_sum_assignment(costs[:, cols])
    serving = np.empty(K, dtype=int)
    serving[rows] = cols[picked]
    return objective_of(costs, serving), serving


def _check_capacity(problem: PairingProblem) -> int:
    b = min(problem.b_max, problem.M)
    if b * problem.u_max < problem.K:
        raise Infeasible(
            f"min(b_max, M) * u_max = {b * problem.u_max} < K = {problem.K}: no assignment covers all UEs")
    return b


class _BranchAndBound:
    def __init__(self, problem: PairingProblem, b: int):
        self.c = problem.costs
        self.K, self.M = self.c.shape
        self.u = problem.u_max
        self.b = b
        self.best_obj = math.inf
        self.best_serving = None
        self.nodes = 0

    def dominated(self, bound: float) -> bool:
        # the slack only absorbs rounding in the Lagrangian sum, so pruning stays exact
        return bound >= self.best_obj + 1e-11 * max(1.0, abs(self.best_obj))

    def offer(self, result):
        if result is None:
            return
        obj, serving = result
        if obj < self.best_obj or (obj == self.best_obj and tuple(serving) < tuple(self.best_serving)):
            self.best_obj, self.best_serving = obj, serving

    def lagrangian(self, fixed_in, free, mu, iters):
        """Subgradient ascent on the dual of the assignment constraints.

        Returns (best bound, multipliers, per-AN relaxed values at the best bound).
        """
        c, u = self.c, self.u
        slots = self.b - int(fixed_in.sum())
        allowed = fixed_in | free
        best = -math.inf
        best_mu, best_v = mu, None
        step_scale = 2.0
        stall = 0
        for _ in range(iters):
            red = np.minimum(c - mu[:, None], 0.0)
            red[:, ~allowed] = 0.0
            if u < self.K:
                idx = np.argpartition(red, u - 1, axis=0)[:u]
                take = np.take_along_axis(red, idx, axis=0)
            else:
                idx = np.broadcast_to(np.arange(self.K)[:, None], red.shape)
                take = red
            v = take.sum(axis=0)
            free_v = np.where(free, v, 0.0)
            chosen = fixed_in.copy()
            if slots > 0:
                order = np.argsort(free_v, kind="stable")[:slots]
                order = order[free_v[order] < 0]
                chosen[order] = True
            bound = float(mu.sum() + v[fixed_in].sum() + free_v[chosen & free].sum())
            if bound > best + 1e-12 * abs(best if math.isfinite(best) else 1.0):
                best, best_mu, best_v, stall = bound, mu.copy(), v, 0
            else:
                stall += 1
                if stall >= 5:
                    step_scale *= 0.5
                    stall = 0
            if self.dominated(best):
                break
            # subgradient: 1 - number of chosen ANs that keep UE k
            cover = np.zeros(self.K)
            sel = np.flatnonzero(chosen)
            if sel.size:
                kept = idx[:, sel][take[:, sel] < 0]
                np.add.at(cover, kept, 1.0)
            g = 1.0 - cover
            gn = float(g @ g)
            if gn == 0.0:
                break
            target = self.best_obj if math.isfinite(self.best_obj) else abs(bound) * 1.5 + float(c.max())
            mu = mu + step_scale * max(target - bound, 1e-12) / gn * g
            if step_scale < 1e-4:
                break
        return best, best_mu, best_v

    def solve(self):
        M = self.M
        fixed_in = np.zeros(M, dtype=bool)
        free = np.ones(M, dtype=bool)
        mu0 = np.sort(self.c, axis=1)[:, min(1, M - 1)].copy()
        stack = [(fixed_in, free, mu0, 150)]
        while stack:
            fixed_in, free, mu, iters = stack.pop()
            self.nodes += 1
            n_in, n_free = int(fixed_in.sum()), int(free.sum())
            slots = self.b - n_in
            if (n_in + min(slots, n_free)) * self.u < self.K:
                continue
            if slots == 0 or n_free <= slots:
                self.offer(_assign(self.c, np.flatnonzero(fixed_in | (free if slots else False)), self.u))
                continue
            relaxed = _assign(self.c, np.flatnonzero(fixed_in | free), self.u)
            if relaxed[0] >= self.best_obj:
                continue
            used = np.unique(relaxed[1])
            if np.union1d(used, np.flatnonzero(fixed_in)).size <= self.b:
                self.offer(relaxed)
                continue
            bound, mu, v = self.lagrangian(fixed_in, free, mu, iters)
            if self.dominated(bound):
                continue
            # primal heuristic from the relaxed AN values
            score = np.where(free, v, np.inf)
            pick = np.argsort(score, kind="stable")[:slots]
            self.offer(_assign(self.c, np.union1d(np.flatnonzero(fixed_in), pick), self.u))
            if self.dominated(bound):
                continue
            # branch on the free AN carrying the most relaxed load
            load = np.bincount(relaxed[1], minlength=M).astype(float)
            load[~free] = -1.0
            j = int(np.argmax(load - 1e-9 * np.where(free, v, 0.0)))
            out_free = free.copy()
            out_free[j] = False
            in_fixed = fixed_in.copy()
            in_fixed[j] = True
            stack.append((fixed_in, out_free, mu, 40))
            stack.append((in_fixed, out_free, mu, 40))
        return self.best_obj, self.best_serving


def solve_pairing(problem: PairingProblem) -> PairingSolution:
    """Globally optimal pairing; raises :class:`Infeasible` when capacity cannot cover K."""
    b = _check_capacity(problem)
    K = problem.K
    if b >= min(K, problem.M):
        # the active-AN cap can never bind
        obj, serving = _assign(problem.costs, np.arange(problem.M), problem.u_max)
        return PairingSolution(tuple(int(m) for m in serving), problem.M, obj, {"nodes": 1})
    bb = _BranchAndBound(problem, b)
    obj, serving = bb.solve()
    if serving is None:
        raise Infeasible("branch and bound found no feasible pairing")
    return PairingSolution(tuple(int(m) for m in serving), problem.M, obj, {"nodes": bb.nodes})


def enumerate_pairing_oracle(problem: PairingProblem, cap: int = ENUMERATION_CAP) -> PairingSolution:
    """Exhaustive search over all ``M**K`` assignments (test oracle).

    Among equal-cost optima the lexicographically smallest ``(alpha, rho)`` wins.
    """
    K, M = problem.K, problem.M
    if M ** K > cap:
        raise InstanceTooLarge(f"M**K = {M ** K} exceeds enumeration cap {cap}")
    _check_capacity(problem)
    c = problem.costs
    best_key, best_serving = None, None
    chunk = 65536
    it = itertools.product(range(M), repeat=K)
    while True:
        block = np.array(list(itertools.islice(it, chunk)), dtype=np.int64).reshape(-1, K)
        if block.size == 0:
            break
        counts = np.zeros((block.shape[0], M), dtype=np.int64)
        np.add.at(counts, (np.repeat(np.arange(block.shape[0]), K), block.ravel()), 1)
        ok = (counts.max(axis=1) <= problem.u_max) & ((counts > 0).sum(axis=1) <= problem.b_max)
        if not ok.any():
            continue
        cand = block[ok]
        vals = c[np.arange(K)[None, :], cand].sum(axis=1)
        lo = vals.min()
        for row in cand[vals <= lo + 1e-12 * max(1.0, abs(lo))]:
            obj = objective_of(c, row)
            alpha = np.zeros(M, dtype=int)
            alpha[row] = 1
            rho = np.zeros((K, M), dtype=int)
            rho[np.arange(K), row] = 1
            key = (obj, tuple(alpha), tuple(rho.ravel()))
            if best_key is None or key < best_key:
                best_key, best_serving = key, row
    if best_serving is None:
        raise Infeasible("no feasible assignment")
    return PairingSolution(tuple(int(m) for m in best_serving), M, best_key[0])
