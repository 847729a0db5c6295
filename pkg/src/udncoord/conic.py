"""Common-SINR feasibility as a second-order cone program.

A target SINR ``theta`` is achievable for every UE iff there are precoders with

    || [1, h_k^H w_1, ..., h_k^H w_K] || <= sqrt(1 + 1/theta) Re(h_k^H w_k),
    Im(h_k^H w_k) = 0,

per-AN power within ``p_budget/|A|`` and the support pattern of the strategy.
The decision is made through an auxiliary problem that minimizes a common
slack ``t`` added to the right-hand side of every SINR cone: ``theta`` is
feasible iff the optimal slack is (numerically) nonpositive. The slack problem
is always strictly feasible, so the interior-point solver never has to detect
infeasibility itself.

Variables are real: each complex block ``w_km`` contributes ``[Re; Im]`` and is
measured in units of ``sqrt(p_budget/|A|)`` so every power cap equals one.
Each SINR cone is divided by ``sqrt(1 + cap * ||h_k||^2)``, which keeps all
coefficients of order one whatever the path loss.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, PrecodingMatrix, SupportCase, per_an_power, sinrs
from .errors import SolverNumericalFailure
from .pairing import PairingSolution
from .socp import Cones, IPMState, solve_socp

FEAS_TOL = 1e-7
TOL_SINR = 1e-4
TOL_POW = 1e-6


@dataclass(frozen=True)
class FeasibilityInstance:
    H: ChannelRealization
    pairing: PairingSolution
    support_case: SupportCase
    theta: float
    p_budget: float = 1.0
    power_form: str = "squared"

    def __post_init__(self):
        object.__setattr__(self, "support_case", SupportCase(self.support_case))
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        if not self.p_budget > 0:
            raise ValueError("p_budget must be positive")
        if self.power_form not in ("squared", "literal"):
            raise ValueError(f"unknown power form {self.power_form!r}")
        if self.pairing.K != self.H.K or self.pairing.M != self.H.M:
            raise ValueError("pairing and channel dimensions differ")

    @property
    def per_an_cap(self) -> float:
        return self.p_budget / len(self.pairing.active_set)

    def to_json(self) -> str:
        return json.dumps({
            "H": json.loads(self.H.to_json()),
            "serving": list(self.pairing.serving),
            "support_case": self.support_case.value,
            "theta": self.theta,
            "p_budget": self.p_budget,
            "power_form": self.power_form,
        })


@dataclass
class FeasibilityResult:
    feasible: bool
    W: PrecodingMatrix | None
    slack: float
    iterations: int
    status: str


def support_sets(pairing: PairingSolution, case: SupportCase) -> list:
    """ANs allowed to carry each UE's data."""
    case = SupportCase(case)
    if case is SupportCase.SINGLE_SERVING:
        return [(m,) for m in pairing.serving]
    active = pairing.active_set
    return [active for _ in range(pairing.K)]


class SINRProgram:
    """Real-valued conic data for one (channel, pairing, support) triple.

    Everything except the ``sqrt(1 + 1/theta)`` factor is independent of the
    target, so one program serves a whole bisection.
    """

    def __init__(self, H: ChannelRealization, pairing: PairingSolution, case: SupportCase,
                 p_budget: float = 1.0, power_form: str = "squared"):
        self.H, self.pairing, self.case = H, pairing, SupportCase(case)
        self.power_form = power_form
        L, K = H.L, H.K
        self.L, self.K = L, K
        self.active = pairing.active_set
        self.cap = p_budget / len(self.active)
        self.support = support_sets(pairing, self.case)

        # variable layout: one 2L block per (UE, AN in its support), then aux, then slack
        self.blocks = []
        for k in range(K):
            for m in self.support[k]:
                self.blocks.append((k, m))
        nb = len(self.blocks)
        self.n_w = 2 * L * nb
        self.n_aux = nb if power_form == "literal" else 0
        self.n = self.n_w + self.n_aux + 1
        self.t_index = self.n - 1

        # R[k, i] / I[k, i]: real rows giving Re / Im of h_k^H w_i in scaled units
        sc = np.sqrt(self.cap)
        R = np.zeros((K, K, self.n))
        I = np.zeros((K, K, self.n))
        for j, (i, m) in enumerate(self.blocks):
            off = 2 * L * j
            hm = H.H[m * L:(m + 1) * L, :]  # (L, K)
            a, b = hm.real.T, hm.imag.T  # (K, L)
            R[:, i, off:off + L] = sc * a
            R[:, i, off + L:off + 2 * L] = sc * b
            I[:, i, off:off + L] = -sc * b
            I[:, i, off + L:off + 2 * L] = sc * a
        supp_norm = np.array([
            sum(np.linalg.norm(H.block(m, k)) ** 2 for m in (self.active if self.case is SupportCase.JOINT_ACTIVE
                                                             else self.support[k]))
            for k in range(K)])
        self.g = np.sqrt(1.0 + self.cap * supp_norm)
        self.R, self.I = R, I

        # SINR cones: s = [beta Re_kk / g + t ; 1/g ; (Re_ki, Im_ki)/g for all i]
        q_sinr = 2 * K + 2
        rows = []
        for k in range(K):
            blk = np.zeros((q_sinr, self.n))
            inner = np.empty((2 * K, self.n))
            inner[0::2] = R[k]
            inner[1::2] = I[k]
            blk[2:] = -inner / self.g[k]
            rows.append(blk)
        self._G_sinr = np.vstack(rows)
        self._h_sinr = np.zeros(K * q_sinr)
        self._h_sinr[1::q_sinr] = 1.0 / self.g
        self._row0 = np.arange(K) * q_sinr

        # power cones on the normalized variables (cap == 1)
        cols_of_an = {m: [] for m in self.active}
        for j, (k, m) in enumerate(self.blocks):
            cols_of_an[m].append(j)
        G_pow, h_pow, q_pow, lp_rows, lp_h = [], [], [], [], []
        for m in self.active:
            js = cols_of_an[m]
            if power_form == "squared":
                idx = np.concatenate([np.arange(2 * L * j, 2 * L * (j + 1)) for j in js])
                blk = np.zeros((1 + idx.size, self.n))
                blk[1 + np.arange(idx.size), idx] = -1.0
                G_pow.append(blk)
                hb = np.zeros(1 + idx.size)
                hb[0] = 1.0
                h_pow.append(hb)
                q_pow.append(1 + idx.size)
            else:
                lp = np.zeros(self.n)
                for j in js:
                    aux = self.n_w + j
                    lp[aux] = 1.0
                    blk = np.zeros((1 + 2 * L, self.n))
                    blk[0, aux] = -1.0
                    blk[1 + np.arange(2 * L), np.arange(2 * L * j, 2 * L * (j + 1))] = -1.0
                    G_pow.append(blk)
                    h_pow.append(np.zeros(1 + 2 * L))
                    q_pow.append(1 + 2 * L)
                lp_rows.append(lp)
                lp_h.append(1.0)
        self._G_pow = np.vstack(G_pow)
        self._h_pow = np.concatenate(h_pow)
        self._G_lp = np.array(lp_rows).reshape(-1, self.n)
        self._h_lp = np.array(lp_h, dtype=float)
        self.cones = Cones(len(lp_rows), (q_sinr,) * K + tuple(q_pow))

        self.A = np.array([I[k, k] for k in range(K)])
        self.c = np.zeros(self.n)
        self.c[self.t_index] = 1.0

    def matrices(self, theta: float):
        beta = np.sqrt(1.0 + 1.0 / theta)
        G_sinr = self._G_sinr.copy()
        for k, r0 in enumerate(self._row0):
            G_sinr[r0] = -beta * self.R[k, k] / self.g[k]
            G_sinr[r0, self.t_index] = -1.0
        G = np.vstack([self._G_lp, G_sinr, self._G_pow])
        h = np.concatenate([self._h_lp, self._h_sinr, self._h_pow])
        return G, h

    def precoder(self, x: np.ndarray) -> PrecodingMatrix:
        """Complex precoding matrix for a real iterate, phase-aligned and within every cap."""
        L, K = self.L, self.K
        W = np.zeros((self.H.M * L, K), dtype=complex)
        sc = np.sqrt(self.cap)
        for j, (k, m) in enumerate(self.blocks):
            v = x[2 * L * j:2 * L * (j + 1)]
            W[m * L:(m + 1) * L, k] = sc * (v[:L] + 1j * v[L:])
        P = PrecodingMatrix(W, self.case, L)
        power = per_an_power(P, self.power_form)
        over = power > self.cap
        if np.any(over):
            scale = np.ones(self.H.M)
            scale[over] = np.sqrt(self.cap / power[over])
            W = W * np.repeat(scale, L)[:, None]
        # rotate each column so the useful term h_k^H w_k is real and nonnegative
        useful = np.einsum("ik,ik->k", self.H.H.conj(), W)
        phase = np.ones(K, dtype=complex)
        nz = np.abs(useful) > 0
        phase[nz] = np.abs(useful[nz]) / useful[nz]
        return PrecodingMatrix(W * phase[None, :], self.case, L)


def witness_ok(program: SINRProgram, W: PrecodingMatrix, theta: float, tol_sinr: float = TOL_SINR,
               tol_pow: float = TOL_POW) -> bool:
    """Independent recomputation of SINRs and per-AN power for a candidate witness."""
    if np.any(per_an_power(W, program.power_form) > program.cap * (1.0 + tol_pow)):
        return False
    return bool(np.min(sinrs(program.H, W)) >= theta * (1.0 - tol_sinr))


def check_sinr_feasibility(instance: FeasibilityInstance, *, program: SINRProgram | None = None,
                           feas_tol: float = FEAS_TOL, tol_sinr: float = TOL_SINR) -> FeasibilityResult:
    """Decide whether ``instance.theta`` is achievable by every UE.

    Raises :class:`SolverNumericalFailure` when no reliable decision is reached.
    """
    if program is None:
        program = SINRProgram(instance.H, instance.pairing, instance.support_case,
                              instance.p_budget, instance.power_form)
    theta = instance.theta
    G, h = program.matrices(theta)
    early = {}

    def monitor(state: IPMState) -> bool:
        # a certified witness or a dual certificate ends the solve early
        if state.x[program.t_index] < 0 and state.pres < 1e-3:
            W = program.precoder(state.x)
            if witness_ok(program, W, theta, tol_sinr=0.0, tol_pow=0.0):
                early["W"] = W
                return True
        if state.dres < 1e-10 and state.dcost > 10 * feas_tol:
            early["infeasible"] = True
            return True
        return False

    res = solve_socp(program.c, G, h, program.cones, program.A, np.zeros(program.K), monitor=monitor)
    if "W" in early:
        return FeasibilityResult(True, early["W"], res.pcost, res.iterations, "witness")
    if "infeasible" in early:
        return FeasibilityResult(False, None, res.dcost, res.iterations, "dual_bound")
    if res.status not in ("optimal", "inaccurate"):
        W = program.precoder(res.x)
        if np.all(np.isfinite(res.x)) and witness_ok(program, W, theta, tol_sinr):
            return FeasibilityResult(True, W, res.pcost, res.iterations, res.status)
        raise SolverNumericalFailure(
            f"SOCP solver stopped with status {res.status!r} at theta={theta:.6g} "
            f"(pres={res.pres:.2e}, dres={res.dres:.2e})")
    slack = res.pcost
    if slack <= feas_tol:
        W = program.precoder(res.x)
        if witness_ok(program, W, theta, tol_sinr):
            return FeasibilityResult(True, W, slack, res.iterations, res.status)
        if slack > 0:
            return FeasibilityResult(False, None, slack, res.iterations, "marginal")
        raise SolverNumericalFailure(
            f"slack {slack:.3e} <= 0 but the witness fails recomputation at theta={theta:.6g}")
    return FeasibilityResult(False, None, slack, res.iterations, res.status)
