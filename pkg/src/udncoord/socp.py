"""Primal-dual interior-point method for second-order cone programs.

Solves

    minimize    c'x
    subject to  G x + s = h,   A x = b,   s in C

where C is a product of a nonnegative orthant of dimension ``l`` and
second-order cones ``{(u0, u1) : u0 >= ||u1||}`` of the sizes listed in ``q``.
The iteration is the classic infeasible-start path-following scheme with
Nesterov-Todd scaling and a Mehrotra predictor-corrector step; the reduced
Newton system is solved by a Cholesky factorization of ``G' W^-2 G`` and a
Schur complement on the equality constraints.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla


@dataclass(frozen=True)
class Cones:
    l: int = 0
    q: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "q", tuple(int(n) for n in self.q))
        if self.l < 0 or any(n < 1 for n in self.q):
            raise ValueError("cone dimensions must be positive")

    @property
    def size(self) -> int:
        return self.l + sum(self.q)

    @property
    def degree(self) -> int:
        return self.l + len(self.q)

    def soc_slices(self):
        start = self.l
        for n in self.q:
            yield slice(start, start + n)
            start += n


@dataclass
class IPMState:
    iteration: int
    x: np.ndarray
    s: np.ndarray
    y: np.ndarray
    z: np.ndarray
    pcost: float
    dcost: float
    gap: float
    pres: float
    dres: float


@dataclass
class SOCPResult:
    status: str  # "optimal" | "inaccurate" | "stopped" | "max_iters" | "numerical"
    x: np.ndarray
    s: np.ndarray
    y: np.ndarray
    z: np.ndarray
    pcost: float
    dcost: float
    iterations: int
    pres: float
    dres: float
    gap: float


class _NTScaling:
    """Nesterov-Todd scaling ``W`` with ``W z = W^-1 s = lam`` on every cone."""

    def __init__(self, s: np.ndarray, z: np.ndarray, cones: Cones):
        self.cones = cones
        l = cones.l
        self.d = np.sqrt(s[:l] / z[:l])
        self.socs = []
        lam = np.empty_like(s)
        lam[:l] = np.sqrt(s[:l] * z[:l])
        for sl in cones.soc_slices():
            ss, zz = s[sl], z[sl]
            sn = _jnorm(ss)
            zn = _jnorm(zz)
            sb, zb = ss / sn, zz / zn
            gamma = np.sqrt(0.5 * (1.0 + sb @ zb))
            wb = sb.copy()
            wb[0] += zb[0]
            wb[1:] -= zb[1:]
            wb /= 2.0 * gamma
            v = wb.copy()
            v[0] += 1.0
            v /= np.sqrt(2.0 * (wb[0] + 1.0))
            eta = np.sqrt(sn / zn)
            self.socs.append((sl, eta, v))
            lam[sl] = self._apply(sl, eta, v, zz, inverse=False)
        self.lam = lam

    @staticmethod
    def _apply(sl, eta, v, x, inverse):
        # W = eta (2 v v' - J);  W^-1 = (2 Jv (Jv)' - J) / eta
        if x.ndim == 1:
            if inverse:
                jv = v.copy()
                jv[1:] *= -1.0
                out = 2.0 * jv * (jv @ x)
                out[0] -= x[0]
                out[1:] += x[1:]
                return out / eta
            out = 2.0 * v * (v @ x)
            out[0] -= x[0]
            out[1:] += x[1:]
            return eta * out
        u = v.copy()
        if inverse:
            u[1:] *= -1.0
        out = 2.0 * np.outer(u, u @ x)
        out[0] -= x[0]
        out[1:] += x[1:]
        return out / eta if inverse else eta * out

    def W(self, x):
        out = np.empty_like(x)
        l = self.cones.l
        out[:l] = (self.d * x[:l].T).T if x.ndim > 1 else self.d * x[:l]
        for sl, eta, v in self.socs:
            out[sl] = self._apply(sl, eta, v, x[sl], inverse=False)
        return out

    def Winv(self, x):
        out = np.empty_like(x)
        l = self.cones.l
        out[:l] = (x[:l].T / self.d).T if x.ndim > 1 else x[:l] / self.d
        for sl, eta, v in self.socs:
            out[sl] = self._apply(sl, eta, v, x[sl], inverse=True)
        return out


def _jnorm(u: np.ndarray) -> float:
    n1 = np.linalg.norm(u[1:])
    return float(np.sqrt((u[0] - n1) * (u[0] + n1)))


def jordan_product(u: np.ndarray, v: np.ndarray, cones: Cones) -> np.ndarray:
    out = np.empty_like(u)
    l = cones.l
    out[:l] = u[:l] * v[:l]
    for sl in cones.soc_slices():
        a, b = u[sl], v[sl]
        out[sl.start] = a @ b
        out[sl.start + 1:sl.stop] = a[0] * b[1:] + b[0] * a[1:]
    return out


def jordan_solve(lam: np.ndarray, r: np.ndarray, cones: Cones) -> np.ndarray:
    """Solve ``lam o x = r`` for ``x``."""
    out = np.empty_like(r)
    l = cones.l
    out[:l] = r[:l] / lam[:l]
    for sl in cones.soc_slices():
        a, rr = lam[sl], r[sl]
        det = (a[0] - np.linalg.norm(a[1:])) * (a[0] + np.linalg.norm(a[1:]))
        x0 = (a[0] * rr[0] - a[1:] @ rr[1:]) / det
        out[sl.start] = x0
        out[sl.start + 1:sl.stop] = (rr[1:] - x0 * a[1:]) / a[0]
    return out


def identity(cones: Cones) -> np.ndarray:
    e = np.zeros(cones.size)
    e[:cones.l] = 1.0
    for sl in cones.soc_slices():
        e[sl.start] = 1.0
    return e


def max_step(u: np.ndarray, du: np.ndarray, cones: Cones) -> float:
    """Largest ``t >= 0`` with ``u + t du`` in the cone (``u`` interior)."""
    t = np.inf
    l = cones.l
    if l:
        neg = du[:l] < 0
        if neg.any():
            t = min(t, float(np.min(-u[:l][neg] / du[:l][neg])))
    for sl in cones.soc_slices():
        a, d = u[sl], du[sl]
        # (a + t d)' J (a + t d) = qa t^2 + 2 qb t + qc, first positive root
        qa = d[0] ** 2 - d[1:] @ d[1:]
        qb = a[0] * d[0] - a[1:] @ d[1:]
        qc = max((a[0] - np.linalg.norm(a[1:])) * (a[0] + np.linalg.norm(a[1:])), 0.0)
        roots = []
        if abs(qa) <= 1e-300:
            if qb < 0:
                roots.append(-qc / (2.0 * qb))
        else:
            disc = qb * qb - qa * qc
            if disc >= 0:
                sq = np.sqrt(disc)
                q = -(qb + np.copysign(sq, qb))
                if q != 0:
                    roots.extend([q / qa, qc / q])
                else:
                    roots.append(0.0)
        pos = [r for r in roots if r > 0]
        if pos:
            t = min(t, min(pos))
        if d[0] < 0:
            t = min(t, -a[0] / d[0])
    return t


def _min_eig(u: np.ndarray, cones: Cones) -> float:
    vals = [np.min(u[:cones.l])] if cones.l else []
    for sl in cones.soc_slices():
        vals.append(u[sl.start] - np.linalg.norm(u[sl.start + 1:sl.stop]))
    return float(min(vals))


class _KKT:
    """Factorization of ``[[H, A'], [A, 0]]`` with ``H = Gs' Gs``."""

    def __init__(self, H: np.ndarray, A: np.ndarray):
        n = H.shape[0]
        reg = 0.0
        scale = max(1.0, float(np.max(np.abs(np.diag(H)))))
        for _ in range(6):
            try:
                self.chol = sla.cho_factor(H + reg * np.eye(n), lower=True, check_finite=False)
                break
            except np.linalg.LinAlgError:
                reg = scale * (1e-14 if reg == 0.0 else reg / scale * 100.0)
        else:
            raise np.linalg.LinAlgError("reduced KKT matrix is not positive definite")
        self.A = A
        if A.shape[0]:
            HiAt = sla.cho_solve(self.chol, A.T, check_finite=False)
            S = A @ HiAt
            self.HiAt = HiAt
            self.schur = sla.cho_factor(S, lower=True, check_finite=False)

    def solve(self, rx: np.ndarray, ry: np.ndarray):
        u = sla.cho_solve(self.chol, rx, check_finite=False)
        if not self.A.shape[0]:
            return u, np.zeros(0)
        dy = sla.cho_solve(self.schur, self.A @ u - ry, check_finite=False)
        return u - self.HiAt @ dy, dy


def solve_socp(c, G, h, cones: Cones, A=None, b=None, *, tol: float = 1e-9,
               max_iters: int = 100, loose_tol: float = 1e-6,
               monitor: Callable[[IPMState], bool] | None = None) -> SOCPResult:
    c = np.asarray(c, dtype=float)
    G = np.asarray(G, dtype=float)
    h = np.asarray(h, dtype=float)
    n = c.size
    A = np.zeros((0, n)) if A is None else np.asarray(A, dtype=float).reshape(-1, n)
    b = np.zeros(A.shape[0]) if b is None else np.asarray(b, dtype=float)
    if G.shape != (cones.size, n) or h.size != cones.size:
        raise ValueError("G, h shapes do not match the cone dimensions")
    e = identity(cones)
    nu = cones.degree
    resx0 = max(1.0, np.linalg.norm(c))
    resy0 = max(1.0, np.linalg.norm(b), np.linalg.norm(h))

    # initial point: least-squares primal/dual with W = I, shifted into the cone
    try:
        kkt = _KKT(G.T @ G, A)
    except np.linalg.LinAlgError:
        return _fail("numerical", n, cones, A)
    x, y = kkt.solve(G.T @ h, b)
    s = h - G @ x
    xt, yt = kkt.solve(-c, np.zeros(A.shape[0]))
    z = G @ xt
    y = yt
    for u in (s, z):
        a = _min_eig(u, cones)
        if a <= 0:
            u += (1.0 - a) * e

    status = "max_iters"
    it = 0
    state = None
    for it in range(max_iters + 1):
        rx = c + A.T @ y + G.T @ z
        ry = A @ x - b
        rz = G @ x + s - h
        gap = float(s @ z)
        pcost = float(c @ x)
        dcost = float(-h @ z - b @ y)
        pres = max(np.linalg.norm(ry), np.linalg.norm(rz)) / resy0
        dres = np.linalg.norm(rx) / resx0
        state = IPMState(it, x, s, y, z, pcost, dcost, gap, pres, dres)
        if pres <= tol and dres <= tol and (gap <= tol or gap <= tol * max(abs(pcost), abs(dcost))):
            status = "optimal"
            break
        if monitor is not None and monitor(state):
            status = "stopped"
            break
        if it == max_iters:
            break
        mu = gap / nu
        try:
            with np.errstate(divide="raise", invalid="raise"):
                scal = _NTScaling(s, z, cones)
            Gs = scal.Winv(G)
            kkt = _KKT(Gs.T @ Gs, A)
        except (np.linalg.LinAlgError, FloatingPointError, ValueError):
            status = "numerical"
            break
        lam = scal.lam
        Wi_rz = scal.Winv(rz)

        def newton(rc):
            q = jordan_solve(lam, rc, cones)
            dx, dy = kkt.solve(-rx - Gs.T @ (Wi_rz + q), -ry)
            wdz = Gs @ dx + Wi_rz + q  # = W dz
            dz = scal.Winv(wdz)
            wids = q - wdz  # = W^-1 ds
            ds = scal.W(wids)
            return dx, dy, dz, ds, wids, wdz

        lamlam = jordan_product(lam, lam, cones)
        dxa, dya, dza, dsa, wids_a, wdz_a = newton(-lamlam)
        ta = min(1.0, max_step(s, dsa, cones), max_step(z, dza, cones))
        sigma = (1.0 - ta) ** 3
        rc = -lamlam - jordan_product(wids_a, wdz_a, cones) + sigma * mu * e
        dx, dy, dz, ds, _, _ = newton(rc)
        t = min(1.0, 0.99 * min(max_step(s, ds, cones), max_step(z, dz, cones)))
        if not np.isfinite(t) or t <= 0:
            status = "numerical"
            break
        x = x + t * dx
        y = y + t * dy
        z = z + t * dz
        s = s + t * ds
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
            status = "numerical"
            break
    if status in ("numerical", "max_iters") and state is not None and max(state.pres, state.dres) <= loose_tol \
            and state.gap <= loose_tol * max(1.0, abs(state.pcost), abs(state.dcost)):
        # stalled next to the boundary after the solution was already pinned down
        status = "inaccurate"
    return SOCPResult(status, x, s, y, z, state.pcost, state.dcost, it, state.pres, state.dres, state.gap)


def _fail(status, n, cones, A):
    z = np.zeros(cones.size)
    return SOCPResult(status, np.zeros(n), z, np.zeros(A.shape[0]), z.copy(),
                      np.nan, np.nan, 0, np.inf, np.inf, np.inf)
