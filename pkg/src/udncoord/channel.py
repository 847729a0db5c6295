"""Normalized CSI, precoding matrices, SINR and rates.

Channels are stacked per AN: rows ``m*L:(m+1)*L`` of column ``k`` hold the
length-L vector between AN ``m`` and UE ``k``. Noise power is one after
normalization, so SINR denominators carry a bare ``1``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

from .topology import Scenario, Topology, link_distances, normalized_gain


class SupportCase(str, enum.Enum):
    SINGLE_SERVING = "CaseI_SingleServing"
    JOINT_ACTIVE = "CaseII_JointActive"


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ChannelRealization:
    H: np.ndarray  # (M*L, K) complex
    L: int

    def __post_init__(self):
        H = _readonly(self.H)
        if H.ndim != 2 or H.shape[0] % self.L:
            raise ValueError(f"H shape {H.shape} incompatible with L={self.L}")
        if not np.all(np.isfinite(H)):
            raise ValueError("channel contains non-finite entries")
        object.__setattr__(self, "H", H)

    @property
    def M(self) -> int:
        return self.H.shape[0] // self.L

    @property
    def K(self) -> int:
        return self.H.shape[1]

    def block(self, m: int, k: int) -> np.ndarray:
        return self.H[m * self.L:(m + 1) * self.L, k]

    def to_json(self) -> str:
        return json.dumps({"L": self.L, "shape": list(self.H.shape), "H": _interleave(self.H)})

    @classmethod
    def from_json(cls, text: str) -> "ChannelRealization":
        d = json.loads(text)
        return cls(_deinterleave(d["H"], d["shape"]), d["L"])


@dataclass(frozen=True)
class PrecodingMatrix:
    W: np.ndarray  # (M*L, K) complex
    support_case: SupportCase
    L: int

    def __post_init__(self):
        object.__setattr__(self, "W", _readonly(self.W))
        object.__setattr__(self, "support_case", SupportCase(self.support_case))

    def block(self, m: int, k: int) -> np.ndarray:
        return self.W[m * self.L:(m + 1) * self.L, k]

    def block_norms_sq(self) -> np.ndarray:
        """(M, K) array of ``||w_km||^2``."""
        M = self.W.shape[0] // self.L
        return np.sum(np.abs(self.W.reshape(M, self.L, -1)) ** 2, axis=1)

    def to_json(self) -> str:
        return json.dumps({"L": self.L, "support_case": self.support_case.value,
                           "shape": list(self.W.shape), "W": _interleave(self.W)})

    @classmethod
    def from_json(cls, text: str) -> "PrecodingMatrix":
        d = json.loads(text)
        return cls(_deinterleave(d["W"], d["shape"]), d["support_case"], d["L"])


def _interleave(a: np.ndarray) -> list:
    return np.stack([a.real, a.imag], axis=-1).ravel().tolist()


def _deinterleave(flat, shape) -> np.ndarray:
    v = np.asarray(flat, dtype=float).reshape(*shape, 2)
    return v[..., 0] + 1j * v[..., 1]


def draw_fading(topology: Topology, scenario: Scenario, rng: np.random.Generator,
                snr_ref: float | None = None) -> ChannelRealization:
    """Rayleigh small-scale fading on top of normalized path gain.

    ``snr_ref`` (linear) overrides the scenario value; the fading draw itself is
    independent of it so common-seed sweeps over SNR share the same draws.
    """
    M, K, L = topology.M, topology.K, scenario.L
    delta = (rng.standard_normal((M, L, K)) + 1j * rng.standard_normal((M, L, K))) / np.sqrt(2.0)
    snr = scenario.snr_ref if snr_ref is None else snr_ref
    amp = np.sqrt(snr * normalized_gain(link_distances(topology), topology))  # (K, M)
    H = delta * amp.T[:, None, :]
    return ChannelRealization(H.reshape(M * L, K), L)


def interference_matrix(H: ChannelRealization, W: PrecodingMatrix) -> np.ndarray:
    """``|h_k^H w_i|^2`` as a K x K array (row = receiver, column = precoder)."""
    return np.abs(H.H.conj().T @ W.W) ** 2


def sinrs(H: ChannelRealization, W: PrecodingMatrix) -> np.ndarray:
    G = interference_matrix(H, W)
    signal = np.diag(G).copy()
    return signal / (1.0 + G.sum(axis=1) - signal)


def sinr(H: ChannelRealization, W: PrecodingMatrix, k: int) -> float:
    g = np.abs(H.H[:, k].conj() @ W.W) ** 2
    return float(g[k] / (1.0 + g.sum() - g[k]))


def rates(H: ChannelRealization, W: PrecodingMatrix) -> np.ndarray:
    """Per-UE spectral efficiency in bit/s/Hz."""
    return np.log2(1.0 + sinrs(H, W))


def effective_gains(H: ChannelRealization, beams: PrecodingMatrix, atol: float = 1e-9) -> np.ndarray:
    """Entry (k, i) is ``|h_k^H w_i|^2`` for unit-norm beam directions ``w_i``."""
    norms = np.linalg.norm(beams.W, axis=0)
    bad = (norms > 0) & (np.abs(norms - 1.0) > atol)
    if np.any(bad):
        raise ValueError(f"beam directions {np.flatnonzero(bad).tolist()} are not unit norm")
    return interference_matrix(H, beams)


def per_an_power(W: PrecodingMatrix, form: str = "squared") -> np.ndarray:
    """Per-AN power measure: ``sum_k ||w_km||^2`` or, literally, ``(sum_k ||w_km||)^2``.

    The literal form is squared so both are compared against the same cap.
    """
    sq = W.block_norms_sq()
    if form == "squared":
        return sq.sum(axis=1)
    if form == "literal":
        return np.sqrt(sq).sum(axis=1) ** 2
    raise ValueError(f"unknown power form {form!r}")
