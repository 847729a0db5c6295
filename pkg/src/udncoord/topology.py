"""Random deployments and normalized large-scale gains.

All geometry is planar. Gains are expressed relative to the gain at the
reference edge distance ``d_edge`` so that absolute path-loss intercepts,
carrier frequency and noise density never enter a computation: together with
a unit total power budget, ``snr_ref`` alone fixes the operating point.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

D_MIN = 1.0  # metres; floor on AN-UE distance


class Strategy(str, enum.Enum):
    LOCAL = "Local"
    COORD_PR = "CoordPr"
    LOCAL_POW_COORD = "LocalPowCoord"
    JP_CON = "JPcon"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Scenario:
    K: int
    M: int
    L: int = 4
    snr_ref_db: float = 10.0
    alpha_pl: float = 4.0
    area_side: float = 1000.0
    u_max: int | None = None
    strategy: Strategy = Strategy.LOCAL
    n_snapshots: int = 250
    seed: int = 0
    edge_ref: str = "corner"
    power_form: str = "squared"

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if self.u_max is None:
            object.__setattr__(self, "u_max", self.L)
        for name in ("K", "M", "L", "n_snapshots"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if not 1 <= self.u_max <= self.L:
            raise ConfigError(f"u_max={self.u_max} outside [1, L={self.L}]")
        if self.alpha_pl <= 0 or self.area_side <= 0:
            raise ConfigError("alpha_pl and area_side must be positive")
        if self.M < self.min_ans:
            raise ConfigError(f"M={self.M} < ceil(K/L)={self.min_ans}: not enough spatial dof")
        if self.edge_ref not in ("corner", "midpoint"):
            raise ConfigError(f"edge_ref must be 'corner' or 'midpoint', got {self.edge_ref!r}")
        if self.power_form not in ("squared", "literal"):
            raise ConfigError(f"power_form must be 'squared' or 'literal', got {self.power_form!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    @property
    def min_ans(self) -> int:
        return math.ceil(self.K / self.L)

    @property
    def b_max(self) -> int:
        """Active-AN cap implied by the strategy."""
        if self.strategy is Strategy.JP_CON:
            return self.min_ans
        return self.K

    @property
    def snr_ref(self) -> float:
        return 10.0 ** (self.snr_ref_db / 10.0)

    @property
    def d_edge(self) -> float:
        if self.edge_ref == "corner":
            return self.area_side * math.sqrt(2.0) / 2.0
        return self.area_side / 2.0


@dataclass(frozen=True)
class Topology:
    an_positions: np.ndarray  # (M, 2)
    ue_positions: np.ndarray  # (K, 2)
    area_side: float
    d_edge: float
    alpha_pl: float = 4.0
    d_min: float = field(default=D_MIN)

    def __post_init__(self):
        an = np.array(self.an_positions, dtype=float).reshape(-1, 2)
        ue = np.array(self.ue_positions, dtype=float).reshape(-1, 2)
        for pts in (an, ue):
            if np.any(pts < 0) or np.any(pts > self.area_side):
                raise ConfigError("positions must lie inside [0, area_side]^2")
            pts.setflags(write=False)
        if self.d_edge <= 0 or self.alpha_pl <= 0:
            raise ConfigError("d_edge and alpha_pl must be positive")
        object.__setattr__(self, "an_positions", an)
        object.__setattr__(self, "ue_positions", ue)

    @property
    def K(self) -> int:
        return self.ue_positions.shape[0]

    @property
    def M(self) -> int:
        return self.an_positions.shape[0]

    def to_json(self) -> str:
        return json.dumps({
            "an_positions": self.an_positions.tolist(),
            "ue_positions": self.ue_positions.tolist(),
            "area_side": self.area_side,
            "d_edge": self.d_edge,
            "alpha_pl": self.alpha_pl,
            "d_min": self.d_min,
        })

    @classmethod
    def from_json(cls, text: str) -> "Topology":
        return cls(**json.loads(text))


def snapshot_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent, individually reproducible stream for snapshot ``index``."""
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=(int(index),)))


def generate_topology(scenario: Scenario, rng: np.random.Generator) -> Topology:
    ue = rng.uniform(0.0, scenario.area_side, size=(scenario.K, 2))
    an = rng.uniform(0.0, scenario.area_side, size=(scenario.M, 2))
    return Topology(an, ue, scenario.area_side, scenario.d_edge, scenario.alpha_pl)


def link_distances(topology: Topology) -> np.ndarray:
    """K x M matrix of UE-AN distances, floored at ``d_min``."""
    diff = topology.ue_positions[:, None, :] - topology.an_positions[None, :, :]
    return np.maximum(np.hypot(diff[..., 0], diff[..., 1]), topology.d_min)


def normalized_gain(d, topology: Topology):
    """Large-scale gain relative to the gain at ``d_edge``: ``(d/d_edge)**-alpha``."""
    d = np.maximum(np.asarray(d, dtype=float), topology.d_min)
    g = (d / topology.d_edge) ** (-topology.alpha_pl)
    return float(g) if g.ndim == 0 else g
