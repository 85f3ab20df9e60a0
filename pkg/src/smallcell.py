"""
Small-cell power allocation as a leader-follower network aggregative game.
Small-cell base stations (followers) choose transmit powers; the macro base
station (leader) chooses the interference price. Utilities are negated into
costs so that every agent minimizes.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.errors import ScenarioError
from src.game import Box, FollowerOracle, GameSpec, LeaderOracle
from src.schedule import PowerStep, StepSchedule

REFERENCE_STEP = 1e-3


class SmallCellParams(BaseModel):
    """Deployment and economics of the small-cell network"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    n_cells: int = Field(10, ge=2)
    region_radius: float = Field(4.0, gt=0)
    neighbor_radius: float = Field(1.0, gt=0)
    bandwidth: float = Field(2048.0, gt=0)
    power_cap: float = Field(6.0, gt=0)
    path_loss: float = Field(1.0, gt=0)
    price_cap: float = Field(7.0, gt=0)
    leader_penalty: float = Field(100.0, gt=0)
    noise_density: float = Field(0.1, gt=0)
    leader_period: int = Field(10, ge=1)
    user_distance_range: Tuple[float, float] = (0.1, 0.5)
    placement_seed: int = Field(0, ge=0)
    max_placement_attempts: int = Field(100000, ge=1)

    @model_validator(mode="after")
    def _check_user_range(self):
        low, high = self.user_distance_range
        if not 0 < low <= high:
            raise ValueError("user_distance_range must satisfy 0 < low <= high")
        return self


@dataclass(frozen=True, eq=False)
class SmallCellGeometry:
    """Placement of the base stations and the derived path gains"""
    positions: np.ndarray
    distances: np.ndarray
    user_distances: np.ndarray
    adjacency: np.ndarray
    gains: np.ndarray
    interference_scale: np.ndarray
    v: np.ndarray
    attempts: int

    @property
    def graph(self) -> nx.Graph:
        return nx.from_numpy_array(self.adjacency)

    def to_dict(self) -> Dict[str, object]:
        return {
            "positions_km": self.positions.tolist(),
            "user_distances_km": self.user_distances.tolist(),
            "neighbors": [sorted(int(m) for m in np.flatnonzero(row)) for row in self.adjacency],
            "v": self.v.tolist(),
            "placement_attempts": self.attempts,
        }


class SbsOracle(FollowerOracle):
    """
    cost_n = lambda v_n x_n - A ln(1 + S_n), S_n = r_n^-b x_n / (N_0 + V'_n sigma_n)
    gradient = lambda v_n - A r_n^-b / (N_0 + V'_n sigma_n + r_n^-b x_n)
    """

    def __init__(self, params: SmallCellParams, geometry: SmallCellGeometry):
        self.bandwidth = params.bandwidth
        self.noise = params.noise_density
        self.signal = geometry.user_distances ** (-params.path_loss)
        self.scale = geometry.interference_scale
        self.v = geometry.v

    def __call__(self, x, sigma, y):
        power, interference = x[:, 0], self.scale * sigma[:, 0]
        grad = y[0] * self.v - self.bandwidth * self.signal / (self.noise + interference + self.signal * power)
        return grad[:, None]

    def single(self, n, x_n, sigma_n, y, n_followers):
        return np.array([sbs_gradient(n, x_n[0], sigma_n[0], y[0], self)])

    def cost(self, x, sigma, y):
        power, interference = x[:, 0], self.scale * sigma[:, 0]
        sinr = self.signal * power / (self.noise + interference)
        return y[0] * self.v * power - self.bandwidth * np.log1p(sinr)


class MbsOracle(LeaderOracle):
    """cost_0 = B_0 lambda^2 - (sum v) sigma_0 lambda; gradient = 2 B_0 lambda - (sum v) sigma_0"""

    def __init__(self, params: SmallCellParams, geometry: SmallCellGeometry):
        self.penalty = params.leader_penalty
        self.total_v = float(geometry.v.sum())

    def __call__(self, y, sigma0):
        return np.array([2.0 * self.penalty * y[0] - self.total_v * sigma0[0]])

    def cost(self, y, sigma0):
        return float(self.penalty * y[0] ** 2 - self.total_v * sigma0[0] * y[0])


def sbs_gradient(n: int, power: float, sigma_n: float, price: float, oracle: SbsOracle) -> float:
    denominator = oracle.noise + oracle.scale[n] * sigma_n + oracle.signal[n] * power
    return float(price * oracle.v[n] - oracle.bandwidth * oracle.signal[n] / denominator)


def place_cells(params: SmallCellParams, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray, int]:
    """Uniform placement in the disk, redrawn until no cell is isolated"""
    N = params.n_cells
    for attempt in range(1, params.max_placement_attempts + 1):
        radius = params.region_radius * np.sqrt(rng.random(N))
        angle = 2.0 * np.pi * rng.random(N)
        positions = np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
        distances = np.linalg.norm(positions[:, None, :] - positions[None, :, :], axis=2)
        adjacency = (distances < params.neighbor_radius) & ~np.eye(N, dtype=bool)
        if np.all(adjacency.any(axis=1)):
            return positions, distances, attempt
    raise ScenarioError(f"no placement without isolated cells after {params.max_placement_attempts} attempts")


def build_geometry(params: SmallCellParams, rng: Optional[np.random.Generator] = None) -> SmallCellGeometry:
    rng = np.random.default_rng(params.placement_seed) if rng is None else rng
    positions, distances, attempts = place_cells(params, rng)
    N = params.n_cells
    adjacency = ((distances < params.neighbor_radius) & ~np.eye(N, dtype=bool)).astype(float)
    low, high = params.user_distance_range
    user_distances = rng.uniform(low, high, size=N)
    safe = np.where(adjacency > 0, distances, 1.0)
    gains = np.where(adjacency > 0, safe ** (-params.path_loss), 0.0)
    return SmallCellGeometry(
        positions=positions,
        distances=distances,
        user_distances=user_distances,
        adjacency=adjacency,
        gains=gains,
        interference_scale=gains.sum(axis=1),
        v=gains.sum(axis=0),
        attempts=attempts,
    )


def build_scenario(params: SmallCellParams,
                   rng: Optional[np.random.Generator] = None) -> Tuple[GameSpec, SmallCellGeometry]:
    """
    Game of the small-cell network. Follower weights are the normalized path
    gains, so V'_n sigma_n is the physical interference at cell n; leader
    weights are v_n / sum v so that (sum v) sigma_0 is the leader's revenue base.
    """
    geometry = build_geometry(params, rng)
    N = params.n_cells
    weights = geometry.gains / geometry.interference_scale[:, None]
    spec = GameSpec(
        n_followers=N,
        follower_dim=1,
        leader_dim=1,
        follower_sets=tuple(Box.interval(0.0, params.power_cap) for _ in range(N)),
        leader_set=Box.interval(0.0, params.price_cap),
        adjacency=geometry.adjacency,
        weights=weights,
        leader_weights=geometry.v / geometry.v.sum(),
        follower_oracle=SbsOracle(params, geometry),
        leader_oracle=MbsOracle(params, geometry),
        name="small-cell",
    )
    return spec, geometry


def sbs_subgradient(n: int, x_n: float, sigma_n: float, price: float,
                    params: SmallCellParams, geometry: SmallCellGeometry) -> float:
    return sbs_gradient(n, x_n, sigma_n, price, SbsOracle(params, geometry))


def sbs_cost(n: int, x_n: float, sigma_n: float, price: float,
             params: SmallCellParams, geometry: SmallCellGeometry) -> float:
    signal = geometry.user_distances[n] ** (-params.path_loss)
    sinr = signal * x_n / (params.noise_density + geometry.interference_scale[n] * sigma_n)
    return float(price * geometry.v[n] * x_n - params.bandwidth * np.log1p(sinr))


def mbs_subgradient(price: float, sigma0: float, params: SmallCellParams, geometry: SmallCellGeometry) -> float:
    return float(2.0 * params.leader_penalty * price - geometry.v.sum() * sigma0)


def mbs_cost(price: float, sigma0: float, params: SmallCellParams, geometry: SmallCellGeometry) -> float:
    return float(params.leader_penalty * price ** 2 - geometry.v.sum() * sigma0 * price)


def default_schedule(params: SmallCellParams) -> StepSchedule:
    """
    Follower scale 0.1 moves a freshly woken cell across most of its power
    range in one step; the leader's first step 1/(2 B_0) lands exactly on its
    best response, and later steps average the best responses.
    """
    return StepSchedule.uniform(params.n_cells, PowerStep(a=0.1),
                                leader=PowerStep(a=1.0 / (2.0 * params.leader_penalty)))


def average_power(x: np.ndarray) -> float:
    return float(np.mean(x))
