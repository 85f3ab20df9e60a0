"""
Game definition for leader-follower network aggregative games.
Holds the feasible boxes, the follower weight graph, the sub-gradient oracles,
and the aggregation / projection primitives every other module builds on.
"""

import itertools
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from src.errors import InputError, OracleError
from src.settings import CONFIG

WEIGHT_TOLERANCE = CONFIG["numerics"]["weight_tolerance"]


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box [lower, upper] in R^d"""
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = _frozen(np.atleast_1d(self.lower))
        upper = _frozen(np.atleast_1d(self.upper))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise InputError(f"box bounds must be matching vectors, got {lower.shape} and {upper.shape}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def interval(cls, low: float, high: float, dim: int = 1) -> "Box":
        return cls(np.full(dim, float(low)), np.full(dim, float(high)))

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def contains(self, point: np.ndarray, tol: float = 0.0) -> bool:
        point = np.asarray(point, dtype=float)
        return bool(np.all(point >= self.lower - tol) and np.all(point <= self.upper + tol))

    def grid(self, points_per_axis: int) -> np.ndarray:
        """Full tensor grid, shape (points_per_axis**dim, dim), corners included"""
        axes = [np.linspace(lo, hi, points_per_axis) for lo, hi in zip(self.lower, self.upper)]
        return np.array(list(itertools.product(*axes)), dtype=float)

    def sample(self, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
        shape = (self.dim,) if size is None else (size, self.dim)
        return rng.uniform(self.lower, self.upper, size=shape)

    @staticmethod
    def weighted_sum(boxes: Sequence["Box"], weights: Sequence[float]) -> "Box":
        """Minkowski sum of nonnegatively weighted boxes (again a box)"""
        lower = sum(w * b.lower for b, w in zip(boxes, weights))
        upper = sum(w * b.upper for b, w in zip(boxes, weights))
        return Box(lower, upper)


def project_box(point: np.ndarray, box: Box) -> np.ndarray:
    """Euclidean projection onto an axis-aligned box (componentwise clamp)"""
    point = np.asarray(point, dtype=float)
    if point.shape[-1:] != (box.dim,):
        raise InputError(f"point of shape {point.shape} does not match box dimension {box.dim}")
    return np.clip(point, box.lower, box.upper)


# ---------------------------------------------------------------- oracles

class FollowerOracle(ABC):
    """
    Batched follower sub-gradient map.
    Row n of the result is d_n(x_n, sigma_n, y) and depends only on row n of
    x and sigma, so a single follower can be evaluated through the batch call.
    """

    @abstractmethod
    def __call__(self, x: np.ndarray, sigma: np.ndarray, y: np.ndarray) -> np.ndarray:
        """x, sigma: (N, M^F); y: (M^L,) -> (N, M^F)"""

    def single(self, n: int, x_n: np.ndarray, sigma_n: np.ndarray, y: np.ndarray,
               n_followers: int) -> np.ndarray:
        x = np.zeros((n_followers, len(x_n)))
        sigma = np.zeros_like(x)
        x[n] = x_n
        sigma[n] = sigma_n
        return self(x, sigma, y)[n]

    def cost(self, x: np.ndarray, sigma: np.ndarray, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no cost function")


class LeaderOracle(ABC):
    """Leader sub-gradient map d_0(y, sigma_0)"""

    @abstractmethod
    def __call__(self, y: np.ndarray, sigma0: np.ndarray) -> np.ndarray:
        """y: (M^L,), sigma0: (M^F,) -> (M^L,)"""

    def cost(self, y: np.ndarray, sigma0: np.ndarray) -> float:
        raise NotImplementedError(f"{type(self).__name__} has no cost function")


class PerFollowerOracle(FollowerOracle):
    """Adapter for a list of per-follower callables d_n(x_n, sigma_n, y)"""

    def __init__(self, evaluators: Sequence[Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]]):
        self.evaluators = list(evaluators)

    def __call__(self, x, sigma, y):
        return np.array([np.atleast_1d(d(x[n], sigma[n], y)) for n, d in enumerate(self.evaluators)],
                        dtype=float)

    def single(self, n, x_n, sigma_n, y, n_followers):
        return np.atleast_1d(np.asarray(self.evaluators[n](x_n, sigma_n, y), dtype=float))


class CallableLeaderOracle(LeaderOracle):
    def __init__(self, evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray]):
        self.evaluator = evaluator

    def __call__(self, y, sigma0):
        return np.atleast_1d(np.asarray(self.evaluator(y, sigma0), dtype=float))


class AffineFollowerOracle(FollowerOracle):
    """d_n = Q_n x_n + S_n sigma_n + Y_n y + r_n"""

    def __init__(self, Q: np.ndarray, S: np.ndarray, Y: np.ndarray, r: np.ndarray):
        self.Q = _frozen(Q)  # (N, MF, MF)
        self.S = _frozen(S)  # (N, MF, MF)
        self.Y = _frozen(Y)  # (N, MF, ML)
        self.r = _frozen(r)  # (N, MF)

    def __call__(self, x, sigma, y):
        return (np.einsum("nij,nj->ni", self.Q, x)
                + np.einsum("nij,nj->ni", self.S, sigma)
                + np.einsum("nij,j->ni", self.Y, y)
                + self.r)

    def single(self, n, x_n, sigma_n, y, n_followers):
        return self.Q[n] @ x_n + self.S[n] @ sigma_n + self.Y[n] @ y + self.r[n]

    def cost(self, x, sigma, y):
        # gradient of this cost is the oracle when Q_n is symmetric
        quad = 0.5 * np.einsum("ni,nij,nj->n", x, self.Q, x)
        linear = np.einsum("ni,ni->n", x,
                           np.einsum("nij,nj->ni", self.S, sigma) + np.einsum("nij,j->ni", self.Y, y) + self.r)
        return quad + linear


class AffineLeaderOracle(LeaderOracle):
    """d_0 = Q_0 y + S_0 sigma_0 + r_0"""

    def __init__(self, Q0: np.ndarray, S0: np.ndarray, r0: np.ndarray):
        self.Q0 = _frozen(np.atleast_2d(Q0))
        self.S0 = _frozen(np.atleast_2d(S0))
        self.r0 = _frozen(np.atleast_1d(r0))

    def __call__(self, y, sigma0):
        return self.Q0 @ y + self.S0 @ sigma0 + self.r0

    def cost(self, y, sigma0):
        return float(0.5 * y @ self.Q0 @ y + y @ (self.S0 @ sigma0 + self.r0))


# ---------------------------------------------------------------- game

@dataclass(frozen=True, eq=False)
class GameSpec:
    """Full definition of a leader-follower network aggregative game"""
    n_followers: int
    follower_dim: int
    leader_dim: int
    follower_sets: Tuple[Box, ...]
    leader_set: Box
    adjacency: np.ndarray
    weights: np.ndarray
    leader_weights: np.ndarray
    follower_oracle: FollowerOracle
    leader_oracle: LeaderOracle
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "follower_sets", tuple(self.follower_sets))
        object.__setattr__(self, "adjacency", _frozen(self.adjacency))
        object.__setattr__(self, "weights", _frozen(self.weights))
        object.__setattr__(self, "leader_weights", _frozen(self.leader_weights))

    def neighbors(self, n: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[n] > 0)

    @property
    def graph(self) -> nx.DiGraph:
        """Directed follower graph with an edge n -> m when n listens to m"""
        return nx.from_numpy_array(self.adjacency, create_using=nx.DiGraph)

    def sigma_box(self, n: int) -> Box:
        """Box containing every feasible sigma_n"""
        neighbors = self.neighbors(n)
        if len(neighbors) == 0:
            return Box(np.zeros(self.follower_dim), np.zeros(self.follower_dim))
        return Box.weighted_sum([self.follower_sets[m] for m in neighbors], self.weights[n, neighbors])

    def leader_sigma_box(self) -> Box:
        return Box.weighted_sum(self.follower_sets, self.leader_weights)

    def lower_corner(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.array([b.lower for b in self.follower_sets]), self.leader_set.lower.copy()

    def upper_corner(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.array([b.upper for b in self.follower_sets]), self.leader_set.upper.copy()

    def midpoint(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.array([b.midpoint for b in self.follower_sets]), self.leader_set.midpoint.copy()

    def is_feasible(self, x: np.ndarray, y: np.ndarray, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_followers, self.follower_dim):
            return False
        return (all(b.contains(x[n], tol) for n, b in enumerate(self.follower_sets))
                and self.leader_set.contains(y, tol))

    def project_followers(self, x: np.ndarray) -> np.ndarray:
        lower, _ = self.lower_corner()
        upper, _ = self.upper_corner()
        return np.clip(x, lower, upper)

    def follower_subgradients(self, x: np.ndarray, sigma: np.ndarray, y: np.ndarray) -> np.ndarray:
        try:
            g = np.asarray(self.follower_oracle(x, sigma, y), dtype=float)
        except Exception as e:
            raise OracleError(f"follower oracle failed: {e}", {"y": np.round(y, 6).tolist()}) from e
        if g.shape != (self.n_followers, self.follower_dim) or not np.all(np.isfinite(g)):
            raise OracleError("follower oracle returned a malformed or non-finite result",
                              {"shape": g.shape, "y": np.round(y, 6).tolist()})
        return g

    def follower_subgradient(self, n: int, x_n: np.ndarray, sigma_n: np.ndarray, y: np.ndarray) -> np.ndarray:
        """d_n(x_n, sigma_n, y) for a single follower"""
        try:
            g = np.asarray(self.follower_oracle.single(n, x_n, sigma_n, y, self.n_followers), dtype=float)
        except Exception as e:
            raise OracleError(f"follower oracle failed: {e}", {"follower": n}) from e
        if not np.all(np.isfinite(g)):
            raise OracleError("follower oracle returned non-finite values", {"follower": n})
        return g

    def leader_subgradient(self, y: np.ndarray, sigma0: np.ndarray) -> np.ndarray:
        try:
            g = np.asarray(self.leader_oracle(y, sigma0), dtype=float)
        except Exception as e:
            raise OracleError(f"leader oracle failed: {e}", {"y": np.round(y, 6).tolist()}) from e
        if g.shape != (self.leader_dim,) or not np.all(np.isfinite(g)):
            raise OracleError("leader oracle returned a malformed or non-finite result", {"shape": g.shape})
        return g

    def stacked_subgradient(self, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """g(z) with true aggregates: (follower block, leader block)"""
        g_x = self.follower_subgradients(x, sigma_followers(x, self), y)
        g_y = self.leader_subgradient(y, sigma_leader(x, self))
        return g_x, g_y


@dataclass(frozen=True)
class GameViolation:
    """One violated game invariant"""
    kind: str
    where: Tuple[int, ...]
    detail: str

    def __str__(self):
        return f"{self.kind}{list(self.where)}: {self.detail}"


def validate_game(spec: GameSpec, tol: float = WEIGHT_TOLERANCE) -> List[GameViolation]:
    """Every violated GameSpec invariant, with indices. Empty means valid."""
    report: List[GameViolation] = []
    N = spec.n_followers
    A, W, w0 = spec.adjacency, spec.weights, spec.leader_weights

    if A.shape != (N, N) or W.shape != (N, N) or w0.shape != (N,):
        report.append(GameViolation("shape", (), f"adjacency {A.shape}, weights {W.shape}, "
                                                  f"leader weights {w0.shape} for N={N}"))
        return report

    for n, m in zip(*np.nonzero((A != 0) & (A != 1))):
        report.append(GameViolation("adjacency-binary", (int(n), int(m)), f"a={A[n, m]}"))
    for n in np.flatnonzero(np.diag(A) != 0):
        report.append(GameViolation("adjacency-diagonal", (int(n),), "self-loop"))
    for n, m in zip(*np.nonzero(W < 0)):
        report.append(GameViolation("weight-negative", (int(n), int(m)), f"w={W[n, m]}"))
    mismatch = (W > 0) != (A == 1)
    for n, m in zip(*np.nonzero(mismatch)):
        report.append(GameViolation("weight-adjacency", (int(n), int(m)),
                                    f"w={W[n, m]} but a={A[n, m]}"))
    for n, total in enumerate(W.sum(axis=1)):
        if abs(total - 1.0) > tol:
            report.append(GameViolation("row-sum", (n,), f"sum of weights is {total!r}"))

    for n in np.flatnonzero(w0 < 0):
        report.append(GameViolation("leader-weight-negative", (int(n),), f"w0={w0[n]}"))
    if abs(w0.sum() - 1.0) > tol:
        report.append(GameViolation("leader-weight-sum", (), f"sum is {w0.sum()!r}"))

    if len(spec.follower_sets) != N:
        report.append(GameViolation("follower-sets", (), f"{len(spec.follower_sets)} boxes for N={N}"))
    boxes = [("follower-box", (n,), b, spec.follower_dim) for n, b in enumerate(spec.follower_sets)]
    boxes.append(("leader-box", (), spec.leader_set, spec.leader_dim))
    for kind, where, box, dim in boxes:
        if box.dim != dim:
            report.append(GameViolation(kind, where, f"dimension {box.dim}, expected {dim}"))
        if not (np.all(np.isfinite(box.lower)) and np.all(np.isfinite(box.upper))):
            report.append(GameViolation(kind, where, "bounds must be finite"))
        elif np.any(box.lower > box.upper):
            report.append(GameViolation(kind, where, "lower exceeds upper"))
    return report


# ---------------------------------------------------------------- aggregates

def sigma_follower(n: int, x_view: Union[Mapping[int, np.ndarray], np.ndarray], spec: GameSpec) -> np.ndarray:
    """sigma_n = sum over neighbors m of w_nm * x_m"""
    total = np.zeros(spec.follower_dim)
    for m in np.flatnonzero(spec.weights[n] > 0):
        try:
            x_m = x_view[m]
        except (KeyError, IndexError):
            x_m = None
        if x_m is None or np.any(np.isnan(np.asarray(x_m, dtype=float))):
            raise InputError(f"follower {n} is missing the strategy of neighbor {m}")
        total = total + spec.weights[n, m] * np.asarray(x_m, dtype=float)
    return total


def sigma_followers(x: np.ndarray, spec: GameSpec) -> np.ndarray:
    """All true sigma_n at once, shape (N, M^F)"""
    return spec.weights @ x


def sigma_from_views(views: np.ndarray, spec: GameSpec) -> np.ndarray:
    """All sigma_n computed from local views, views[n, m] = last x_m known to n"""
    return np.einsum("nm,nmd->nd", spec.weights, views)


def sigma_leader(x_all: np.ndarray, spec: GameSpec) -> np.ndarray:
    """sigma_0 = sum over n of w_0n * x_n"""
    x_all = np.asarray(x_all, dtype=float)
    if x_all.ndim == 1:
        x_all = x_all[:, None]
    if x_all.shape[0] != spec.n_followers:
        raise InputError(f"expected {spec.n_followers} follower strategies, got {x_all.shape[0]}")
    return spec.leader_weights @ x_all


# ---------------------------------------------------------------- constants

@dataclass(frozen=True)
class GameBounds:
    """Grid estimates of the sub-gradient bounds A_n, A_0 and the diameters B_n"""
    follower_bounds: Tuple[float, ...]
    leader_bound: float
    diameters: Tuple[float, ...]
    safety_factor: float = 1.1

    @property
    def certified_follower_bounds(self) -> np.ndarray:
        return self.safety_factor * np.asarray(self.follower_bounds)

    @property
    def certified_leader_bound(self) -> float:
        return self.safety_factor * self.leader_bound


@dataclass(frozen=True)
class GameConstants:
    """Constants of the convergence conditions"""
    strong_convexity_followers: Tuple[float, ...]
    strong_convexity_leader: float
    lipschitz_follower: float
    lipschitz_leader: float
    subgradient_bounds: Optional[Tuple[float, ...]] = None
    leader_subgradient_bound: Optional[float] = None
    diameters: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if any(c <= 0 for c in self.strong_convexity_followers) or self.strong_convexity_leader <= 0:
            raise InputError("strong convexity constants must be strictly positive")
        if self.lipschitz_follower < 0 or self.lipschitz_leader < 0:
            raise InputError("Lipschitz constants must be nonnegative")

    @property
    def l_bar(self) -> float:
        return max(2.0 * self.lipschitz_follower, self.lipschitz_leader)

    def with_bounds(self, bounds: GameBounds, certified: bool = True) -> "GameConstants":
        follower = bounds.certified_follower_bounds if certified else np.asarray(bounds.follower_bounds)
        leader = bounds.certified_leader_bound if certified else bounds.leader_bound
        return replace(self,
                       subgradient_bounds=tuple(float(a) for a in follower),
                       leader_subgradient_bound=float(leader),
                       diameters=tuple(bounds.diameters))

    def to_dict(self) -> Dict[str, object]:
        return {
            "C_n": list(self.strong_convexity_followers),
            "C_0": self.strong_convexity_leader,
            "L": self.lipschitz_follower,
            "L_0": self.lipschitz_leader,
            "L_bar": self.l_bar,
            "A_n": None if self.subgradient_bounds is None else list(self.subgradient_bounds),
            "A_0": self.leader_subgradient_bound,
            "B_n": None if self.diameters is None else list(self.diameters),
        }


def estimate_bounds(spec: GameSpec, grid_points_per_axis: int = CONFIG["numerics"]["bound_grid_points"],
                    safety_factor: float = CONFIG["numerics"]["bound_safety_factor"]) -> GameBounds:
    """
    Grid maxima of the sub-gradient norms over the feasible region.
    Followers are swept together: grid index i picks each follower's own
    i-th grid point, so one batched oracle call covers all N followers.
    """
    if grid_points_per_axis < 2:
        raise InputError("grid_points_per_axis must be at least 2")
    N = spec.n_followers
    G = grid_points_per_axis
    x_grids = np.stack([b.grid(G) for b in spec.follower_sets])          # (N, Gx, MF)
    sigma_grids = np.stack([spec.sigma_box(n).grid(G) for n in range(N)])  # (N, Gs, MF)
    y_grid = spec.leader_set.grid(G)

    follower_max = np.zeros(N)
    for iy, y in enumerate(y_grid):
        for ix in range(x_grids.shape[1]):
            for isg in range(sigma_grids.shape[1]):
                location = {"x_index": ix, "sigma_index": isg, "y_index": iy}
                try:
                    g = spec.follower_subgradients(x_grids[:, ix], sigma_grids[:, isg], y)
                except OracleError as e:
                    raise OracleError(str(e), {**e.location, **location}) from e
                np.maximum(follower_max, np.linalg.norm(g, axis=1), out=follower_max)

    leader_max = 0.0
    sigma0_grid = spec.leader_sigma_box().grid(G)
    for iy, y in enumerate(y_grid):
        for isg, s0 in enumerate(sigma0_grid):
            try:
                g0 = spec.leader_subgradient(y, s0)
            except OracleError as e:
                raise OracleError(str(e), {**e.location, "y_index": iy, "sigma0_index": isg}) from e
            leader_max = max(leader_max, float(np.linalg.norm(g0)))

    return GameBounds(
        follower_bounds=tuple(float(a) for a in follower_max),
        leader_bound=leader_max,
        diameters=tuple(b.diameter for b in spec.follower_sets),
        safety_factor=safety_factor,
    )


# ---------------------------------------------------------------- built-in games

def uniform_neighbor_weights(adjacency: np.ndarray) -> np.ndarray:
    degrees = adjacency.sum(axis=1, keepdims=True)
    return np.divide(adjacency, degrees, out=np.zeros_like(adjacency, dtype=float), where=degrees > 0)


def ring_adjacency(n_followers: int) -> np.ndarray:
    """Two followers listen to each other; three or more sit on a cycle"""
    if n_followers < 2:
        raise InputError("a network game needs at least two followers")
    graph = nx.path_graph(2) if n_followers == 2 else nx.cycle_graph(n_followers)
    return nx.to_numpy_array(graph, nodelist=range(n_followers))


def build_affine_game(adjacency: np.ndarray, weights: np.ndarray, leader_weights: np.ndarray,
                      follower_sets: Sequence[Box], leader_set: Box,
                      Q: np.ndarray, S: np.ndarray, Y: np.ndarray, r: np.ndarray,
                      Q0: np.ndarray, S0: np.ndarray, r0: np.ndarray, name: str = "affine") -> GameSpec:
    Q = np.asarray(Q, dtype=float)
    N, MF = Q.shape[0], Q.shape[1]
    return GameSpec(
        n_followers=N,
        follower_dim=MF,
        leader_dim=leader_set.dim,
        follower_sets=tuple(follower_sets),
        leader_set=leader_set,
        adjacency=adjacency,
        weights=weights,
        leader_weights=leader_weights,
        follower_oracle=AffineFollowerOracle(Q, S, Y, r),
        leader_oracle=AffineLeaderOracle(Q0, S0, r0),
        name=name,
    )


def build_quadratic_game(n_followers: int = 2) -> GameSpec:
    """
    Scalar test game: d_n = 5 x_n + sigma_n + y - 1, d_0 = 10 y + sigma_0,
    uniform weights, boxes [-1, 1]. GNE: x_n = 10/59, y = -1/59.
    """
    A = ring_adjacency(n_followers)
    N = n_followers
    return build_affine_game(
        adjacency=A,
        weights=uniform_neighbor_weights(A),
        leader_weights=np.full(N, 1.0 / N),
        follower_sets=[Box.interval(-1.0, 1.0)] * N,
        leader_set=Box.interval(-1.0, 1.0),
        Q=np.full((N, 1, 1), 5.0),
        S=np.ones((N, 1, 1)),
        Y=np.ones((N, 1, 1)),
        r=np.full((N, 1), -1.0),
        Q0=[[10.0]], S0=[[1.0]], r0=[0.0],
        name="quadratic-test",
    )


def build_decoupled_game(targets: Sequence[float], leader_target: float = 0.0,
                         low: float = -1.0, high: float = 1.0) -> GameSpec:
    """d_n = x_n - c_n, d_0 = y - c_0; no coupling, so L = L_0 = 0"""
    N = len(targets)
    A = ring_adjacency(N)
    return build_affine_game(
        adjacency=A,
        weights=uniform_neighbor_weights(A),
        leader_weights=np.full(N, 1.0 / N),
        follower_sets=[Box.interval(low, high)] * N,
        leader_set=Box.interval(low, high),
        Q=np.ones((N, 1, 1)),
        S=np.zeros((N, 1, 1)),
        Y=np.zeros((N, 1, 1)),
        r=-np.asarray(targets, dtype=float).reshape(N, 1),
        Q0=[[1.0]], S0=[[0.0]], r0=[-float(leader_target)],
        name="decoupled",
    )


def affine_game_from_dict(doc: Mapping[str, object]) -> GameSpec:
    """
    Build an affine game from a JSON-style document with keys
    adjacency, weights, leader_weights, follower_boxes [[lower, upper], ...],
    leader_box [lower, upper], followers {Q, S, Y, r}, leader {Q, S, r}.
    """
    try:
        A = np.asarray(doc["adjacency"], dtype=float)
        N = A.shape[0]
        followers = doc["followers"]
        leader = doc["leader"]
        Q = np.asarray(followers["Q"], dtype=float)
        MF = Q.shape[1]
        leader_box = doc["leader_box"]
        leader_set = Box(leader_box[0], leader_box[1])
        ML = leader_set.dim
        weights = doc.get("weights")
        W = uniform_neighbor_weights(A) if weights is None else np.asarray(weights, dtype=float)
        leader_weights = doc.get("leader_weights")
        w0 = np.full(N, 1.0 / N) if leader_weights is None else np.asarray(leader_weights, dtype=float)
        return build_affine_game(
            adjacency=A,
            weights=W,
            leader_weights=w0,
            follower_sets=[Box(lo, hi) for lo, hi in doc["follower_boxes"]],
            leader_set=leader_set,
            Q=Q.reshape(N, MF, MF),
            S=np.asarray(followers["S"], dtype=float).reshape(N, MF, MF),
            Y=np.asarray(followers["Y"], dtype=float).reshape(N, MF, ML),
            r=np.asarray(followers["r"], dtype=float).reshape(N, MF),
            Q0=np.asarray(leader["Q"], dtype=float).reshape(ML, ML),
            S0=np.asarray(leader["S"], dtype=float).reshape(ML, MF),
            r0=np.asarray(leader["r"], dtype=float).reshape(ML),
            name=str(doc.get("name", "custom")),
        )
    except (KeyError, TypeError, ValueError, IndexError) as e:
        raise InputError(f"malformed affine game document: {e}") from e
