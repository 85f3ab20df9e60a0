"""
Leader-follower projected sub-gradient dynamics under stochastic communication.
One run interleaves leader updates at its wake-up iterations with follower
steps gated by activity and local-view refreshes gated by links, and records
everything needed for the increment, staleness and convergence checks.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple, TYPE_CHECKING

import numpy as np

from src.comm import (CommEvent, EventSampler, LocalInfoState, ProtocolSpec, make_rng,
                      staleness, update_local_info)
from src.errors import InputError
from src.game import (GameConstants, GameSpec, project_box, sigma_follower, sigma_from_views,
                      sigma_leader)
from src.schedule import LeaderSchedule, StepSchedule, leader_step_table
from src.settings import CONFIG

if TYPE_CHECKING:
    from src.equilibrium import ReferencePoint

INCREMENT_SLACK = CONFIG["numerics"]["increment_slack"]


@dataclass
class Trace:
    """
    Record of one run of `horizon` iterations.
    Per-iteration arrays are indexed by k in [0, horizon). `y` is the leader
    strategy in effect during iteration k (after any wake-up at k);
    `distance` has horizon + 1 entries, the last one for the final state.
    `staleness[k]` is ||x~_nm - x_m^k|| for the views the followers stepped on.
    Follower states are kept every `stride` iterations plus the final one.
    """
    horizon: int
    stride: int
    seed: int
    run_id: int
    protocol: str
    n_followers: int
    follower_dim: int
    leader_dim: int
    x_initial: np.ndarray
    y_initial: np.ndarray
    snapshot_iterations: np.ndarray
    x_snapshots: np.ndarray
    x_final: np.ndarray
    y: np.ndarray
    links: np.ndarray
    activity: np.ndarray
    step_sizes: np.ndarray
    leader_active: np.ndarray
    increments: np.ndarray
    staleness: np.ndarray
    distance: Optional[np.ndarray] = None
    lyapunov: List[Tuple[int, float]] = field(default_factory=list)

    @classmethod
    def empty(cls, spec: GameSpec, x0: np.ndarray, y0: np.ndarray, seed: int = 0, run_id: int = 0,
              protocol: str = "normal", stride: int = 1) -> "Trace":
        N, MF, ML = spec.n_followers, spec.follower_dim, spec.leader_dim
        return cls(
            horizon=0, stride=stride, seed=seed, run_id=run_id, protocol=protocol,
            n_followers=N, follower_dim=MF, leader_dim=ML,
            x_initial=np.array(x0, dtype=float), y_initial=np.array(y0, dtype=float),
            snapshot_iterations=np.array([0]), x_snapshots=np.array([x0], dtype=float),
            x_final=np.array(x0, dtype=float),
            y=np.zeros((0, ML)), links=np.zeros((0, N, N), dtype=bool),
            activity=np.zeros((0, N), dtype=bool), step_sizes=np.zeros((0, N + 1)),
            leader_active=np.zeros(0, dtype=bool), increments=np.zeros((0, N)),
            staleness=np.zeros((0, N, N)),
        )

    @property
    def y_final(self) -> np.ndarray:
        return self.y[-1] if self.horizon else self.y_initial

    def squared_error(self) -> Optional[np.ndarray]:
        return None if self.distance is None else self.distance ** 2

    def iterations_to(self, threshold: float) -> Optional[int]:
        """First k after which the distance to the reference stays below threshold"""
        if self.distance is None:
            return None
        above = np.flatnonzero(self.distance >= threshold)
        if len(above) == 0:
            return 0
        k = int(above[-1]) + 1
        return k if k < len(self.distance) else None

    def max_staleness(self) -> np.ndarray:
        if self.horizon == 0:
            return np.zeros(0)
        return self.staleness.reshape(self.horizon, -1).max(axis=1)


def follower_step(n: int, x_n: np.ndarray, local_view: np.ndarray, y: np.ndarray, e_n: bool,
                  alpha: float, spec: GameSpec) -> np.ndarray:
    """Projected sub-gradient step of follower n on its local view; frozen when inactive"""
    x_n = np.asarray(x_n, dtype=float)
    if not e_n:
        return x_n.copy()
    sigma_n = sigma_follower(n, local_view, spec)
    g = spec.follower_subgradient(n, x_n, sigma_n, y)
    return project_box(x_n - alpha * g, spec.follower_sets[n])


def follower_steps(x: np.ndarray, views: LocalInfoState, y: np.ndarray, active: np.ndarray,
                   alphas: np.ndarray, spec: GameSpec) -> np.ndarray:
    """
    All followers at once: row n equals follower_step(n, x[n], views.row(n),
    y, active[n], alphas[n], spec).
    """
    sigma_tilde = sigma_from_views(views.last_received, spec)
    g = spec.follower_subgradients(x, sigma_tilde, y)
    stepped = spec.project_followers(x - np.asarray(alphas)[:, None] * g)
    return np.where(np.asarray(active)[:, None], stepped, x)


def leader_step(y: np.ndarray, x_all: np.ndarray, alpha0: float, spec: GameSpec) -> np.ndarray:
    """Projected sub-gradient step of the leader on the true follower aggregate"""
    sigma0 = sigma_leader(x_all, spec)
    g0 = spec.leader_subgradient(np.asarray(y, dtype=float), sigma0)
    return project_box(y - alpha0 * g0, spec.leader_set)


def _reference_arrays(reference: Optional["ReferencePoint"]):
    if reference is None:
        return None, None
    return np.asarray(reference.x_star, dtype=float), np.asarray(reference.y_star, dtype=float)


def run(spec: GameSpec, protocol: ProtocolSpec, schedule: StepSchedule, leader_schedule: LeaderSchedule,
        horizon: int, initial: Tuple[np.ndarray, np.ndarray], seed: int,
        reference: Optional["ReferencePoint"] = None, stride: int = 1, run_id: int = 0) -> Trace:
    """
    Simulate `horizon` iterations. At each wake-up the leader steps first on
    the true x^k. Then the event is sampled, every link l_nm = 1 delivers x_m^k
    into follower n's view, and active followers step on their views. Under
    the normal protocol every view is exact, so staleness is identically zero.
    """
    if horizon < 0:
        raise InputError("horizon must be nonnegative")
    if stride < 1:
        raise InputError("stride must be at least 1")
    if schedule.n_followers != spec.n_followers:
        raise InputError(f"schedule has {schedule.n_followers} followers, game has {spec.n_followers}")
    x = np.array(initial[0], dtype=float).reshape(spec.n_followers, spec.follower_dim)
    y = np.array(initial[1], dtype=float).reshape(spec.leader_dim)
    if not spec.is_feasible(x, y):
        raise InputError("initial point is not feasible")

    trace = Trace.empty(spec, x, y, seed=seed, run_id=run_id, protocol=protocol.label, stride=stride)
    x_star, y_star = _reference_arrays(reference)

    def distance_sq(x_now, y_now):
        return float(np.sum((x_now - x_star) ** 2) + np.sum((y_now - y_star) ** 2))

    if horizon == 0:
        if x_star is not None:
            trace.distance = np.array([np.sqrt(distance_sq(x, y))])
        return trace

    N, MF, ML = spec.n_followers, spec.follower_dim, spec.leader_dim
    rng = make_rng(seed, run_id)
    sampler = EventSampler(protocol, spec)
    views = LocalInfoState.fresh(spec, x)

    follower_alpha = schedule.follower_step_table(horizon)
    leader_alpha = leader_step_table(schedule, leader_schedule, horizon)

    y_rec = np.empty((horizon, ML))
    links_rec = np.empty((horizon, N, N), dtype=bool)
    activity_rec = np.empty((horizon, N), dtype=bool)
    leader_rec = np.zeros(horizon, dtype=bool)
    increments = np.empty((horizon, N))
    stale_rec = np.empty((horizon, N, N))
    distance = np.empty(horizon + 1) if x_star is not None else None
    snapshot_iterations = [0]
    snapshots = [x.copy()]

    for k in range(horizon):
        if leader_schedule.is_wakeup(k):
            y = leader_step(y, x, leader_alpha[k], spec)
            leader_rec[k] = True
            if x_star is not None:
                trace.lyapunov.append((k, distance_sq(x, y)))
        if distance is not None:
            distance[k] = np.sqrt(distance_sq(x, y))

        event: CommEvent = sampler.sample(k, rng)
        views = update_local_info(views, event, x)
        stale_rec[k] = staleness(views, x)

        active = event.activity
        x_next = follower_steps(x, views, y, active, follower_alpha[k], spec)
        increments[k] = np.linalg.norm(x_next - x, axis=1)
        y_rec[k] = y
        links_rec[k] = event.links
        activity_rec[k] = active
        x = x_next
        if (k + 1) % stride == 0 or k + 1 == horizon:
            snapshot_iterations.append(k + 1)
            snapshots.append(x.copy())

    if distance is not None:
        distance[horizon] = np.sqrt(distance_sq(x, y))

    trace.horizon = horizon
    trace.snapshot_iterations = np.array(snapshot_iterations)
    trace.x_snapshots = np.array(snapshots)
    trace.x_final = x
    trace.y = y_rec
    trace.links = links_rec
    trace.activity = activity_rec
    trace.step_sizes = np.column_stack([follower_alpha, leader_alpha])
    trace.leader_active = leader_rec
    trace.increments = increments
    trace.staleness = stale_rec
    trace.distance = distance
    return trace


@dataclass(frozen=True)
class IncrementViolation:
    follower: int
    iteration: int
    increment: float
    bound: float


def check_increment_bound(trace: Trace, constants: GameConstants, schedule: StepSchedule,
                          slack: float = INCREMENT_SLACK) -> List[IncrementViolation]:
    """Every (n, k) with ||x_n^{k+1} - x_n^k|| > A_n alpha_n^k + slack"""
    if constants.subgradient_bounds is None:
        raise InputError("constants carry no sub-gradient bounds A_n")
    if trace.horizon == 0:
        return []
    bounds = np.asarray(constants.subgradient_bounds)[None, :] * schedule.follower_step_table(trace.horizon)
    ks, ns = np.nonzero(trace.increments > bounds + slack)
    return [IncrementViolation(int(n), int(k), float(trace.increments[k, n]), float(bounds[k, n]))
            for k, n in zip(ks, ns)]


def staleness_series(trace: Trace, schedule: StepSchedule) -> np.ndarray:
    """
    Partial sums S_nm(K) = sum over k < K of alpha_n^k ||x~_nm^k - x_m^k||,
    shape (horizon + 1, N, N) with S(0) = 0.
    """
    N = trace.n_followers
    if trace.horizon == 0:
        return np.zeros((1, N, N))
    weighted = schedule.follower_step_table(trace.horizon)[:, :, None] * trace.staleness
    return np.concatenate([np.zeros((1, N, N)), np.cumsum(weighted, axis=0)])


def leader_change_iterations(trace: Trace) -> List[int]:
    """Iterations k at which y^k differs from y^(k-1) (k = 0 compares with y^0)"""
    if trace.horizon == 0:
        return []
    previous = np.vstack([trace.y_initial[None, :], trace.y[:-1]])
    return [int(k) for k in np.flatnonzero(np.any(trace.y != previous, axis=1))]
