"""
Step-size sequences a / (b + k)^p and the leader's periodic wake-up set.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from src.errors import InputError

LEADER = "leader"
Agent = Union[int, str]


@dataclass(frozen=True)
class PowerStep:
    """alpha(i) = a / (b + i)^p with a > 0, b >= 1, p in (0.5, 1]"""
    a: float = 1.0
    b: float = 1.0
    p: float = 1.0

    def __post_init__(self):
        if self.a <= 0:
            raise InputError(f"step scale must be positive, got {self.a}")
        if self.b < 1:
            raise InputError(f"step offset must be at least 1, got {self.b}")
        if not 0.5 < self.p <= 1.0:
            raise InputError(f"step exponent must lie in (0.5, 1], got {self.p}")

    def __call__(self, i):
        return self.a / np.power(self.b + np.asarray(i, dtype=float), self.p)


@dataclass(frozen=True)
class StepSchedule:
    """Per-follower step sequences plus the leader's, indexed by its update count"""
    followers: Tuple[PowerStep, ...]
    leader: PowerStep

    def __post_init__(self):
        object.__setattr__(self, "followers", tuple(self.followers))
        object.__setattr__(self, "_a", np.array([s.a for s in self.followers]))
        object.__setattr__(self, "_b", np.array([s.b for s in self.followers]))
        object.__setattr__(self, "_p", np.array([s.p for s in self.followers]))

    @classmethod
    def uniform(cls, n_followers: int, follower: PowerStep = PowerStep(),
                leader: Optional[PowerStep] = None) -> "StepSchedule":
        return cls((follower,) * n_followers, follower if leader is None else leader)

    @property
    def n_followers(self) -> int:
        return len(self.followers)

    def follower_steps(self, k: int) -> np.ndarray:
        """alpha_n^k for every follower"""
        return self._a / np.power(self._b + k, self._p)

    def follower_step_table(self, horizon: int) -> np.ndarray:
        """alpha_n^k for k < horizon, shape (horizon, N)"""
        ks = np.arange(horizon, dtype=float)[:, None]
        return self._a[None, :] / np.power(self._b[None, :] + ks, self._p[None, :])

    def all_share_exponent(self) -> bool:
        return bool(np.all(self._p == self.leader.p))


@dataclass(frozen=True)
class LeaderSchedule:
    """Periodic wake-ups K^L = {0, T, 2T, ...}; the longest gap is K_bar = T"""
    period: int = 1

    def __post_init__(self):
        if int(self.period) != self.period or self.period < 1:
            raise InputError(f"leader period must be a positive integer, got {self.period}")

    @property
    def k_bar(self) -> int:
        return self.period

    def is_wakeup(self, k: int) -> bool:
        return k % self.period == 0

    def latest_update(self, k: int) -> int:
        """Index j of the latest wake-up at or before k"""
        return k // self.period


def step_size(schedule: StepSchedule, agent: Agent, k: int, leader_updates_so_far: int = 0) -> float:
    """
    Follower n: a_n / (b_n + k)^p_n. Leader: a_0 / (b_0 + j)^p_0 with j the
    number of completed leader updates, so the value is held between wake-ups.
    """
    if k < 0:
        raise InputError(f"iteration must be nonnegative, got {k}")
    if agent == LEADER:
        return float(schedule.leader(leader_updates_so_far))
    return float(schedule.followers[agent](k))


def leader_step_table(schedule: StepSchedule, leader_schedule: LeaderSchedule, horizon: int) -> np.ndarray:
    """Leader step in effect at every k < horizon"""
    ks = np.arange(horizon)
    return schedule.leader(ks // leader_schedule.period)


def leader_iterations(schedule: LeaderSchedule, horizon: int) -> List[int]:
    """Wake-up iterations inside [0, horizon)"""
    if horizon < 1:
        raise InputError("horizon must be at least 1")
    return list(range(0, horizon, schedule.period))


@dataclass(frozen=True)
class KappaReport:
    """Largest ratio of the biggest to the smallest step at a common iteration"""
    kappa: float
    attained_at: int
    horizon: int
    analytic: Optional[float] = None


def kappa_bound(schedule: StepSchedule, horizon: int, leader_schedule: LeaderSchedule) -> KappaReport:
    """
    max over k <= horizon of max_agents alpha^k / min_agents alpha^k.
    With a shared exponent and a leader waking every iteration the supremum
    over all k is also given in closed form.
    """
    if horizon < 1:
        raise InputError("horizon must be at least 1")
    followers = schedule.follower_step_table(horizon + 1)
    leader = leader_step_table(schedule, leader_schedule, horizon + 1)
    steps = np.column_stack([followers, leader])
    ratios = steps.max(axis=1) / steps.min(axis=1)
    k_star = int(np.argmax(ratios))

    analytic = None
    if leader_schedule.period == 1 and schedule.all_share_exponent():
        agents: Sequence[PowerStep] = (*schedule.followers, schedule.leader)
        p = schedule.leader.p
        analytic = max((si.a / sj.a) * max(1.0, sj.b / si.b) ** p for si in agents for sj in agents)
    return KappaReport(kappa=float(ratios[k_star]), attained_at=k_star, horizon=horizon, analytic=analytic)
