"""
Stochastic communication among followers.
Samples the per-iteration connectivity matrix and activity vector under the
normal, Bernoulli and gossip protocols, and keeps each follower's possibly
stale view of its neighbors' strategies.
"""

from dataclasses import dataclass
from enum import Enum
from typing import List, Tuple

import networkx as nx
import numpy as np

from src.errors import InputError, ScenarioError
from src.game import GameSpec


class ProtocolKind(str, Enum):
    NORMAL = "normal"
    BERNOULLI = "bernoulli"
    GOSSIP = "gossip"


@dataclass(frozen=True)
class ProtocolSpec:
    """Communication protocol; normal is Bernoulli with p = q = 1"""
    kind: ProtocolKind
    link_probability: float = 1.0
    activity_probability: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ProtocolKind(self.kind))
        p, q = self.link_probability, self.activity_probability
        if self.kind is ProtocolKind.BERNOULLI:
            if not (0.0 < p <= 1.0 and 0.0 < q <= 1.0):
                raise InputError(f"bernoulli protocol needs 0 < p, q <= 1, got p={p}, q={q}")
        elif (p, q) != (1.0, 1.0):
            raise InputError(f"{self.kind.value} protocol takes no link/activity probabilities")

    @classmethod
    def normal(cls) -> "ProtocolSpec":
        return cls(ProtocolKind.NORMAL)

    @classmethod
    def bernoulli(cls, p: float, q: float) -> "ProtocolSpec":
        return cls(ProtocolKind.BERNOULLI, p, q)

    @classmethod
    def gossip(cls) -> "ProtocolSpec":
        return cls(ProtocolKind.GOSSIP)

    @property
    def label(self) -> str:
        if self.kind is ProtocolKind.BERNOULLI:
            return f"bernoulli(p={self.link_probability:g},q={self.activity_probability:g})"
        return self.kind.value


@dataclass(frozen=True, eq=False)
class CommEvent:
    """Sampled links l_nm (n hears m) and activities e_n for iteration k"""
    links: np.ndarray
    activity: np.ndarray
    iteration: int


@dataclass(frozen=True, eq=False)
class LocalInfoState:
    """
    last_received[n, m] is the last strategy of follower m known to follower n.
    Entries with a_nm = 0 are undefined and held at zero; `mask` marks the
    defined ones.
    """
    last_received: np.ndarray
    mask: np.ndarray
    iteration: int

    @classmethod
    def fresh(cls, spec: GameSpec, x0: np.ndarray) -> "LocalInfoState":
        """Perfect initial information: every view starts at x_m^0"""
        mask = spec.adjacency > 0
        views = np.where(mask[:, :, None], np.asarray(x0, dtype=float)[None, :, :], 0.0)
        return cls(views, mask, 0)

    def row(self, n: int) -> np.ndarray:
        return self.last_received[n]


def make_rng(seed: int, run_id: int = 0) -> np.random.Generator:
    """
    Random stream for one run. The stream is spawned from SeedSequence(seed)
    with spawn key (run_id,), so run r sees the same stream whatever the
    total number of runs.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(int(run_id),)))


def _undirected_neighbors(adjacency: np.ndarray) -> List[np.ndarray]:
    A = np.asarray(adjacency)
    if not np.array_equal(A, A.T):
        raise InputError("gossip needs an undirected (symmetric) adjacency matrix")
    graph = nx.from_numpy_array(A)
    isolated = sorted(nx.isolates(graph))
    if isolated:
        raise InputError(f"followers {isolated} have no neighbor to contact")
    return [np.flatnonzero(A[n] > 0) for n in range(A.shape[0])]


def gossip_event(spec: GameSpec, waking: int, contact: int, k: int) -> CommEvent:
    """The event in which `waking` wakes up and exchanges with `contact`"""
    N = spec.n_followers
    links = np.zeros((N, N), dtype=bool)
    activity = np.zeros(N, dtype=bool)
    activity[[waking, contact]] = True
    links[waking, contact] = links[contact, waking] = True
    return CommEvent(links, activity, k)


class EventSampler:
    """Per-run event sampler; precomputes the neighbor structure once"""

    def __init__(self, protocol: ProtocolSpec, spec: GameSpec):
        self.protocol = protocol
        self.spec = spec
        self.neighbor_mask = spec.adjacency > 0
        self.gossip_neighbors = None
        if protocol.kind is ProtocolKind.GOSSIP:
            try:
                self.gossip_neighbors = _undirected_neighbors(spec.adjacency)
            except InputError as e:
                raise ScenarioError(f"gossip protocol unusable: {e}") from e

    def sample(self, k: int, rng: np.random.Generator) -> CommEvent:
        N = self.spec.n_followers
        kind = self.protocol.kind
        if kind is ProtocolKind.NORMAL:
            return CommEvent(self.neighbor_mask.copy(), np.ones(N, dtype=bool), k)
        if kind is ProtocolKind.BERNOULLI:
            links = (rng.random((N, N)) < self.protocol.link_probability) & self.neighbor_mask
            activity = rng.random(N) < self.protocol.activity_probability
            return CommEvent(links, activity, k)
        waking = int(rng.integers(N))
        candidates = self.gossip_neighbors[waking]
        contact = int(candidates[rng.integers(len(candidates))])
        return gossip_event(self.spec, waking, contact, k)


def sample_events(protocol: ProtocolSpec, spec: GameSpec, k: int, rng: np.random.Generator) -> CommEvent:
    return EventSampler(protocol, spec).sample(k, rng)


def gossip_probabilities(adjacency: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Marginal link and activity probabilities of the gossip protocol:
    p_nm = (1/N)(1/|N_n| + 1/|N_m|) on edges, q_n = (1/N)(1 + sum_m 1/|N_m|).
    """
    A = np.asarray(adjacency, dtype=float)
    _undirected_neighbors(A)
    N = A.shape[0]
    inv_degree = 1.0 / A.sum(axis=1)
    links = (inv_degree[:, None] + inv_degree[None, :]) * A / N
    activity = (1.0 + A @ inv_degree) / N
    return links, activity


def link_probabilities(protocol: ProtocolSpec, spec: GameSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Marginals (p_nm, q_n) of any protocol"""
    A = (spec.adjacency > 0).astype(float)
    N = spec.n_followers
    if protocol.kind is ProtocolKind.GOSSIP:
        return gossip_probabilities(A)
    return protocol.link_probability * A, np.full(N, protocol.activity_probability)


def assumption_constants(protocol: ProtocolSpec, spec: GameSpec) -> Tuple[float, float]:
    """Lower bounds (gamma, delta) on the link and activity probabilities"""
    links, activity = link_probabilities(protocol, spec)
    on_edges = links[spec.adjacency > 0]
    gamma = float(on_edges.min()) if on_edges.size else 0.0
    return gamma, float(activity.min())


def check_constraint_set(event: CommEvent, protocol: ProtocolSpec, spec: GameSpec) -> bool:
    """Does the event belong to the protocol's constraint set?"""
    A = spec.adjacency > 0
    links = np.asarray(event.links, dtype=bool)
    activity = np.asarray(event.activity, dtype=bool)
    N = spec.n_followers
    if links.shape != (N, N) or activity.shape != (N,):
        return False
    if np.any(links & ~A):
        return False
    if protocol.kind is not ProtocolKind.GOSSIP:
        return True
    if activity.sum() != 2:
        return False
    both = np.outer(activity, activity)
    off_diagonal = ~np.eye(N, dtype=bool)
    if np.any((links != both) & off_diagonal):
        return False
    return not np.any(both & off_diagonal & ~A)


def update_local_info(state: LocalInfoState, event: CommEvent, x_current: np.ndarray) -> LocalInfoState:
    """x~_nm <- x_m^k where l_nm^k = 1, unchanged elsewhere"""
    if state.iteration != event.iteration:
        raise InputError(f"local info is at iteration {state.iteration}, event at {event.iteration}")
    received = (np.asarray(event.links, dtype=bool) & state.mask)[:, :, None]
    views = np.where(received, np.asarray(x_current, dtype=float)[None, :, :], state.last_received)
    return LocalInfoState(views, state.mask, state.iteration + 1)


def staleness(state: LocalInfoState, x_current: np.ndarray) -> np.ndarray:
    """||x~_nm - x_m|| on neighbor pairs, 0 elsewhere"""
    gap = np.linalg.norm(state.last_received - np.asarray(x_current, dtype=float)[None, :, :], axis=2)
    return np.where(state.mask, gap, 0.0)
