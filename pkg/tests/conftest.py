import numpy as np
import pytest

from src.comm import ProtocolSpec
from src.game import Box, CallableLeaderOracle, GameSpec, PerFollowerOracle, build_quadratic_game
from src.schedule import PowerStep


@pytest.fixture
def quadratic_game():
    return build_quadratic_game()


@pytest.fixture
def ring_game():
    """Quadratic game on a six-follower ring; gossip leaves most followers idle"""
    return build_quadratic_game(6)


@pytest.fixture
def path_adjacency():
    return np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)


@pytest.fixture
def path_game(path_adjacency):
    """Scalar game on the path 0 - 1 - 2 with uniform weights"""
    W = np.array([[0, 1, 0], [0.5, 0, 0.5], [0, 1, 0]])
    evaluators = [lambda x, s, y: 5 * x + s + y - 1] * 3
    return GameSpec(
        n_followers=3, follower_dim=1, leader_dim=1,
        follower_sets=(Box.interval(-1, 1),) * 3, leader_set=Box.interval(-1, 1),
        adjacency=path_adjacency, weights=W, leader_weights=np.full(3, 1 / 3),
        follower_oracle=PerFollowerOracle(evaluators),
        leader_oracle=CallableLeaderOracle(lambda y, s0: 10 * y + s0),
        name="path",
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def harmonic():
    return PowerStep(a=1.0, b=1.0, p=1.0)


@pytest.fixture
def normal():
    return ProtocolSpec.normal()

