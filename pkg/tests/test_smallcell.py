import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from pydantic import ValidationError

from src.comm import ProtocolSpec
from src.dynamics import leader_change_iterations, run
from src.equilibrium import estimate_constants
from src.errors import ScenarioError
from src.game import sigma_followers, validate_game
from src.schedule import LeaderSchedule
from src.smallcell import (SmallCellParams, build_geometry, build_scenario, default_schedule, mbs_cost,
                           mbs_subgradient, sbs_cost, sbs_subgradient)

H = 1e-5


@pytest.fixture(scope="module")
def params():
    return SmallCellParams()


@pytest.fixture(scope="module")
def scenario(params):
    return build_scenario(params)


def random_states(params, rng, count=1000):
    n = rng.integers(params.n_cells, size=count)
    x = rng.uniform(0, params.power_cap, size=count)
    sigma = rng.uniform(0, params.power_cap, size=count)
    price = rng.uniform(0, params.price_cap, size=count)
    return zip(n, x, sigma, price)


class TestParams:
    def test_defaults(self, params):
        assert (params.n_cells, params.region_radius, params.neighbor_radius) == (10, 4.0, 1.0)
        assert (params.bandwidth, params.power_cap, params.path_loss) == (2048.0, 6.0, 1.0)
        assert (params.price_cap, params.leader_penalty, params.leader_period) == (7.0, 100.0, 10)

    def test_rejects_unknown_and_inverted(self):
        with pytest.raises(ValidationError):
            SmallCellParams(cells=3)
        with pytest.raises(ValidationError):
            SmallCellParams(user_distance_range=(0.5, 0.1))


class TestGeometry:
    def test_neighbor_rule(self, scenario, params):
        spec, geometry = scenario
        expected = (geometry.distances < params.neighbor_radius) & ~np.eye(params.n_cells, dtype=bool)
        assert_array_equal(geometry.adjacency > 0, expected)
        assert_array_equal(geometry.adjacency, geometry.adjacency.T)
        assert geometry.adjacency.sum(axis=1).min() >= 1

    def test_close_pair_are_neighbors(self):
        spec, geometry = build_scenario(SmallCellParams(n_cells=2, region_radius=0.25))
        assert geometry.distances[0, 1] < 0.5
        assert_array_equal(geometry.adjacency, [[0, 1], [1, 0]])
        assert_array_equal(spec.weights, [[0, 1], [1, 0]])

    def test_placement_exhaustion(self):
        params = SmallCellParams(n_cells=2, region_radius=4.0, neighbor_radius=1e-6, max_placement_attempts=5)
        with pytest.raises(ScenarioError):
            build_geometry(params)

    def test_same_seed_same_geometry(self, params):
        first, second = build_geometry(params), build_geometry(params)
        assert_array_equal(first.positions, second.positions)
        assert_array_equal(first.user_distances, second.user_distances)
        other = build_geometry(params.model_copy(update={"placement_seed": 1}))
        assert not np.array_equal(first.positions, other.positions)

    def test_inside_region(self, scenario, params):
        _, geometry = scenario
        assert np.all(np.linalg.norm(geometry.positions, axis=1) <= params.region_radius)
        low, high = params.user_distance_range
        assert np.all((geometry.user_distances >= low) & (geometry.user_distances <= high))

    def test_game_is_valid(self, scenario):
        spec, geometry = scenario
        assert validate_game(spec) == []
        assert_allclose(spec.leader_weights, geometry.v / geometry.v.sum())
        assert spec.name == "small-cell"
        assert geometry.to_dict()["placement_attempts"] == geometry.attempts

    def test_denormalized_interference(self, scenario, rng):
        spec, geometry = scenario
        for _ in range(100):
            x = rng.uniform(0, 6, size=(10, 1))
            physical = geometry.gains @ x[:, 0]
            assert_allclose(geometry.interference_scale * sigma_followers(x, spec)[:, 0], physical, rtol=1e-12)


class TestSbs:
    def test_free_power_is_wanted(self, scenario, params):
        _, geometry = scenario
        for n in range(params.n_cells):
            g = sbs_subgradient(n, 0.0, 0.0, 0.0, params, geometry)
            signal = geometry.user_distances[n] ** -params.path_loss
            assert_allclose(g, -params.bandwidth * signal / params.noise_density)
            assert g < 0

    def test_expensive_saturated_power_is_shed(self, scenario, params):
        _, geometry = scenario
        narrow = params.model_copy(update={"bandwidth": 1.0})
        for n in range(params.n_cells):
            assert sbs_subgradient(n, 6.0, 6.0, 7.0, narrow, geometry) > 0

    def test_matches_finite_differences(self, scenario, params, rng):
        _, geometry = scenario
        for n, x, sigma, price in random_states(params, rng):
            numeric = (sbs_cost(n, x + H, sigma, price, params, geometry)
                       - sbs_cost(n, x - H, sigma, price, params, geometry)) / (2 * H)
            assert_allclose(sbs_subgradient(n, x, sigma, price, params, geometry), numeric, rtol=1e-6, atol=1e-6)

    def test_convex_in_own_power(self, scenario, params, rng):
        _, geometry = scenario
        h = 1e-3
        for n, x, sigma, price in random_states(params, rng):
            second = (sbs_cost(n, x + h, sigma, price, params, geometry)
                      - 2 * sbs_cost(n, x, sigma, price, params, geometry)
                      + sbs_cost(n, x - h, sigma, price, params, geometry)) / h ** 2
            assert second > 0

    def test_batched_oracle_agrees(self, scenario, params, rng):
        spec, geometry = scenario
        x = rng.uniform(0, 6, size=(10, 1))
        sigma = rng.uniform(0, 6, size=(10, 1))
        y = np.array([3.5])
        batched = spec.follower_subgradients(x, sigma, y)[:, 0]
        single = [sbs_subgradient(n, x[n, 0], sigma[n, 0], 3.5, params, geometry) for n in range(10)]
        assert_allclose(batched, single, rtol=1e-12)
        assert_allclose(spec.follower_oracle.cost(x, sigma, y),
                        [sbs_cost(n, x[n, 0], sigma[n, 0], 3.5, params, geometry) for n in range(10)], rtol=1e-12)


class TestMbs:
    def test_no_revenue_collapses_price(self, scenario, params):
        _, geometry = scenario
        assert_allclose(mbs_subgradient(3.0, 0.0, params, geometry), 600.0)

    def test_interior_stationary_point(self, scenario, params):
        _, geometry = scenario
        sigma0 = 2.5
        price = geometry.v.sum() * sigma0 / (2 * params.leader_penalty)
        assert_allclose(mbs_subgradient(price, sigma0, params, geometry), 0.0, atol=1e-12)

    def test_matches_finite_differences(self, scenario, params, rng):
        _, geometry = scenario
        for _, _, sigma0, price in random_states(params, rng):
            numeric = (mbs_cost(price + H, sigma0, params, geometry) - mbs_cost(price - H, sigma0, params, geometry)) / (2 * H)
            assert_allclose(mbs_subgradient(price, sigma0, params, geometry), numeric, atol=1e-6)

    def test_leader_strong_convexity(self, scenario, rng):
        spec, _ = scenario
        constants = estimate_constants(spec, 200, rng)
        assert_allclose(constants.strong_convexity_leader, 200.0, rtol=1e-9)
        assert min(constants.strong_convexity_followers) > 0


class TestDefaultRun:
    def test_leader_first_step_is_best_response(self, scenario, params):
        spec, geometry = scenario
        schedule = default_schedule(params)
        x = np.full((10, 1), 3.0)
        sigma0 = float(spec.leader_weights @ x[:, 0])
        y = np.array([5.0])
        stepped = y - schedule.leader(0) * spec.leader_subgradient(y, np.array([sigma0]))
        assert_allclose(stepped, [geometry.v.sum() * sigma0 / 200.0])

    def test_price_changes_only_at_wakeups(self, scenario, params):
        spec, _ = scenario
        trace = run(spec, ProtocolSpec.bernoulli(0.7, 0.7), default_schedule(params),
                    LeaderSchedule(params.leader_period), 300, spec.midpoint(), seed=8, stride=300)
        assert set(leader_change_iterations(trace)) <= set(range(0, 300, 10))
        assert np.all((trace.y >= 0) & (trace.y <= params.price_cap))
        assert np.all((trace.x_final >= 0) & (trace.x_final <= params.power_cap))
