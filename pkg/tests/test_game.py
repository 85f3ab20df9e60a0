import json
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from src.errors import InputError, OracleError
from src.game import (Box, GameConstants, affine_game_from_dict, build_decoupled_game, build_quadratic_game, estimate_bounds,
                      project_box, sigma_follower, sigma_followers, sigma_leader, validate_game)

from tests.factories import make_game

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


class TestValidateGame:
    def test_symmetric_pair_is_valid(self, quadratic_game):
        assert validate_game(quadratic_game) == []

    def test_ring_family_is_valid(self):
        spec = build_quadratic_game(6)
        assert validate_game(spec) == []
        assert_allclose(spec.weights[0], [0, 0.5, 0, 0, 0, 0.5])

    def test_row_sum_violation(self):
        spec = make_game([[0, 1], [1, 0]], [[0, 0.9], [1, 0]])
        report = validate_game(spec)
        assert [(v.kind, v.where) for v in report] == [("row-sum", (0,))]

    def test_weight_without_link(self, path_adjacency):
        spec = make_game(path_adjacency, [[0, 0.7, 0.3], [0.5, 0, 0.5], [0, 1, 0]])
        kinds = {(v.kind, v.where) for v in validate_game(spec)}
        assert ("weight-adjacency", (0, 2)) in kinds

    def test_link_without_weight(self, path_adjacency):
        spec = make_game(path_adjacency, [[0, 1, 0], [1, 0, 0], [0, 1, 0]])
        kinds = {(v.kind, v.where) for v in validate_game(spec)}
        assert ("weight-adjacency", (1, 2)) in kinds

    def test_leader_weights(self):
        spec = make_game([[0, 1], [1, 0]], [[0, 1], [1, 0]], leader_weights=[0.7, 0.7])
        assert [v.kind for v in validate_game(spec)] == ["leader-weight-sum"]
        spec = make_game([[0, 1], [1, 0]], [[0, 1], [1, 0]], leader_weights=[1.5, -0.5])
        assert [v.kind for v in validate_game(spec)] == ["leader-weight-negative"]

    def test_self_loop_and_non_binary(self):
        spec = make_game([[1, 1], [0.5, 0]], [[0.5, 0.5], [1, 0]])
        kinds = [v.kind for v in validate_game(spec)]
        assert "adjacency-diagonal" in kinds
        assert "adjacency-binary" in kinds

    def test_inverted_box(self):
        spec = make_game([[0, 1], [1, 0]], [[0, 1], [1, 0]], low=1.0, high=-1.0)
        kinds = [v.kind for v in validate_game(spec)]
        assert kinds.count("follower-box") == 2
        assert "leader-box" in kinds

    def test_wrong_shapes_stop_early(self):
        spec = make_game([[0, 1], [1, 0]], [[0, 1, 0], [1, 0, 0]])
        assert [v.kind for v in validate_game(spec)] == ["shape"]


class TestSigma:
    def test_single_neighbor_passthrough(self):
        spec = make_game([[0, 1], [1, 0]], [[0, 1], [1, 0]], dim=2)
        assert_allclose(sigma_follower(0, {1: np.array([2.0, 3.0])}, spec), [2.0, 3.0])

    def test_midpoint_of_two_neighbors(self, path_game):
        spec = make_game(path_game.adjacency, path_game.weights, dim=2)
        view = {0: np.array([1.0, 0.0]), 2: np.array([0.0, 1.0])}
        assert_allclose(sigma_follower(1, view, spec), [0.5, 0.5])

    def test_weighted_sum_of_three(self):
        A = np.array([[0, 1, 1, 1], [1, 0, 0, 0], [1, 0, 0, 0], [1, 0, 0, 0]])
        W = np.array([[0, 0.2, 0.3, 0.5], [1, 0, 0, 0], [1, 0, 0, 0], [1, 0, 0, 0]])
        spec = make_game(A, W)
        view = np.array([[np.nan], [1.0], [2.0], [3.0]])
        assert_allclose(sigma_follower(0, view, spec), [2.3], atol=1e-12)

    def test_missing_neighbor(self, path_game):
        with pytest.raises(InputError):
            sigma_follower(1, {0: np.array([1.0])}, path_game)
        with pytest.raises(InputError):
            sigma_follower(1, np.array([[1.0], [0.0], [np.nan]]), path_game)

    def test_leader_aggregate(self):
        spec = make_game([[0, 1], [1, 0]], [[0, 1], [1, 0]])
        assert_allclose(sigma_leader(np.array([[0.3], [0.3]]), spec), [0.3])
        spec = make_game([[0, 1], [1, 0]], [[0, 1], [1, 0]], leader_weights=[1.0, 0.0])
        assert_allclose(sigma_leader(np.array([[0.4], [-0.9]]), spec), [0.4])
        spec = make_game([[0, 1], [1, 0]], [[0, 1], [1, 0]], leader_weights=[0.25, 0.75])
        assert_allclose(sigma_leader(np.array([4.0, 8.0]), spec), [7.0])

    def test_leader_aggregate_wrong_count(self, quadratic_game):
        with pytest.raises(InputError):
            sigma_leader(np.zeros((3, 1)), quadratic_game)

    def test_aggregates_stay_in_common_box(self, rng):
        spec = build_quadratic_game(6)
        for _ in range(200):
            x = rng.uniform(-1, 1, size=(6, 1))
            sigma = sigma_followers(x, spec)
            assert np.all(np.abs(sigma) <= 1.0)
            assert abs(sigma_leader(x, spec)[0]) <= 1.0

    def test_linearity(self, rng):
        spec = make_game([[0, 1, 1], [1, 0, 1], [1, 1, 0]],
                         [[0, 0.4, 0.6], [0.5, 0, 0.5], [0.9, 0.1, 0]], dim=2)
        for _ in range(100):
            x, z = rng.normal(size=(3, 2)), rng.normal(size=(3, 2))
            a, b = rng.normal(size=2)
            for n in range(3):
                lhs = sigma_follower(n, a * x + b * z, spec)
                rhs = a * sigma_follower(n, x, spec) + b * sigma_follower(n, z, spec)
                assert_allclose(lhs, rhs, atol=1e-12)


class TestProjection:
    def test_examples(self):
        box = Box.interval(-1, 1)
        assert_allclose(project_box(np.array([0.3]), box), [0.3])
        assert_allclose(project_box(np.array([1.5]), box), [1.0])
        assert_allclose(project_box(np.array([-2.0, 0.5]), Box.interval(-1, 1, 2)), [-1.0, 0.5])

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            project_box(np.array([0.0, 0.0]), Box.interval(-1, 1))

    def test_idempotent_and_non_expansive(self, rng):
        box = Box(np.array([-1.0, 0.0, 2.0]), np.array([1.0, 0.5, 3.0]))
        p = rng.normal(scale=3.0, size=(10000, 3))
        q = rng.normal(scale=3.0, size=(10000, 3))
        pp, pq = project_box(p, box), project_box(q, box)
        assert_array_equal(project_box(pp, box), pp)
        assert np.all(np.linalg.norm(pp - pq, axis=1) <= np.linalg.norm(p - q, axis=1) + 1e-15)
        assert all(box.contains(point) for point in pp[:100])


class TestBounds:
    def test_identity_oracle(self):
        spec = make_game([[0, 1], [1, 0]], [[0, 1], [1, 0]])
        bounds = estimate_bounds(spec, grid_points_per_axis=5)
        assert_allclose(bounds.follower_bounds, [1.0, 1.0])
        assert_allclose(bounds.certified_follower_bounds, [1.1, 1.1])

    def test_diameter(self):
        spec = make_game([[0, 1], [1, 0]], [[0, 1], [1, 0]], dim=2)
        assert_allclose(estimate_bounds(spec, 3).diameters, [2 * np.sqrt(2)] * 2)

    def test_quadratic_game(self, quadratic_game):
        bounds = estimate_bounds(quadratic_game, grid_points_per_axis=11)
        assert_allclose(bounds.follower_bounds, [8.0, 8.0])
        assert_allclose(bounds.leader_bound, 11.0)
        assert_allclose(bounds.certified_follower_bounds, [8.8, 8.8])

    def test_grid_needs_two_points(self, quadratic_game):
        with pytest.raises(InputError):
            estimate_bounds(quadratic_game, grid_points_per_axis=1)

    def test_failure_carries_location(self):
        def fragile(x, s, y):
            if x[0] > 0.9:
                raise ZeroDivisionError("boom")
            return x

        spec = make_game([[0, 1], [1, 0]], [[0, 1], [1, 0]], follower=fragile)
        with pytest.raises(OracleError) as excinfo:
            estimate_bounds(spec, grid_points_per_axis=3)
        assert excinfo.value.location["x_index"] == 2
        assert "y_index" in excinfo.value.location

    def test_non_finite_result(self):
        spec = make_game([[0, 1], [1, 0]], [[0, 1], [1, 0]], leader=lambda y, s0: y / 0.0 * 0.0)
        with pytest.raises(OracleError):
            spec.leader_subgradient(np.array([0.5]), np.array([0.0]))


class TestConstants:
    def test_l_bar(self):
        c = GameConstants((5.0, 5.0), 10.0, 1.0, 1.0)
        assert c.l_bar == 2.0
        assert GameConstants((5.0,), 10.0, 0.5, 3.0).l_bar == 3.0

    def test_strong_convexity_must_be_positive(self):
        with pytest.raises(InputError):
            GameConstants((5.0, 0.0), 10.0, 1.0, 1.0)
        with pytest.raises(InputError):
            GameConstants((5.0,), 10.0, -1.0, 1.0)

    def test_with_bounds(self, quadratic_game):
        c = GameConstants((5.0, 5.0), 10.0, 1.0, 1.0).with_bounds(estimate_bounds(quadratic_game))
        assert_allclose(c.subgradient_bounds, [8.8, 8.8])
        assert_allclose(c.leader_subgradient_bound, 12.1)
        assert c.to_dict()["L_bar"] == 2.0


class TestBuiltInGames:
    def test_quadratic_subgradients(self, quadratic_game):
        g = quadratic_game.follower_subgradient(0, np.array([0.0]), np.array([0.0]), np.array([0.0]))
        assert_allclose(g, [-1.0])
        assert_allclose(quadratic_game.leader_subgradient(np.array([0.0]), np.array([1.0])), [1.0])

    def test_quadratic_stationary_at_analytic_point(self, quadratic_game):
        x = np.full((2, 1), 10 / 59)
        g_x, g_y = quadratic_game.stacked_subgradient(x, np.array([-1 / 59]))
        assert_allclose(g_x, 0.0, atol=1e-14)
        assert_allclose(g_y, 0.0, atol=1e-14)

    def test_cost_gradient_agrees(self, quadratic_game, rng):
        oracle = quadratic_game.follower_oracle
        h = 1e-6
        for _ in range(20):
            x = rng.uniform(-1, 1, size=(2, 1))
            sigma = rng.uniform(-1, 1, size=(2, 1))
            y = rng.uniform(-1, 1, size=1)
            numeric = (oracle.cost(x + h, sigma, y) - oracle.cost(x - h, sigma, y)) / (2 * h)
            assert_allclose(numeric, oracle(x, sigma, y)[:, 0], atol=1e-6)

    def test_decoupled(self):
        spec = build_decoupled_game([0.5, -2.0], leader_target=0.25)
        assert validate_game(spec) == []
        g = spec.follower_subgradients(np.zeros((2, 1)), np.ones((2, 1)), np.ones(1))
        assert_allclose(g[:, 0], [-0.5, 2.0])

    def test_affine_document(self):
        doc = json.loads((SCENARIOS / "affine_pair.json").read_text())
        spec = affine_game_from_dict(doc)
        assert (spec.n_followers, spec.follower_dim, spec.leader_dim) == (2, 2, 1)
        assert spec.name == "affine-pair"
        assert validate_game(spec) == []

    def test_malformed_document(self):
        with pytest.raises(InputError):
            affine_game_from_dict({"adjacency": [[0, 1], [1, 0]]})

    def test_ring_needs_two_followers(self):
        with pytest.raises(InputError):
            build_quadratic_game(1)
