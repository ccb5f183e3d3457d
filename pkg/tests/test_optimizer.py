import numpy as np
import pytest

from classes.constants import *
from classes.deformation import deform_with
from classes.environment import EnvironmentSpec, FeatureConfig
from classes.features import compute_features, raw_features
from classes.optimizer import (
    OptimizerConfig,
    load_trajectory_set,
    minimal_effort_correction,
    optimize_trajectory,
    sample_trajectory_set,
    save_trajectory_set,
)


class TestOptimizeTrajectory:

    def test_pure_efficiency_gives_straight_line(self, desk_env, modeled):
        result = optimize_trajectory([1.0, 0.0, 0.0], desk_env, modeled)
        assert result.converged
        np.testing.assert_allclose(result.trajectory, desk_env.straight_line(), atol=1e-4)

    def test_start_equal_goal_gives_constant_trajectory(self, modeled):
        env = EnvironmentSpec(start=[0.5, 0.5], goal=[0.5, 0.5], laptop_center=[3.0, 3.0],
                              human_center=[-3.0, 3.0], n=2, T=5)
        result = optimize_trajectory([1.0, 0.0, 0.0], env, modeled)
        np.testing.assert_allclose(result.trajectory, np.tile([0.5, 0.5], (6, 1)), atol=1e-6)

    def test_table_weight_lowers_table_feature(self, desk_env, modeled):
        straight = optimize_trajectory([1.0, 0.0, 0.0], desk_env, modeled).trajectory
        lowered = optimize_trajectory([1.0, 1.0, 0.0], desk_env, modeled).trajectory
        table = FeatureConfig([TABLE])
        assert compute_features(lowered, desk_env, table)[0] <= compute_features(straight, desk_env, table)[0]

    def test_cost_history_is_nonincreasing(self, desk_env, modeled):
        result = optimize_trajectory([0.3, 0.5, 0.8], desk_env, modeled)
        assert np.all(np.diff(result.cost_history) <= 1e-12)

    def test_endpoints_and_workspace_are_respected(self, desk_env, modeled):
        traj = optimize_trajectory([0.1, 1.0, 0.0], desk_env, modeled).trajectory
        np.testing.assert_array_equal(traj[0], desk_env.start)
        np.testing.assert_array_equal(traj[-1], desk_env.goal)
        assert np.all(traj >= desk_env.workspace_low - 1e-12)
        assert np.all(traj <= desk_env.workspace_high + 1e-12)

    def test_fixed_prefix_is_kept(self, desk_env, modeled):
        initial = optimize_trajectory([1.0, 0.0, 1.0], desk_env, modeled).trajectory
        replanned = optimize_trajectory([1.0, 1.0, 0.0], desk_env, modeled, initial=initial, fixed_prefix=3)
        np.testing.assert_array_equal(replanned.trajectory[:3], initial[:3])

    def test_max_iters_returns_best_iterate(self, desk_env, modeled):
        result = optimize_trajectory([0.3, 0.5, 0.8], desk_env, modeled, OptimizerConfig(max_iters=1))
        assert not result.converged
        assert result.cost <= result.cost_history[0]

    def test_single_iteration_respects_displacement_cap(self, desk_env, modeled):
        config = OptimizerConfig(max_iters=1, max_displacement=0.01)
        result = optimize_trajectory([0.0, 1.0, 0.0], desk_env, modeled, config)
        assert np.max(np.abs(result.trajectory - desk_env.straight_line())) <= 0.01 + 1e-12

    def test_nonpositive_displacement_cap_raises(self):
        with pytest.raises(ValueError):
            OptimizerConfig(max_displacement=0.0)

    def test_weight_dimension_mismatch_raises(self, desk_env, modeled):
        with pytest.raises(ValueError):
            optimize_trajectory([1.0, 0.0], desk_env, modeled)


class TestTrajectorySet:

    def test_single_member(self, desk_env, modeled):
        trajectory_set = sample_trajectory_set(desk_env, 1, seed=3, features=modeled)
        assert len(trajectory_set) == 1

    def test_same_seed_gives_identical_caches(self, desk_env, modeled):
        first = sample_trajectory_set(desk_env, 3, seed=7, features=modeled)
        second = sample_trajectory_set(desk_env, 3, seed=7, features=modeled)
        np.testing.assert_array_equal(first.raw_features, second.raw_features)

    def test_normalized_features_have_unit_spread(self, small_set):
        features = small_set.features
        assert np.all(features >= 0)
        spreads = features.std(axis=0)
        varying = small_set.raw_features[:, :features.shape[1]].std(axis=0) > NORMALIZER_FLOOR
        np.testing.assert_allclose(spreads[varying], 1.0)

    def test_cache_covers_every_feature(self, small_set, desk_env):
        expected = raw_features(small_set.trajectories[0], desk_env, ALL_FEATURES)
        np.testing.assert_allclose(small_set.raw_features[0], expected)

    def test_members_are_mostly_distinct(self, small_set):
        features = small_set.features
        distinct = [
            not np.allclose(features[i], features[j], atol=1e-6)
            for i in range(len(features)) for j in range(i + 1, len(features))
        ]
        assert np.mean(distinct) >= 0.9

    def test_saved_set_reloads(self, small_set, tmp_path):
        save_trajectory_set(small_set, str(tmp_path))
        loaded = load_trajectory_set(str(tmp_path / TRAJECTORY_SET_FILE_NAME))
        np.testing.assert_allclose(loaded.features, small_set.features)
        assert loaded.feature_config.normalizers == small_set.feature_config.normalizers

    def test_nonpositive_count_raises(self, desk_env):
        with pytest.raises(ValueError):
            sample_trajectory_set(desk_env, 0, seed=0)


class TestMinimalEffortCorrection:

    def test_unchanged_target_needs_no_push(self, desk_env, desk_operator, modeled):
        xi = optimize_trajectory([1.0, 0.2, 0.5], desk_env, modeled).trajectory
        phi = compute_features(xi, desk_env, modeled, smooth=True)
        solution = minimal_effort_correction(phi, xi, 3, desk_operator, desk_env, modeled)
        assert solution.converged
        np.testing.assert_array_equal(solution.u_star, np.zeros(3))
        assert solution.constraint_residual == 0.0

    def test_never_exceeds_observed_push(self, desk_env, desk_operator, modeled, rng):
        xi = optimize_trajectory([1.0, 0.2, 0.5], desk_env, modeled).trajectory
        for t in (1, 3, 5):
            u_h = rng.normal(0, 0.3, size=3)
            phi_d = compute_features(deform_with(xi, t, u_h, desk_operator), desk_env, modeled, smooth=True)
            solution = minimal_effort_correction(phi_d, xi, t, desk_operator, desk_env, modeled, witness=u_h)
            assert solution.converged
            assert np.linalg.norm(solution.u_star) <= np.linalg.norm(u_h) + 1e-6

    def test_direct_table_push_is_already_minimal(self, desk_env, desk_operator, modeled):
        xi = desk_env.straight_line()
        u_h = np.array([0.0, 0.0, -0.3])
        phi_d = compute_features(deform_with(xi, 3, u_h, desk_operator), desk_env, modeled, smooth=True)
        solution = minimal_effort_correction(phi_d, xi, 3, desk_operator, desk_env, modeled,
                                             witness=u_h, restrict_to=[TABLE])
        assert solution.converged
        assert solution.constrained_features == [TABLE]
        np.testing.assert_allclose(solution.u_star, u_h, atol=1e-4)

    def test_sideways_push_leaves_table_target_unchanged(self, desk_env, desk_operator, modeled):
        xi = desk_env.straight_line()
        u_h = np.array([0.0, 0.3, 0.0])
        phi_d = compute_features(deform_with(xi, 3, u_h, desk_operator), desk_env, modeled, smooth=True)
        solution = minimal_effort_correction(phi_d, xi, 3, desk_operator, desk_env, modeled,
                                             witness=u_h, restrict_to=[TABLE])
        assert np.linalg.norm(solution.u_star) < 1e-6

    def test_hessian_is_symmetric_positive_definite(self, desk_env, desk_operator, modeled):
        xi = desk_env.straight_line()
        u_h = np.array([0.1, 0.0, -0.2])
        phi_d = compute_features(deform_with(xi, 2, u_h, desk_operator), desk_env, modeled, smooth=True)
        solution = minimal_effort_correction(phi_d, xi, 2, desk_operator, desk_env, modeled, witness=u_h)
        np.testing.assert_allclose(solution.hessian, solution.hessian.T)
        assert np.all(np.linalg.eigvalsh(solution.hessian) > 0)

    def test_target_dimension_mismatch_raises(self, desk_env, desk_operator, modeled):
        with pytest.raises(ValueError):
            minimal_effort_correction([1.0, 2.0], desk_env.straight_line(), 2, desk_operator, desk_env, modeled)
