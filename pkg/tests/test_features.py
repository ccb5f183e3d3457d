import numpy as np
import pytest

from classes.constants import *
from classes.environment import EnvironmentSpec, FeatureConfig
from classes.features import (
    compute_features,
    cost_and_gradient,
    feature_gradients,
    hinge_feature,
    linear_cost,
    phri_cost,
)


@pytest.fixture
def line_env():
    return EnvironmentSpec(start=[0.0, 0.0], goal=[2.0, 0.0], laptop_center=[1.0, 3.0],
                           human_center=[1.0, -3.0], n=2, T=2, dt=1.0)


class TestComputeFeatures:

    def test_efficiency_of_unit_steps(self, line_env):
        traj = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        phi = compute_features(traj, line_env, FeatureConfig([EFFICIENCY]))
        assert phi[0] == pytest.approx(2.0)

    def test_constant_trajectory_has_zero_efficiency(self, desk_env):
        traj = np.tile(desk_env.start, (desk_env.waypoint_count, 1))
        assert compute_features(traj, desk_env, FeatureConfig())[0] == 0.0

    def test_waypoints_on_table_have_zero_table_cost(self, line_env):
        traj = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        assert compute_features(traj, line_env, FeatureConfig([TABLE]))[0] == 0.0

    def test_divisors_scale_each_feature(self, line_env):
        traj = np.array([[0.0, 0.0], [1.0, 0.5], [2.0, 0.0]])
        raw = compute_features(traj, line_env, FeatureConfig([EFFICIENCY, TABLE]))
        scaled = compute_features(traj, line_env, FeatureConfig([EFFICIENCY, TABLE], {EFFICIENCY: 4.0, TABLE: 0.5}))
        np.testing.assert_allclose(scaled, raw / [4.0, 0.5])

    def test_dimension_mismatch_raises(self, desk_env):
        with pytest.raises(ValueError):
            compute_features(np.zeros((3, 3)), desk_env, FeatureConfig())

    def test_unknown_feature_is_rejected(self):
        with pytest.raises(ValueError):
            FeatureConfig(['cup_orientation'])

    def test_features_are_nonnegative(self, desk_env, rng):
        traj = desk_env.straight_line() + rng.normal(0, 0.2, size=(desk_env.waypoint_count, desk_env.n))
        traj[:, -1] = np.abs(traj[:, -1])
        assert np.all(compute_features(traj, desk_env, FeatureConfig(ALL_FEATURES)) >= 0)


class TestHinge:

    def test_waypoint_at_center_costs_radius(self):
        traj = np.array([[0.0, 0.0], [5.0, 5.0]])
        assert hinge_feature(traj, np.zeros(2), 0.5) == pytest.approx(0.5)

    def test_smoothing_only_changes_the_band(self):
        radius = 1.0
        inside = np.array([[0.0, 0.5]])
        outside = np.array([[0.0, 1.5]])
        assert hinge_feature(inside, np.zeros(2), radius, smooth=True) == pytest.approx(0.5)
        assert hinge_feature(outside, np.zeros(2), radius, smooth=True) == 0.0
        edge = np.array([[0.0, 1.0]])
        assert 0 < hinge_feature(edge, np.zeros(2), radius, smooth=True) < HINGE_SMOOTHING_FRACTION * radius


class TestGradients:

    @pytest.mark.parametrize('seed', range(20))
    def test_analytic_gradients_match_finite_differences(self, desk_env, seed):
        cfg = FeatureConfig(ALL_FEATURES, {EFFICIENCY: 10.0, TABLE: 2.0})
        rng = np.random.default_rng(seed)
        traj = desk_env.straight_line() + rng.normal(0, 0.1, size=(desk_env.waypoint_count, desk_env.n))
        traj[:, -1] = np.maximum(traj[:, -1], 0.1)
        analytic = feature_gradients(traj, desk_env, cfg)
        h = 1e-6
        numeric = np.zeros_like(analytic)
        for index in np.ndindex(traj.shape):
            offset = np.zeros_like(traj)
            offset[index] = h
            plus = compute_features(traj + offset, desk_env, cfg, smooth=True)
            minus = compute_features(traj - offset, desk_env, cfg, smooth=True)
            numeric[(slice(None),) + index] = (plus - minus) / (2 * h)
        np.testing.assert_allclose(analytic, numeric, atol=1e-5)

    def test_cost_gradient_is_weighted_sum(self, desk_env):
        cfg = FeatureConfig()
        theta = np.array([0.2, 0.5, 0.3])
        traj = desk_env.straight_line()
        cost, gradient = cost_and_gradient(theta, traj, desk_env, cfg)
        assert cost == pytest.approx(theta @ compute_features(traj, desk_env, cfg, smooth=True))
        np.testing.assert_allclose(gradient, np.tensordot(theta, feature_gradients(traj, desk_env, cfg), axes=1))


class TestCosts:

    @pytest.mark.parametrize('theta, phi, expected', [
        ([0.0, 1.0, 0.0], [5.0, 2.0, 7.0], 2.0),
        ([0.0, 0.0, 0.0], [5.0, 2.0, 7.0], 0.0),
        ([1.0, 0.0, 0.0], [3.0, 0.0, 0.0], 3.0),
    ])
    def test_linear_cost(self, theta, phi, expected):
        assert linear_cost(theta, phi) == pytest.approx(expected)

    def test_linear_cost_dimension_mismatch(self):
        with pytest.raises(ValueError):
            linear_cost([1.0, 0.0], [1.0, 2.0, 3.0])

    @pytest.mark.parametrize('theta, phi_d, u_h, effort_weight, expected', [
        ([0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [2.0, 0.0], 1.0, 4.0),
        ([0.0, 1.0, 0.0], [0.0, 3.0, 0.0], [1.0, 1.0], 0.5, 4.0),
    ])
    def test_phri_cost(self, theta, phi_d, u_h, effort_weight, expected):
        assert phri_cost(theta, phi_d, u_h, effort_weight) == pytest.approx(expected)

    def test_phri_cost_without_push_is_linear_cost(self):
        assert phri_cost([0.3, 0.4], [2.0, 5.0], [0.0, 0.0], 1.0) == pytest.approx(linear_cost([0.3, 0.4], [2.0, 5.0]))
