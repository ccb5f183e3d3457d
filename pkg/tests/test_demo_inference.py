import numpy as np
import pytest

from classes.constants import *
from classes.demo_inference import (
    BetaGrid,
    JointBelief,
    MisspecificationPolicy,
    ThetaGrid,
    build_default_grids,
    build_theta_grid,
    calibrate_threshold,
    demo_loglik,
    feature_loglik,
    logsumexp,
    misspecification_flag,
    posterior_to_frame,
    posterior_weights,
    summarize_belief,
    theta_marginal,
    uniform_belief,
    update_belief,
    update_belief_batch,
    update_belief_with_features,
)
from classes.features import raw_features
from classes.optimizer import TrajectorySet, optimize_trajectory


def point_mass(theta_grid, beta_grid, i, j):
    log_probs = np.full((len(theta_grid), len(beta_grid)), -np.inf)
    log_probs[i, j] = 0.0
    return JointBelief(log_probs, theta_grid, beta_grid)


class TestGrids:

    def test_default_grid_sizes(self):
        theta_grid, beta_grid = build_default_grids(3)
        assert len(theta_grid) == 19
        assert len(beta_grid) == 9
        np.testing.assert_allclose(np.linalg.norm(theta_grid.thetas, axis=1), 1.0)

    def test_single_feature_collapses(self):
        np.testing.assert_allclose(build_theta_grid(1).thetas, [[1.0]])

    def test_zero_dimension_raises(self):
        with pytest.raises(ValueError):
            build_default_grids(0)

    @pytest.mark.parametrize('betas', [[0.0, 1.0], [1.0, 0.5], []])
    def test_invalid_beta_grid_raises(self, betas):
        with pytest.raises(ValueError):
            BetaGrid(np.array(betas))


class TestLogSumExp:

    @pytest.mark.parametrize('values, expected', [
        ([0.0, 0.0], np.log(2.0)),
        ([1000.0, 1000.0], 1000.0 + np.log(2.0)),
        ([-5.0], -5.0),
    ])
    def test_values(self, values, expected):
        assert logsumexp(values) == pytest.approx(expected)

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            logsumexp([])


class TestDemoLikelihood:

    def test_two_member_partition(self):
        value = feature_loglik(np.zeros(3), [0.0, 1.0, 0.0], 1.0, np.array([[0.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))
        assert value == pytest.approx(-np.log(1 + np.exp(-1.0)))
        assert value == pytest.approx(-0.3133, abs=1e-4)

    def test_zero_rationality_is_uniform(self, small_set):
        demo = small_set.trajectories[5]
        for theta in ([1.0, 0.0, 0.0], [0.0, 0.6, 0.8]):
            assert demo_loglik(demo, theta, 0.0, small_set) == pytest.approx(-np.log(len(small_set)))

    def test_singleton_partition(self, desk_env, modeled):
        traj = optimize_trajectory([1.0, 0.5, 0.5], desk_env, modeled).trajectory
        singleton = TrajectorySet(desk_env, modeled, [traj], [raw_features(traj, desk_env, ALL_FEATURES)], seed=0)
        assert demo_loglik(traj, [0.0, 1.0, 0.0], 3.0, singleton) == pytest.approx(0.0, abs=1e-12)


class TestUpdateBelief:

    def test_likelihood_ratio(self):
        theta_grid = ThetaGrid(np.eye(2))
        beta_grid = BetaGrid(np.array([1.0]))
        posterior = update_belief_with_features(uniform_belief(theta_grid, beta_grid),
                                                np.array([0.0, np.log(3.0)]), np.zeros((1, 2)))
        np.testing.assert_allclose(posterior.probs.ravel(), [0.75, 0.25])

    def test_uninformative_demo_keeps_prior(self):
        theta_grid = ThetaGrid(np.eye(2))
        beta_grid = BetaGrid(np.array([0.5, 2.0]))
        prior = uniform_belief(theta_grid, beta_grid, prior=np.array([[1.0, 2.0], [3.0, 4.0]]))
        phi = np.array([0.3, 0.7])
        posterior = update_belief_with_features(prior, phi, phi[None, :])
        np.testing.assert_allclose(posterior.probs, prior.probs)

    def test_vanishing_rationality_keeps_theta_marginal(self, small_set):
        theta_grid, _ = build_default_grids(3)
        beta_grid = BetaGrid(np.array([1e-12]))
        rng = np.random.default_rng(42)
        prior = uniform_belief(theta_grid, beta_grid, prior=rng.uniform(0.1, 1.0, size=(len(theta_grid), 1)))
        posterior = update_belief(prior, small_set.trajectories[0], small_set)
        np.testing.assert_allclose(theta_marginal(posterior), theta_marginal(prior), atol=1e-9)

    def test_perfect_table_demo_is_confident(self, desk_env, small_set):
        demo = optimize_trajectory([0.0, 1.0, 0.0], desk_env, small_set.feature_config).trajectory
        theta_grid, beta_grid = build_default_grids(3)
        posterior = update_belief(uniform_belief(theta_grid, beta_grid), demo, small_set)
        i, j = posterior.argmax()
        np.testing.assert_allclose(theta_grid.thetas[i], [0.0, 1.0, 0.0], atol=1e-12)
        assert beta_grid.betas[j] == 100.0

    def test_batch_equals_sequential(self, small_set):
        theta_grid, beta_grid = build_default_grids(3)
        prior = uniform_belief(theta_grid, beta_grid)
        demos = [small_set.trajectories[1], small_set.trajectories[2]]
        sequential = update_belief(update_belief(prior, demos[0], small_set), demos[1], small_set)
        pooled = update_belief_batch(prior, demos, small_set)
        np.testing.assert_allclose(pooled.probs, sequential.probs, atol=1e-12)

    def test_stays_normalized_over_many_updates(self, small_set):
        theta_grid, beta_grid = build_default_grids(3)
        belief = uniform_belief(theta_grid, beta_grid)
        for step in range(100):
            belief = update_belief(belief, small_set.trajectories[step % len(small_set)], small_set)
        assert belief.probs.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.all(np.isfinite(belief.log_probs) | (belief.log_probs == -np.inf))


class TestDecisions:

    @pytest.fixture
    def grids(self):
        return build_default_grids(3)

    def test_confident_belief_is_not_flagged(self, grids):
        belief = point_mass(*grids, 4, 8)
        assert not misspecification_flag(belief, MisspecificationPolicy(0.1))

    def test_low_confidence_belief_is_flagged(self, grids):
        theta_grid, beta_grid = grids
        log_probs = np.full((len(theta_grid), len(beta_grid)), -np.inf)
        log_probs[:, 0] = -np.log(len(theta_grid))
        assert misspecification_flag(JointBelief(log_probs, theta_grid, beta_grid), MisspecificationPolicy(0.1))

    def test_zero_threshold_never_flags(self, grids):
        assert not misspecification_flag(point_mass(*grids, 0, 0), MisspecificationPolicy(0.0))

    @pytest.mark.parametrize('threshold', [-0.1, np.inf, np.nan])
    def test_invalid_threshold_raises(self, threshold):
        with pytest.raises(ValueError):
            MisspecificationPolicy(threshold)

    def test_threshold_above_one_is_allowed(self, grids):
        belief = point_mass(*grids, 3, 5)
        assert misspecification_flag(belief, MisspecificationPolicy(10.0))
        assert not misspecification_flag(belief, MisspecificationPolicy(3.0))

    def test_calibrated_threshold_can_exceed_one(self, grids):
        misspecified = point_mass(*grids, 3, 5)
        explained = point_mass(*grids, 3, 8)
        assert calibrate_threshold([explained], [misspecified]) == pytest.approx(10.0)

    def test_calibrated_threshold_separates_groups(self, grids):
        misspecified = point_mass(*grids, 3, 1)
        explained = point_mass(*grids, 3, 6)
        assert calibrate_threshold([explained], [misspecified]) == pytest.approx(0.1)

    def test_calibration_falls_back_without_separation(self, grids):
        low = point_mass(*grids, 3, 4)
        assert calibrate_threshold([low], [low], default=0.05) == 0.05

    def test_marginal_weights_of_point_mass(self, grids):
        theta_grid, beta_grid = grids
        np.testing.assert_allclose(posterior_weights(point_mass(theta_grid, beta_grid, 7, 3)), theta_grid.thetas[7])

    def test_marginal_weights_average_hypotheses(self):
        theta_grid = ThetaGrid(np.array([[1.0, 0.0], [0.0, 1.0]]))
        beta_grid = BetaGrid(np.array([1.0]))
        np.testing.assert_allclose(posterior_weights(uniform_belief(theta_grid, beta_grid)), [0.5, 0.5])

    def test_confidence_weights_shrink_at_low_beta(self, grids):
        belief = point_mass(*grids, 5, 0)
        assert np.linalg.norm(posterior_weights(belief, WEIGHTS_CONFIDENCE)) <= 0.01 + 1e-12

    def test_unknown_weighting_mode_raises(self, grids):
        with pytest.raises(ValueError):
            posterior_weights(point_mass(*grids, 0, 0), 'median')


class TestExport:

    def test_frame_has_one_row_per_cell(self):
        theta_grid, beta_grid = build_default_grids(3)
        frame = posterior_to_frame(uniform_belief(theta_grid, beta_grid), MODELED_FEATURES)
        assert len(frame) == 19 * 9
        assert frame['probability'].sum() == pytest.approx(1.0)
        assert {'theta_index', 'beta', 'theta_table'} <= set(frame.columns)

    def test_summary_of_uniform_belief(self):
        theta_grid, beta_grid = build_default_grids(3)
        summary = summarize_belief(uniform_belief(theta_grid, beta_grid), MODELED_FEATURES, MisspecificationPolicy())
        assert summary['theta_entropy_ratio'] == pytest.approx(1.0)
        assert summary['peak_probability'] == pytest.approx(1 / (19 * 9))
