import numpy as np
import pytest

from classes.constants import PRECISION_CANDIDATES, PRECISION_MOVE_RATIO, THETA_STEP
from classes.errors import CalibrationError
from classes.theta_update import (
    ThetaUpdateConfig,
    adaptive_theta_update,
    calibrate_feature_precision,
    explanation_weight,
    fixed_theta_update,
)


class TestFixedUpdate:

    def test_step(self):
        np.testing.assert_allclose(fixed_theta_update([0.5], [1.0], 0.2), [0.3])

    @pytest.mark.parametrize('delta_phi, alpha', [([0.0, 0.0], 0.1), ([1.0, -2.0], 0.0)])
    def test_identity_cases(self, delta_phi, alpha):
        np.testing.assert_allclose(fixed_theta_update([0.4, 0.6], delta_phi, alpha), [0.4, 0.6])

    def test_clamped_to_nonnegative(self):
        np.testing.assert_allclose(fixed_theta_update([0.05, 0.5], [1.0, 1.0], 0.1), [0.0, 0.4])


class TestAdaptiveUpdate:

    @pytest.fixture
    def cfg(self):
        return ThetaUpdateConfig(alpha=0.1, nu=5.0)

    def test_certain_explanation_is_fixed_update(self, cfg):
        theta, delta_phi = np.array([0.05, 0.3]), np.array([1.0, -0.5])
        np.testing.assert_array_equal(adaptive_theta_update(theta, delta_phi, 1.0, cfg, 2), theta - 0.1 * delta_phi)

    def test_unexplained_input_is_ignored(self, cfg):
        theta = np.array([0.2, 0.3])
        np.testing.assert_array_equal(adaptive_theta_update(theta, [0.4, -0.1], 0.0, cfg, 2), theta)

    def test_zero_feature_change_is_identity(self, cfg):
        theta = np.array([0.2, 0.3])
        np.testing.assert_array_equal(adaptive_theta_update(theta, [0.0, 0.0], 0.6, cfg, 2), theta)

    def test_solution_is_a_fixed_point(self, cfg):
        theta, delta_phi = np.array([0.3, 0.2, 0.1]), np.array([0.5, -0.2, 0.1])
        updated = adaptive_theta_update(theta, delta_phi, 0.5, cfg, 3)
        w = explanation_weight(updated, delta_phi, 0.5, cfg.nu, 3)
        residual = updated - theta + cfg.alpha * w * delta_phi
        assert np.linalg.norm(residual) <= 1e-8

    @pytest.mark.parametrize('p_explained', [0.05, 0.3, 0.7, 0.95])
    def test_never_moves_further_than_fixed_update(self, cfg, p_explained):
        theta, delta_phi = np.array([0.4, 0.4, 0.4]), np.array([-0.3, 0.2, 0.6])
        adaptive = adaptive_theta_update(theta, delta_phi, p_explained, cfg, 3)
        fixed = fixed_theta_update(theta, delta_phi, cfg.alpha, clamp=False)
        assert np.linalg.norm(adaptive - theta) <= np.linalg.norm(fixed - theta) + 1e-8

    def test_shape_mismatch_raises(self, cfg):
        with pytest.raises(ValueError):
            adaptive_theta_update([0.1, 0.2], [0.1], 0.5, cfg, 2)

    def test_probability_outside_unit_interval_raises(self, cfg):
        with pytest.raises(ValueError):
            adaptive_theta_update([0.1], [0.1], 1.5, cfg, 1)

    @pytest.mark.parametrize('kwargs', [{'alpha': 0.0}, {'nu': -1.0}, {'damping': 1.0}, {'max_iters': 0}])
    def test_invalid_config_raises(self, kwargs):
        with pytest.raises(ValueError):
            ThetaUpdateConfig(**kwargs)


class TestFeaturePrecision:

    @staticmethod
    def mean_move(events, nu):
        cfg = ThetaUpdateConfig(alpha=THETA_STEP, nu=nu)
        return np.mean([abs(adaptive_theta_update(theta, dphi, p[0], cfg, 1)[0] - theta[0]) for theta, dphi, p in events])

    def test_separable_events_take_first_candidate(self):
        explained = [(np.array([0.5]), np.array([-0.3]), [0.95])] * 3
        unexplained = [(np.array([0.5]), np.array([0.6]), [0.001])] * 3
        assert calibrate_feature_precision(explained, unexplained) == pytest.approx(0.1)

    def test_chosen_precision_meets_the_ratio(self):
        explained = [(np.array([0.5]), np.array([-0.3]), [0.9]), (np.array([0.4]), np.array([0.2]), [0.8])]
        unexplained = [(np.array([0.5]), np.array([0.05]), [0.1]), (np.array([0.3]), np.array([-0.04]), [0.2])]
        nu = calibrate_feature_precision(explained, unexplained)
        assert nu in [pytest.approx(c) for c in np.logspace(*PRECISION_CANDIDATES)]
        assert self.mean_move(unexplained, nu) < PRECISION_MOVE_RATIO * self.mean_move(explained, nu)

    def test_certain_unexplained_events_cannot_be_calibrated(self):
        explained = [(np.array([0.5]), np.array([-0.1]), [0.9])]
        unexplained = [(np.array([0.5]), np.array([2.0]), [1.0])]
        with pytest.raises(CalibrationError) as info:
            calibrate_feature_precision(explained, unexplained)
        assert info.value.diagnostics['best_ratio'] >= PRECISION_MOVE_RATIO

    def test_indistinguishable_events_raise(self):
        events = [(np.array([0.5]), np.array([0.4]), [0.5])]
        with pytest.raises(CalibrationError):
            calibrate_feature_precision(events, events, candidates=[0.5, 5.0, 50.0])

    def test_empty_events_raise(self):
        with pytest.raises(ValueError):
            calibrate_feature_precision([], [(np.array([0.5]), np.array([0.4]), [0.5])])
