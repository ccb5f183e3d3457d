import time

import numpy as np
import pytest

from classes.constants import *
from classes.demo_inference import build_default_grids, uniform_belief, update_belief
from classes.optimizer import optimize_trajectory
from classes.sim_human import simulate_demonstration, true_cost_from_weights
from services.calibration_service import calibrate_beta_model
from services.case_study_service import run_demo_case_study
from services.correction_study_service import run_correction_study

TABLE_THETA = [0.0, 1.0, 0.0]


def table_posterior(context, demo):
    theta_grid, beta_grid = build_default_grids(context.features.dimension)
    return update_belief(uniform_belief(theta_grid, beta_grid), demo, context.trajectory_set)


@pytest.fixture(scope='module')
def perfect_table_posterior(desk_study_context):
    demo = optimize_trajectory(TABLE_THETA, desk_study_context.env, desk_study_context.features).trajectory
    started = time.perf_counter()
    posterior = table_posterior(desk_study_context, demo)
    return posterior, time.perf_counter() - started


@pytest.fixture(scope='module')
def case_study(desk_study_context, tmp_path_factory):
    return run_demo_case_study(desk_study_context, str(tmp_path_factory.mktemp('case_study')))


class TestTableDemonstrations:

    def test_perfect_demo_is_confident_in_table_objective(self, perfect_table_posterior):
        posterior, elapsed = perfect_table_posterior
        i, j = posterior.argmax()
        np.testing.assert_allclose(posterior.theta_grid.thetas[i], TABLE_THETA, atol=1e-12)
        assert posterior.beta_grid.betas[j] == max(BETA_GRID_VALUES)
        assert elapsed < 60.0

    def test_noisy_demo_keeps_objective_but_loses_confidence(self, desk_study_context, perfect_table_posterior):
        true_cost = true_cost_from_weights({TABLE: 1.0}, desk_study_context.trajectory_set, rationality=10.0)
        demo = simulate_demonstration(true_cost, desk_study_context.env, desk_study_context.trajectory_set, seed=0)
        posterior = table_posterior(desk_study_context, demo)
        i, j = posterior.argmax()
        np.testing.assert_allclose(posterior.theta_grid.thetas[i], TABLE_THETA, atol=1e-12)
        assert posterior.beta_grid.betas[j] < max(BETA_GRID_VALUES)
        assert posterior.peak_probability() < perfect_table_posterior[0].peak_probability()


class TestDemoScenarios:

    def test_hidden_feature_demos_are_flagged(self, case_study):
        summary = case_study.scenario_summaries['misspecified']
        assert case_study.misspecification_flags['misspecified'] is True
        assert summary['theta_entropy_ratio'] >= 0.9

    def test_laptop_demos_learn_laptop_weight(self, case_study):
        summary = case_study.scenario_summaries['well_specified']
        weights = dict(zip(MODELED_FEATURES, summary['argmax_theta']))
        assert weights[LAPTOP] > weights[EFFICIENCY]
        assert case_study.misspecification_flags['well_specified'] is False

    def test_correlated_hidden_feature_is_read_as_laptop(self, case_study):
        summary = case_study.scenario_summaries['feature_correlation']
        assert summary['argmax_theta'] == [0.0, 0.0, 1.0]
        assert case_study.misspecification_flags['feature_correlation'] is False

    def test_noisy_table_demos_pool_toward_table(self, case_study):
        summary = case_study.scenario_summaries['feature_engineering']
        weights = dict(zip(MODELED_FEATURES, summary['argmax_theta']))
        assert weights[TABLE] == max(weights.values())
        assert summary['pooled_more_peaked']


class TestCorrectionStudy:

    @pytest.fixture(scope='class')
    def report(self, desk_study_context):
        model, _ = calibrate_beta_model(desk_study_context)
        return run_correction_study(desk_study_context, model)

    def test_poorly_explained_tasks_favor_adaptive_updates(self, report, desk_study_context):
        for task in desk_study_context.config.correction_tasks:
            if task.explained:
                continue
            fixed, adaptive = report.regret[task.name][MODE_FIXED], report.regret[task.name][MODE_ADAPTIVE]
            assert adaptive['total'] < fixed['total']
            for feature, value in fixed.items():
                if value > 0:
                    assert adaptive[feature] < value, f'{task.name}/{feature}'

    def test_well_explained_tasks_agree_across_modes(self, report, desk_study_context):
        for task in desk_study_context.config.correction_tasks:
            if not task.explained:
                continue
            fixed, adaptive = report.regret[task.name][MODE_FIXED], report.regret[task.name][MODE_ADAPTIVE]
            assert adaptive['total'] == pytest.approx(fixed['total'], rel=0.1)
