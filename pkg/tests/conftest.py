import os

import numpy as np
import pytest

from classes.constants import *
from classes.deformation import build_deformation
from classes.environment import EnvironmentSpec, FeatureConfig
from classes.optimizer import sample_trajectory_set
from services.experiment_service import load_experiment_config, prepare_context

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DESK_STUDY = os.path.join(ROOT, 'data', 'experiments', 'desk_study.json')

DESK = {
    'start': [-1.0, 0.0, 0.6],
    'goal': [1.0, 0.0, 0.6],
    'laptop_center': [0.0, 0.2, 0.45],
    'human_center': [0.0, -0.4, 0.6],
    'n': 3,
    'T': 6,
    'dt': 0.25,
    'table_offset': 0.0,
    'laptop_radius': 0.35,
    'human_radius': 0.75,
    'workspace_low': [-3.0, -2.0, 0.0],
    'workspace_high': [3.0, 2.0, 2.0],
}


@pytest.fixture(scope='session')
def desk_env():
    return EnvironmentSpec(**DESK)


@pytest.fixture(scope='session')
def modeled():
    return FeatureConfig()


@pytest.fixture(scope='session')
def desk_operator(desk_env):
    return build_deformation(desk_env, 0.1)


@pytest.fixture(scope='session')
def small_set(desk_env, modeled):
    return sample_trajectory_set(desk_env, 24, seed=0, features=modeled)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture(scope='session')
def desk_study_context():
    """The repository desk study with its full 300-member trajectory set."""
    return prepare_context(load_experiment_config(DESK_STUDY))
