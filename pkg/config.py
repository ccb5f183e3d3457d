"""Application configuration."""

import os
from dotenv import load_dotenv

load_dotenv()

BASE_DIR = os.path.dirname(os.path.abspath(__file__))


class Config:
    OUTPUT_DIR = os.environ.get('OUTPUT_DIR', os.path.join(BASE_DIR, 'output'))
    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'INFO')

    # Inputs
    EXPERIMENT_PATH = os.environ.get('EXPERIMENT_PATH', os.path.join(BASE_DIR, 'data', 'experiments', 'desk_study.json'))

    # Used when an experiment does not set its own trajectory set size
    TRAJECTORY_SET_SIZE = int(os.environ.get('TRAJECTORY_SET_SIZE', '300'))

    SCRIPT_LOGS_DIR = os.environ.get('SCRIPT_LOGS_DIR', BASE_DIR)

    BASE_DIR = BASE_DIR
