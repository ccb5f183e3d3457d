"""
Confidence-Aware Objective Learning - Main Entry Point

Reproduces the demonstration case studies and the online correction study
with simulated humans:
1. Sample a trajectory set approximating the Boltzmann partition function
2. Infer (θ, β) posteriors from simulated demonstrations
3. Calibrate P(β̂ | E) from labeled simulated corrections
4. Learn online from corrections with fixed or explanation-weighted updates

Usage:
    python confidence_learning.py sample-trajectories --out output
    python confidence_learning.py case-study --config data/experiments/desk_study.json
    python confidence_learning.py calibrate-beta --out output
    python confidence_learning.py run-online --mode adaptive --model output/explanation_model.json
    python confidence_learning.py correction-study --model output/explanation_model.json
"""

import argparse
import dataclasses
import logging
import os
import sys
from typing import List, Optional

from classes.beta_estimator import ExplanationModel
from classes.constants import *
from classes.errors import ConfigError
from classes.file_handler import load_json
from classes.optimizer import save_trajectory_set
from classes.script_logger import get_log_file_path, log_message
from config import Config
from services.calibration_service import calibrate_beta_model
from services.case_study_service import run_demo_case_study
from services.correction_study_service import run_correction_study, run_online
from services.experiment_service import ExperimentContext, load_experiment_config, prepare_context

logger = logging.getLogger(__name__)


def load_explanation_model(args, context: ExperimentContext, required: bool) -> Optional[ExplanationModel]:
    """
    The model from --model, else the experiment's reference, else a previous
    calibrate-beta run in the output folder.
    """
    candidates = [args.model, context.config.explanation_model_path,
                  os.path.join(args.out, EXPLANATION_MODEL_FILE_NAME)]
    for path in candidates:
        if path and os.path.exists(path):
            logger.info(f'Using explanation model {path}')
            try:
                return ExplanationModel.from_dict(load_json(path))
            except (KeyError, TypeError, ValueError) as e:
                raise ConfigError(f'Invalid explanation model: {e}', path)
    if args.model:
        raise ConfigError('Explanation model file not found', args.model)
    if required:
        raise ConfigError('No explanation model found; run calibrate-beta first or pass --model', context.config.path)
    return None


# =============================================================================
# SUBCOMMANDS
# =============================================================================

def sample_trajectories(args, context: ExperimentContext) -> str:
    path = save_trajectory_set(context.trajectory_set, args.out)
    return f'Saved {len(context.trajectory_set)} trajectories to {path}'


def demo_infer(args, context: ExperimentContext) -> str:
    scenarios = context.config.demo_scenarios
    if not scenarios:
        raise ConfigError('Experiment has no demonstration scenarios', context.config.path, 'demo_scenarios')
    name = args.scenario or scenarios[0].name
    report = run_demo_case_study(context, args.out, [name], kind='demo_inference')
    path = report.save(args.out, DEMO_INFERENCE_REPORT_FILE_NAME)
    return f'Scenario {name}: misspecified={report.misspecification_flags[name]}, report {path}'


def case_study(args, context: ExperimentContext) -> str:
    report = run_demo_case_study(context, args.out)
    path = report.save(args.out, CASE_STUDY_REPORT_FILE_NAME)
    flags = ', '.join(f'{name}={flag}' for name, flag in report.misspecification_flags.items())
    return f'Case study flags: {flags or "none"}, report {path}'


def calibrate_beta(args, context: ExperimentContext) -> str:
    model, report = calibrate_beta_model(context, args.out)
    path = report.save(args.out, CALIBRATION_REPORT_FILE_NAME)
    return f'Explanation model for {model.feature_names} (ν={model.feature_precision}), report {path}'


def run_online_job(args, context: ExperimentContext) -> str:
    model = load_explanation_model(args, context, required=args.mode == MODE_ADAPTIVE)
    report = run_online(context, model, args.mode, args.out, args.seed)
    path = report.save(args.out, ONLINE_REPORT_FILE_NAME)
    return f'Online {args.mode} run over {len(report.regret)} tasks, report {path}'


def correction_study(args, context: ExperimentContext) -> str:
    model = load_explanation_model(args, context, required=True)
    modes = [args.mode] if args.mode else None
    report = run_correction_study(context, model, args.out, modes, args.seeds, save_histories=args.histories)
    path = report.save(args.out, CORRECTION_REPORT_FILE_NAME)
    return f'Correction study over {len(report.regret)} tasks, report {path}'


COMMANDS = {
    'sample-trajectories': sample_trajectories,
    'demo-infer': demo_infer,
    'case-study': case_study,
    'calibrate-beta': calibrate_beta,
    'run-online': run_online_job,
    'correction-study': correction_study,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Confidence-aware objective learning from demonstrations and corrections')
    subparsers = parser.add_subparsers(dest='command', required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', default=Config.EXPERIMENT_PATH, help='Experiment JSON file')
    common.add_argument('--out', default=Config.OUTPUT_DIR, help='Output folder')
    common.add_argument('--seed', type=int, default=None, help='Override the experiment seed')
    common.add_argument('--set-size', type=int, default=None, help='Trajectory set size when sampling')
    common.add_argument('--trajectory-set', default=None, help='Reuse a cached trajectory set JSON')

    subparsers.add_parser('sample-trajectories', parents=[common], help='Sample and cache the trajectory set')

    demo = subparsers.add_parser('demo-infer', parents=[common], help='Posteriors for one demonstration scenario')
    demo.add_argument('--scenario', default=None, help='Scenario name (first configured when omitted)')

    subparsers.add_parser('case-study', parents=[common], help='Run every demonstration scenario')
    subparsers.add_parser('calibrate-beta', parents=[common], help='Fit the explanation model')

    online = subparsers.add_parser('run-online', parents=[common], help='One online episode per correction task')
    online.add_argument('--mode', choices=UPDATE_MODES, default=MODE_ADAPTIVE)
    online.add_argument('--model', default=None, help='Explanation model JSON')

    study = subparsers.add_parser('correction-study', parents=[common], help='Fixed against adaptive over seeds')
    study.add_argument('--mode', choices=UPDATE_MODES, default=None, help='Run a single mode')
    study.add_argument('--model', default=None, help='Explanation model JSON')
    study.add_argument('--seeds', type=int, default=None, help='Seeds per task')
    study.add_argument('--histories', action='store_true', help='Also write interaction histories')

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand; returns the process exit status."""
    logging.basicConfig(level=Config.LOG_LEVEL, format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    args = build_parser().parse_args(argv)
    log_file = get_log_file_path(Config.SCRIPT_LOGS_DIR, SCRIPT_LOGS_FOLDER_PATH, MAIN_LOG_FILE_NAME)
    log_message(log_file, LOG_LEVEL_START, 'job started', command=args.command, config=args.config, seed=args.seed)

    try:
        config = load_experiment_config(args.config)
        if args.seed is not None:
            config = dataclasses.replace(config, seed=args.seed)
        context = prepare_context(config, set_size=args.set_size, trajectory_set_path=args.trajectory_set)
        summary = COMMANDS[args.command](args, context)
    except Exception as e:
        logger.error(f'{args.command} failed: {e}')
        log_message(log_file, LOG_LEVEL_ERROR, f'failed: {e}', command=args.command)
        return 1

    logger.info(summary)
    log_message(log_file, LOG_LEVEL_INFO, summary, command=args.command)
    log_message(log_file, LOG_LEVEL_END, 'job ended', command=args.command, out=args.out)
    return 0


if __name__ == '__main__':
    sys.exit(main())
