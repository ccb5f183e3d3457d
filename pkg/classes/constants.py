"""Constants for the confidence-aware objective learning toolkit."""

# =============================================================================
# FEATURE NAMES
# =============================================================================

EFFICIENCY = 'efficiency'
TABLE = 'table'
LAPTOP = 'laptop'
HUMAN = 'human'

ALL_FEATURES = [EFFICIENCY, TABLE, LAPTOP, HUMAN]
MODELED_FEATURES = [EFFICIENCY, TABLE, LAPTOP]

HINGE_SMOOTHING_FRACTION = 0.05  # Band width of the smoothed hinge, as a fraction of the radius
NORMALIZER_FLOOR = 1e-9  # Spreads below this fall back to a unit divisor

# =============================================================================
# HYPOTHESIS GRIDS
# =============================================================================

THETA_GRID_LEVELS = [0.0, 0.5, 1.0]
BETA_GRID_VALUES = [0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0]
GRID_DECIMALS = 12  # Rounding used to deduplicate normalized θ candidates

DEFAULT_MISSPECIFICATION_THRESHOLD = 0.1

# =============================================================================
# TRAJECTORY OPTIMIZATION
# =============================================================================

OPT_MAX_ITERS = 2000
OPT_GRADIENT_TOLERANCE = 1e-6
OPT_BACKTRACK_SHRINK = 0.5
OPT_SUFFICIENT_DECREASE = 1e-4
OPT_INITIAL_STEP = 1.0
OPT_MIN_STEP = 1e-14
OPT_MAX_DISPLACEMENT = 0.1  # Largest coordinate change of any waypoint in one iteration

PENALTY_KAPPA_START = 10.0
PENALTY_KAPPA_GROWTH = 10.0
PENALTY_KAPPA_MAX = 1e6
PENALTY_INNER_GTOL = 1e-10
CONSTRAINT_TOLERANCE = 1e-3
HESSIAN_STEP = 1e-4  # Multiplied by (1 + ‖u*‖)
HESSIAN_EIGEN_FLOOR = 1e-8

SAMPLE_LOG_MAGNITUDE_RANGE = (-2.0, 2.0)  # log10 of per-component weight scales

# =============================================================================
# CORRECTIONS
# =============================================================================

DEFORMATION_MAGNITUDE = 0.1  # μ
EFFORT_WEIGHT = 1.0  # λ
BETA_DENOMINATOR_FLOOR = 1e-8  # δ
BETA_HAT_CAP = 1e4
THETA_STEP = 0.1  # α
FEATURE_PRECISION = 5.0  # ν
NEWTON_TOLERANCE = 1e-8
NEWTON_MAX_ITERS = 100
NEWTON_DAMPING = 0.5
PRIOR_EXPLAINED = 0.5
MIN_CALIBRATION_SAMPLES = 10
PRECISION_CANDIDATES = (-1.0, 5.0, 25)  # logspace bounds and count searched for ν
PRECISION_MOVE_RATIO = 0.05
SIDEWAYS_LEAK_TOLERANCE = 0.1  # Largest modeled feature change a sideways push may cause

MODE_FIXED = 'fixed'
MODE_ADAPTIVE = 'adaptive'
UPDATE_MODES = [MODE_FIXED, MODE_ADAPTIVE]

STYLE_EFFICIENT = 'efficient'
STYLE_INEFFICIENT = 'inefficient'
CORRECTION_STYLES = [STYLE_EFFICIENT, STYLE_INEFFICIENT]

WEIGHTS_MARGINAL = 'marginal'
WEIGHTS_CONFIDENCE = 'confidence_weighted'

# =============================================================================
# CASE STUDIES
# =============================================================================

DEMOS_PER_SCENARIO = 12
SEEDS_PER_CORRECTION_TASK = 20

# =============================================================================
# FILE PATHS
# =============================================================================

SCRIPT_LOGS_FOLDER_PATH = 'script_logs'

TRAJECTORY_SET_FILE_NAME = 'trajectory_set.json'
GRIDS_FILE_NAME = 'grids.json'
EXPLANATION_MODEL_FILE_NAME = 'explanation_model.json'
CALIBRATION_SAMPLES_FILE_NAME = 'calibration_samples.csv'
CASE_STUDY_REPORT_FILE_NAME = 'case_study_metrics.json'
DEMO_INFERENCE_REPORT_FILE_NAME = 'demo_inference_metrics.json'
ONLINE_REPORT_FILE_NAME = 'online_metrics.json'
CALIBRATION_REPORT_FILE_NAME = 'calibration_metrics.json'
CORRECTION_REPORT_FILE_NAME = 'correction_study_metrics.json'
CORRECTION_RUNS_FILE_NAME = 'correction_study_runs.csv'
POSTERIOR_FOLDER_NAME = 'posteriors'
HISTORY_FOLDER_NAME = 'histories'

# Log Files
MAIN_LOG_FILE_NAME = 'main_log_confidence_learning.log'

# Log Levels
LOG_LEVEL_START = 'START'
LOG_LEVEL_INFO = 'INFO'
LOG_LEVEL_ERROR = 'ERROR'
LOG_LEVEL_END = 'END'
