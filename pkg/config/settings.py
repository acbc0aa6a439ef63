"""
Application Configuration Settings
"""

from config.env import FFT_WORKERS, LOG_LEVEL, OUTPUT_DIR

APP_NAME = "bipolar-ep-lab"
APP_VERSION = "0.1.0"

# Export environment-derived values (already read by config.env)
# FFT_WORKERS, LOG_LEVEL and OUTPUT_DIR come from the environment or .env

# Spectral core
POISSON_MEAN_TOL = 1e-12
MAX_DERIVATIVE_ORDER = 3

# Pressure law and admissible states
DEFAULT_GAMMA = 5.0 / 3.0
DENSITY_BOX = (0.5, 2.0)

# Propagators
# Mean-eigenvalue Taylor form is used while |delta * t| is below this
DOUBLE_ROOT_SWITCH = 1e-3
DEFAULT_SPLIT_RADIUS = 0.25

# Decay lab
QUADRATURE_TOL = 1e-8
QUADRATURE_LIMIT = 500
ALGEBRAIC_WINDOW = (10.0, 1.0e3)
ALGEBRAIC_SAMPLES = 25
EXPONENTIAL_WINDOW = (1.0, 20.0)
EXPONENTIAL_SAMPLES = 40
ALGEBRAIC_FIT_TOL = 0.05
EXPONENTIAL_FIT_TOL = 0.02
GAUSSIAN_AMPLITUDE = 1.0
GAUSSIAN_SIGMA = 1.0
PROFILE_TAIL_TOL = 1e-30

# Nonlinear solver
SNAPSHOT_EVERY = 0.1
CFL_FACTOR = 0.5
DEFAULT_KMAX = 2

# Oracle
ORACLE_DT = 1e-4
REFERENCE_DT_FACTOR = 10
REFERENCE_GRID_FACTOR = 2
REFERENCE_MAX_POINTS = 64 ** 3
REFERENCE_MAX_STEPS = 200_000

# Symbol verification defaults
VERIFY_SAMPLES = 100
VERIFY_R_RANGE = (1e-3, 1e2)
VERIFY_TIMES = (0.1, 1.0, 10.0)
VERIFY_ORACLE_TOL = 1e-6
VERIFY_IDENTITY_TOL = 1e-10
VERIFY_EIGEN_TOL = 1e-14
VERIFY_SEMIGROUP_TRIPLES = 50
VERIFY_SEED = 20240601
FORM_EQUIVALENCE_TOL = 1e-6

# Output files
CSV_FLOAT_FORMAT = "%.17g"
MANIFEST_NAME = "manifest.json"
