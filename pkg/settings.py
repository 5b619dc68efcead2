"""Solver defaults and numeric constants: hyperparameters, tolerances, quadrature, I/O formats, exit codes."""

# Hyperparameters (penalty weight lambda, entropic regularization epsilon)
DEFAULT_LAMBDA = 20.0
DEFAULT_EPSILON = 0.1
SWEEP_EPSILONS = (0.01, 0.1, 1.0)

# Gradient verification
FD_STEP = 1e-5
FD_REL_TOL = 1e-4
FD_ABS_FLOOR = 1e-6  # denominators below this count as absolute error

# Quadrature
QUAD_NODES = 128         # per axis
QUAD_MIN_NODES = 64
QUAD_TRUNCATION = 8.0    # trapezoid half-width in reference standard deviations
QUAD_MAX_DIM = 2

# Langevin sampler
INITIAL_ANCHOR_GAUSSIAN = "anchor_gaussian"
INITIAL_CUSTOM = "custom"

# Double loop
PILOT_SAMPLES = 256
DEFAULT_F_GAP = 1.0

# Single loop
DEFAULT_PARTICLES = 64
DEFAULT_BETA0 = 0.1

# Stream domain tags (module ids for RandomStream)
STREAM_SAMPLER = 1
STREAM_DOUBLE_LOOP = 2
STREAM_DOUBLE_LOOP_SELECT = 3
STREAM_DOUBLE_LOOP_CHAIN = 13
STREAM_SINGLE_LOOP = 4
STREAM_SINGLE_LOOP_BATCH = 5
STREAM_SINGLE_LOOP_SELECT = 6
STREAM_BANK_INIT = 7
STREAM_STATIONARITY = 8
STREAM_PROBE = 9
STREAM_DATASET = 10
STREAM_BASELINE = 11
STREAM_DIAGNOSTICS = 12

# Logging
LOG_EVERY = 1000  # iterations between DEBUG progress lines

# CSV output
FLOAT_FORMAT = "%.17g"

# Experiment harness
DEFAULT_RADIUS_FRACTIONS = (0.0, 0.1, 0.2, 0.3, 0.4)
DEFAULT_ATTACK_STEPS = 20
DEFAULT_ATTACK_STEP_FRACTION = 0.25  # PGD step size as a fraction of the radius
WDRO_ASCENT_RATE = 0.05
WDRO_INNER_STEPS = 50

# Output file names
TRAIN_FILE = "train.csv"
TEST_FILE = "test.csv"
REPORT_FILE = "report.csv"
TRACE_FILE = "trace.csv"
BANK_FILE = "bank.csv"
THETA_FILE = "theta.csv"
SAMPLES_FILE = "samples.csv"
SWEEP_FILE = "sweep.csv"
SUMMARY_FILE = "summary.json"

# Exit codes
EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_DIVERGENCE = 3
