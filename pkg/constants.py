import os

# Every default below can be overridden from the environment; none is required.
ENUM_CAP = int(os.environ.get("ISETLAB_ENUM_CAP", 10_000_000))
NODE_BUDGET = int(os.environ.get("ISETLAB_NODE_BUDGET", 5_000_000))
MIX_BUDGET = int(os.environ.get("ISETLAB_MIX_BUDGET", 4096))
MIX_HORIZON = int(os.environ.get("ISETLAB_MIX_HORIZON", 100_000))
COUNT_TIME_BUDGET = float(os.environ.get("ISETLAB_COUNT_TIME_BUDGET", 600.0))
RESULTS_DIR = os.environ.get("ISETLAB_RESULTS_DIR", "results")

ARTIFACT_VERSION = "0.3.0"
# Tolerances used by exactness checks
NORMALIZATION_TOL = 1e-9
DETAILED_BALANCE_TOL = 1e-12
# Overlap fractions are floored after this nudge so that 0.3 * 10 counts as 3
FLOOR_EPS = 1e-9
MODELS = ("gnm", "gnm_star", "gnp", "planted")
