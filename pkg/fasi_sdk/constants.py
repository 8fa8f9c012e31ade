import os

# Library defaults. Every value below can be overridden from the environment.

# Reproducibility
# FASI_SEED, when set, takes precedence over --seed on the command line.
FASI_SEED = os.getenv("FASI_SEED")
DEFAULT_SEED = int(os.getenv("FASI_DEFAULT_SEED", "20240101"))
DEFAULT_THREADS = int(os.getenv("FASI_THREADS", str(os.cpu_count() or 1)))

# --- FILE FORMATS ---
SCORE_PREFIX = "score_"
INDECISION = "indecision"
ALL_GROUPS = "ALL"
FLOAT_FORMAT = "%.12g"
CSV_DELIMITER = os.getenv("FASI_DELIMITER", ",")

# --- METHOD ---
DEFAULT_VARIANT = os.getenv("FASI_VARIANT", "plus")
DEFAULT_ALPHA = 0.1
DEFAULT_QUANTILES = (0.05, 0.95)

# --- ORACLE ---
MC_DRAWS = int(os.getenv("FASI_MC_DRAWS", "1000000"))
MC_MIN_DRAWS = 10_000
MC_CHUNK = int(os.getenv("FASI_MC_CHUNK", "250000"))
GRID_STEP = 1e-3

# --- SIMULATION (two-group Gaussian scenarios) ---
SCENARIO_MU_1 = (0.0, 1.0, 6.0)
SCENARIO_MU_2 = (2.0, 3.0, 7.0)
SCENARIO_2_MU_1_F = (1.0, 2.0, 7.0)
SCENARIO_2_MU_2_F = (3.0, 4.0, 8.0)
SCENARIO_VARIANCE = 2.0
SCENARIO_PI_2_M = 0.5
SCENARIO_GROUPS = ("F", "M")
SCENARIO_CLASSES = ("1", "2")

SIM_N_DATA = 2500
SIM_N_TRAIN = 1500
SIM_N_CAL = 1000
SIM_N_TEST = 1000
SIM_REPS = int(os.getenv("FASI_SIM_REPS", "500"))
SIM_PI2F_GRID = (0.2, 0.35, 0.5, 0.65, 0.8)
