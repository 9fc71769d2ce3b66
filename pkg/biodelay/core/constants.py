"""
Constants and default values for the biodelay library
"""

import os

# Environment variable defaults
DEFAULT_DT = float(os.getenv("BIODELAY_DT", "0.01"))
DEFAULT_OMEGA_CAP = float(os.getenv("BIODELAY_OMEGA_CAP", "100"))
DEFAULT_OMEGA_MAX = float(os.getenv("BIODELAY_OMEGA_MAX", "5"))
DEFAULT_GRID_POINTS = int(os.getenv("BIODELAY_GRID_POINTS", "4096"))
DEFAULT_LOG_LEVEL = os.getenv("BIODELAY_LOG_LEVEL", "INFO")
DEFAULT_OUT_DIR = os.getenv("BIODELAY_OUT_DIR", "out")

# Equilibrium search
EQUILIBRIUM_X_MIN = 1e-9
EQUILIBRIUM_X_MAX = 1e6
EQUILIBRIUM_XTOL = 1e-15
ADMISSIBILITY_TOL = 1e-12

# Crossing analysis
GENUINE_TOL = 1e-8
DEFAULT_N_MAX = 4

# Root counting
CONTOUR_MIN_MODULUS = 1e-9
CONTOUR_JITTER_RETRIES = 5
CONTOUR_JITTER_STEP = 1e-7
PHASE_REFINE_LIMIT = 1.0471975511965976  # pi / 3
BATCH_PHASE_LIMIT = 1.5707963267948966  # pi / 2
BATCH_CHUNK = 256

# Region tracing
DEFAULT_H_RANGE = (0.0, 12.0)
DEFAULT_N_RANGE = (0, 8)
DEFAULT_OMEGA_POINTS = 4000
DEFAULT_H_POINTS = 600
OMEGA_LOG_SPLIT = 0.1
OMEGA_LOG_FLOOR = 1e-3
BOUNDARY_TOL = 1e-8
SEGMENT_JUMP_FACTOR = 10.0

# Maximum decay search
DECAY_GRID = 200
DECAY_COARSE_GRID = 121
DECAY_SIGMA_TOL = 1e-3
DECAY_SIGMA_START = 0.125
DECAY_MIN_CELLS = 3

# Simulation
DEFAULT_NOISE_FLOOR = 1e-9

# Levenberg-Marquardt
LM_INITIAL_DAMPING = 1e-3
LM_DAMPING_FACTOR = 10.0
LM_MAX_DAMPING = 1e12
LM_MAX_ITERATIONS = 200
LM_SSE_RTOL = 1e-10
LM_GRADIENT_TOL = 1e-8
LM_FD_STEP = 1e-6
LM_TAU_FD_STEP = 1e-3
DEFAULT_FIT_DT = 0.05
RATE_BOUNDS = (0.0, 2.0)
ALPHA_BOUNDS = (0.1, 2.0)
# substrate decay in the absence of biomass is sub-exponential, 0 < beta < 1
BETA_BOUNDS = (0.1, 1.0)
# DELAY_BOUNDS[0] / 4 == DEFAULT_FIT_DT
DELAY_BOUNDS = (0.2, 10.0)

# Output
CONFIG_SCHEMA_VERSION = 1
