"""
Settings for the periodic_chain project.

Values come from the environment (optionally a .env file next to the
working directory) and fall back to the defaults below.
"""

import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Build paths inside the project
BASE_DIR = Path(__file__).resolve().parent.parent

# Logging
LOG_LEVEL = os.getenv('CHAIN_LOG_LEVEL', 'INFO').upper()
LOG_FORMAT = os.getenv('CHAIN_LOG_FORMAT', '%(asctime)s %(levelname)s %(name)s: %(message)s')

# Output
OUTPUT_DIR = os.getenv('CHAIN_OUTPUT_DIR', 'runs')
WORKERS = int(os.getenv('CHAIN_WORKERS', '1'))

# Spectral solver
SOLVER_TOL = float(os.getenv('CHAIN_SOLVER_TOL', '1e-12'))
MAX_ORDER = int(os.getenv('CHAIN_MAX_ORDER', '200'))
MAX_ITERATIONS = int(os.getenv('CHAIN_MAX_ITERATIONS', '500'))
MAX_HARMONICS = int(os.getenv('CHAIN_MAX_HARMONICS', '1024'))
TOP_OCTAVE_TOLERANCE = float(os.getenv('CHAIN_TOP_OCTAVE_TOLERANCE', '1e-12'))
GREENS_METHOD = os.getenv('CHAIN_GREENS_METHOD', 'auto')

# Time integration
STEPS_PER_PERIOD = int(os.getenv('CHAIN_STEPS_PER_PERIOD', '1024'))
INTEGRATION_PERIODS = int(os.getenv('CHAIN_INTEGRATION_PERIODS', '200'))
NEWTON_TOL = float(os.getenv('CHAIN_NEWTON_TOL', '1e-10'))
NEWTON_MAX_ITERATIONS = int(os.getenv('CHAIN_NEWTON_MAX_ITERATIONS', '30'))

# Randomized checks
SELFTEST_SEED = int(os.getenv('CHAIN_SELFTEST_SEED', '20240117'))
