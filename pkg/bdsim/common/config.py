import os

# Relative tolerance of the forward equation integrator
REL_TOL = float(os.environ.get('BDSIM_REL_TOL', 1e-10))

# Absolute tolerance of the integrator, as a fraction of the relative tolerance
ABS_TOL_FACTOR = float(os.environ.get('BDSIM_ABS_TOL_FACTOR', 1e-4))

# Number of points of the default time grid
GRID_POINTS = int(os.environ.get('BDSIM_GRID_POINTS', 200))

# Monte Carlo defaults
TRIALS = int(os.environ.get('BDSIM_TRIALS', 100_000))
SEED = int(os.environ.get('BDSIM_SEED', 42))
BINS = int(os.environ.get('BDSIM_BINS', 50))

# Number of worker processes used for Monte Carlo blocks (1 = run inline)
THREADS = int(os.environ.get('BDSIM_THREADS', 1))

# Trials per unit of work handed to a worker, results do not depend on it
BLOCK_SIZE = int(os.environ.get('BDSIM_BLOCK_SIZE', 1024))
