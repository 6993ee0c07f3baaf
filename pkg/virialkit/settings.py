# virialkit/settings.py
import os

# Desk-scale guards. Override the order guard with VIRIALKIT_MAX_ORDER,
# or pass allow_large=True to the constructors that check them.
MAX_ORDER = int(os.getenv("VIRIALKIT_MAX_ORDER") or 6)
MAX_SPECIES = int(os.getenv("VIRIALKIT_MAX_SPECIES") or 12)

# Worker count for parallel maps (MC batches, per-root tensor fills).
THREADS = int(os.getenv("VIRIALKIT_THREADS") or 1)

LOG_LEVEL = os.getenv("VIRIALKIT_LOG_LEVEL") or "WARNING"

# Brute-force stability certificate depth.
DEFAULT_N_CHECK = 6

# Constant-weight search a = b in {GRID_STEP * k : k = 1..GRID_STEPS}.
GRID_STEP = 0.05
GRID_STEPS = 40

# Monte Carlo defaults
DEFAULT_MC_BATCHES = 16
DEFAULT_MC_SAMPLES = 200_000

# Graph class limits (vertex counts)
MAX_GRAPH_VERTICES = 8
MAX_TREE_VERTICES = 9
MAX_D_VERTICES = 7
MAX_ENRICHED_TREE_SIZE = 5
