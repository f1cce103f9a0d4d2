"""
Central constants for the GMF graph-partitioning toolkit.
All default tolerances, caps and sizes are defined here.
"""

# =============================================================================
# RANDOM STREAMS
# =============================================================================
DEFAULT_SEED = 20050726  # Master seed when neither config nor CLI provides one


# =============================================================================
# EXACT ENUMERATION
# =============================================================================
ENUMERATION_LIMIT = 26  # Max nodes for brute-force log Z (~6.7e7 states)
STATE_TABLE_LIMIT = 20  # Max nodes for per-state probability access
ENUM_LOW_BITS = 16  # Low-order bits evaluated as one vectorized block
ENUM_CHUNK_BLOCKS = 16  # High-order states merged per chunk (fixed, worker independent)


# =============================================================================
# NUMERICAL TOLERANCES
# =============================================================================
NORMALIZATION_TOL = 1e-9  # Max |sum(table) - 1| for a cluster table
BOUND_SLACK = 1e-9  # Slack on aW <= KL <= bW
FB_SLACK = 1e-6  # Slack on f/b >= 1 (MinC) and <= 1 (MaxC)
ZERO_CUT_TOL = 1e-6  # Cuts and bounds below this count as zero in f/b
LOG_ZERO_FLOOR = 1e-300  # Floor before taking log of table entries


# =============================================================================
# GRAPH PARTITIONING
# =============================================================================
INVERSE_COUPLING_EPS = 1e-6  # |theta| clamp for the inverse-coupling affinity
RELAXATION_TOL = 1e-6  # Feasibility tolerance for the SDP solution
RELAXATION_MAX_ITERS = 10_000  # Solver iteration cap
RELAXATION_MIN_EIG = -1e-6  # Smallest admissible eigenvalue of Y
RELAXATION_MIN_ENTRY = -1e-8  # Smallest admissible entry of Y
KMEANS_RESTARTS = 20  # Restarts for equal-size K-means rounding
KMEANS_MAX_ITERS = 100  # Lloyd iterations per restart
PROJECTION_TRIALS = 100  # Samples for random-projection rounding
BRUTE_FORCE_CAP = 250_000  # Max equipartitions enumerated by the brute-force oracle


# =============================================================================
# GENERALIZED MEAN FIELD
# =============================================================================
CLUSTER_SIZE_CAP = 16  # Max nodes per cluster (2^16 table entries)
GMF_TOL = 1e-8  # Max |delta P(X_i=+1)| per sweep at convergence
GMF_MAX_SWEEPS = 1000  # Sweep cap before reporting non-convergence
GMF_DAMPING = 0.0  # Geometric mixing weight of the old table
RANDOM_INIT_CONCENTRATION = 1.0  # Dirichlet concentration for random table init
RANDOM_INIT_MIX = 0.5  # Weight of the Dirichlet draw against the uniform table


# =============================================================================
# HARNESS
# =============================================================================
LOG_Z_RATIO_MIN = 0.5  # |log Z| below this makes bound/logZ unreported
CSV_FLOAT_FORMAT = "%.12g"  # Float format for every CSV written
MODEL_FLOAT_FORMAT = "%.17g"  # Float format for model/partition/state files
