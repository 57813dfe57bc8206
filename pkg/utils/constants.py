"""
Constants for the Counterdiabatic Driving Toolkit
"""

import os

# Base directories
PIPELINE_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
RESULTS_DIR = os.path.join(PIPELINE_ROOT, "results")
LOGS_DIR = os.path.join(PIPELINE_ROOT, "logs")
DEFAULT_CONFIG = os.path.join(PIPELINE_ROOT, "pipeline_config.yaml")

# Environment variable overriding the output root
OUT_DIR_ENV = "CDKIT_OUT_DIR"

# Output file names
RESULTS_CSV = "results.csv"
MANIFEST_JSON = "manifest.json"
RESOLVED_CONFIG_YAML = "config.yaml"
PLOT_SVG = "plot.svg"

# Spectral tracking
DEFAULT_GRID_POINTS = 129
MAX_REFINEMENT_LEVELS = 12
CONTINUITY_THRESHOLD = 0.9
DEGENERACY_TOL = 1e-12
CLUSTER_TOL = 1e-9          # relative to max(1, |E|) when grouping degenerate levels
COUPLING_TOL = 1e-10        # |<m|dH|n>| treated as zero inside a degenerate cluster
NORMALIZATION_TOL = 1e-10

# Ordered-exponential reference
ORDERED_EXP_INITIAL_STEPS = 256
ORDERED_EXP_MAX_STEPS = 2 ** 16
ORDERED_EXP_TOL = 1e-8

# Schedules carry derivatives up to this order unless given explicitly
POLYNOMIAL_DERIVATIVE_ORDER = 16

# Gate cost model
DEFAULT_COST_CONSTANT = 1.0
DEFAULT_LOG_BASE = "e"

# AQC
DEFAULT_C_T = 1.0
BISECTION_MAX_ITER = 30
BISECTION_REL_TOL = 0.1

# qDRIFT
DEFAULT_N_TRAJECTORIES = 2000
DEFAULT_N_BOOTSTRAP = 1000
DEFAULT_CHUNK_SIZE = 250
CDF_GRID_POINTS = 2049

# Experiment defaults
DEFAULT_EPSILON = 0.1
DEFAULT_EPSILON_GRID = [0.3, 0.1, 0.03]
DEFAULT_Q = 2
DEFAULT_K = 1
DEFAULT_SEED = 1234

# Pipelines reachable from the CLI; sweeps repeat one of SWEEP_PIPELINES
PIPELINES = ["cd", "aqc", "qdrift", "verify-bounds", "sweep"]
SWEEP_PIPELINES = ["cd", "aqc", "qdrift", "compare"]
SWEEP_KINDS = ["epsilon", "gap"]
VERIFY_COLUMNS = ["lemma", "epsilon", "bound", "measured", "margin", "params_json"]

# Plot defaults
PLOT_DPI = 100
PLOT_HASHSALT = "cdkit"
