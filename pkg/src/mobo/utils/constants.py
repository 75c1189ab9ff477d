"""
Constants used throughout the application.
"""

# Run artifacts
CONFIG_FILE = "config.ini"
EVALUATIONS_FILE = "evaluations.csv"
PARETO_FRONT_FILE = "pareto_front.csv"
HV_TRAJECTORY_FILE = "hv_trajectory.csv"
VERIFICATION_FILE = "verification.csv"
PREDICTED_FRONT_FILE = "predicted_front.csv"
SUMMARY_FILE = "summary.txt"

# Comparison artifacts
COMPARISON_SUMMARY_FILE = "summary.csv"
COMPARISON_CURVES_FILE = "hv_curves.csv"
COMPARISON_WORKBOOK_FILE = "comparison.xlsx"
FRONT_FILE_TEMPLATE = "front_{label}.csv"
COMPARISON_DIR_TEMPLATE = "{problem}_compare_seed{seed}"

# Columns that prefix every row of every CSV artifact
PROVENANCE_COLUMNS = ["config_hash", "seed"]

HV_TRAJECTORY_COLUMNS = PROVENANCE_COLUMNS + ["iteration", "evaluations", "hypervolume"]
COMPARISON_SUMMARY_COLUMNS = [
    "label",
    "runs",
    "median_hv",
    "mean_hv",
    "min_hv",
    "max_hv",
    "wins",
]
COMPARISON_CURVE_COLUMNS = ["label", "repetition", "seed", "iteration", "hypervolume"]

# Fixed workbook timestamp so comparison workbooks carry no wall-clock metadata
WORKBOOK_TIMESTAMP = (2000, 1, 1)

# UI Icons and indicators
ICONS = {
    "run": "🧪",  # Workflow run
    "front": "📈",  # Pareto front
    "stats": "📊",  # Statistics
    "export": "📤",  # Written artifacts
    "warning": "⚠️",  # Extrapolation gap
}
