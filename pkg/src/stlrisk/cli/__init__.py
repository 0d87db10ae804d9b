"""Batch experiment commands (verify, sweep-beta, gap, paired-gamma, wasserstein)."""
from .config import ConfigError, Experiment, RiskEntry, build, load
from .main import main
from .tables import fmt, histogram, wasserstein_1d, write_csv
