"""Tabular laboratory for active imitation learning from selectable linear perspectives."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source checkout
    __version__ = "0.1.0"

from .demos import ObservationStore, observe, sample_demonstration
from .errors import TpilError
from .harness import ExperimentConfig, run_experiment, write_results
from .matching import match_features, solve_optimal_policy
from .mdp import TabularMdp, build_gridworld, extract_policy, occupancy_of_policy, policy_value
from .perspectives import analyze_stack, basis_perspectives, diam_upper_bound, feature_map, random_perspectives
from .theory import build_counterexample, counterexample_marginals, theorem1_report

__all__ = [
    "ExperimentConfig",
    "ObservationStore",
    "TabularMdp",
    "TpilError",
    "analyze_stack",
    "basis_perspectives",
    "build_counterexample",
    "build_gridworld",
    "counterexample_marginals",
    "diam_upper_bound",
    "extract_policy",
    "feature_map",
    "match_features",
    "observe",
    "occupancy_of_policy",
    "policy_value",
    "random_perspectives",
    "run_experiment",
    "sample_demonstration",
    "solve_optimal_policy",
    "theorem1_report",
    "write_results",
]
