"""truncsim: Monte Carlo platform for truncated outcomes in two-arm trials.

Simulates randomised trials where the outcome only exists for participants
with a post-randomisation selection event, applies the standard analyses used
for such outcomes, and aggregates bias, coverage, Type-1 error, SE and
missing-data measures over scenario grids.
"""

__version__ = "0.1.0"

from .analysis import (
    BinaryEstimate,
    ContinuousEstimate,
    ProfileBracketError,
    adjusted_chi2,
    chi2_upper,
    fisher_exact,
    log_binom,
    log_odds_ratio,
    mean_diff_ttest,
    pearson_chi2,
    profile_ci,
    t_quantile,
    t_tail,
)
from .dgp import (
    AnalysisSet,
    TrialData,
    TwoByTwoTable,
    analysis_set,
    generate_trial,
    intermediate_prob,
    outcome_param,
)
from .engine import GridResult, IterationResult, derive_stream, run_grid, run_scenario
from .metrics import PerformanceSummary, summarize, type1_slice
from .scenario import (
    RunPlan,
    Scenario,
    apply_sensitivity,
    bias_expected,
    build_core_grid,
    true_estimand,
)

__all__ = [
    "__version__",
    "AnalysisSet",
    "BinaryEstimate",
    "ContinuousEstimate",
    "GridResult",
    "IterationResult",
    "PerformanceSummary",
    "ProfileBracketError",
    "RunPlan",
    "Scenario",
    "TrialData",
    "TwoByTwoTable",
    "adjusted_chi2",
    "analysis_set",
    "apply_sensitivity",
    "bias_expected",
    "build_core_grid",
    "chi2_upper",
    "derive_stream",
    "fisher_exact",
    "generate_trial",
    "intermediate_prob",
    "log_binom",
    "log_odds_ratio",
    "mean_diff_ttest",
    "outcome_param",
    "pearson_chi2",
    "profile_ci",
    "run_grid",
    "run_scenario",
    "summarize",
    "t_quantile",
    "t_tail",
    "true_estimand",
    "type1_slice",
]
