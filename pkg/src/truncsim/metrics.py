"""Aggregation of per-iteration results into per-scenario performance measures.

Each measure uses its own denominator: odds-ratio measures average over the
iterations where the odds ratio was estimable, and each test's rejection rate
is taken over the iterations where that test was calculable. Iterations lost
to separation or zero margins are counted as missing data, never imputed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .engine import IterationResult
from .scenario import Scenario, true_estimand

REJECT_LEVEL = 0.05


@dataclass(frozen=True)
class PerformanceSummary:
    """Per-scenario performance measures with Monte Carlo standard errors."""

    scenario: Scenario
    n_iterations: int
    n_estimable: int
    n_chi2_calc: int | None
    n_fisher_calc: int | None
    bias: float | None
    bias_mcse: float | None
    emp_se: float | None
    mod_se: float | None
    coverage: float | None
    coverage_mcse: float | None
    reject_t: float | None
    reject_t_mcse: float | None
    reject_chi2: float | None
    reject_chi2_mcse: float | None
    reject_chi2_adj: float | None
    reject_chi2_adj_mcse: float | None
    reject_fisher: float | None
    reject_fisher_mcse: float | None
    ror: float | None
    degenerate: bool

    @property
    def scenario_id(self) -> str:
        return self.scenario.id


def _rate(p_values: np.ndarray) -> tuple[float | None, float | None, int]:
    usable = p_values[~np.isnan(p_values)]
    count = usable.size
    if count == 0:
        return None, None, 0
    rate = float(np.mean(usable < REJECT_LEVEL))
    mcse = math.sqrt(rate * (1.0 - rate) / count)
    return rate, mcse, count


def summarize(results: Sequence[IterationResult], s: Scenario) -> PerformanceSummary:
    """Collapse one scenario's iteration results into a PerformanceSummary."""
    for r in results:
        if r.scenario_id != s.id:
            raise ValueError(
                f"result for scenario {r.scenario_id!r} passed to summarize of {s.id!r}"
            )
    truth = true_estimand(s)
    continuous = s.outcome_kind == "continuous"
    nan = float("nan")

    if continuous:
        est = np.array(
            [r.estimate.diff if r.estimate.estimable else nan for r in results]
        )
        se = np.array([r.estimate.se if r.estimate.estimable else nan for r in results])
        lo = np.array(
            [r.estimate.ci_low if r.estimate.estimable else nan for r in results]
        )
        hi = np.array(
            [r.estimate.ci_high if r.estimate.estimable else nan for r in results]
        )
        p_primary = np.array(
            [r.estimate.p_value if r.estimate.estimable else nan for r in results]
        )
    else:
        est = np.array(
            [r.estimate.log_or if r.estimate.or_estimable else nan for r in results]
        )
        se = np.array(
            [r.estimate.wald_se if r.estimate.or_estimable else nan for r in results]
        )
        lo = np.array(
            [
                r.estimate.profile_ci_low if r.estimate.or_estimable else nan
                for r in results
            ]
        )
        hi = np.array(
            [
                r.estimate.profile_ci_high if r.estimate.or_estimable else nan
                for r in results
            ]
        )

    ok = ~np.isnan(est)
    n_estimable = int(ok.sum())
    degenerate = n_estimable < 2

    bias = bias_mcse = emp_se = mod_se = coverage = coverage_mcse = None
    if n_estimable >= 1:
        errors = est[ok] - truth
        bias = float(errors.mean())
        mod_se = float(np.sqrt(np.mean(se[ok] ** 2)))
        covered = (lo[ok] <= truth) & (truth <= hi[ok])
        coverage = float(covered.mean())
        coverage_mcse = math.sqrt(coverage * (1.0 - coverage) / n_estimable)
    if n_estimable >= 2:
        emp_se = float(np.std(est[ok], ddof=1))
        bias_mcse = emp_se / math.sqrt(n_estimable)

    reject_t = reject_t_mcse = None
    reject_chi2 = reject_chi2_mcse = None
    reject_chi2_adj = reject_chi2_adj_mcse = None
    reject_fisher = reject_fisher_mcse = None
    n_chi2_calc = n_fisher_calc = None
    ror = None
    if continuous:
        reject_t, reject_t_mcse, _ = _rate(p_primary)
    else:
        p_chi2 = np.array(
            [
                r.estimate.p_chi2 if r.estimate.chi2_calculable else nan
                for r in results
            ]
        )
        p_adj = np.array(
            [
                r.estimate.p_chi2_adj if r.estimate.chi2_calculable else nan
                for r in results
            ]
        )
        p_fisher = np.array(
            [
                r.estimate.p_fisher if r.estimate.fisher_calculable else nan
                for r in results
            ]
        )
        reject_chi2, reject_chi2_mcse, n_chi2_calc = _rate(p_chi2)
        reject_chi2_adj, reject_chi2_adj_mcse, _ = _rate(p_adj)
        reject_fisher, reject_fisher_mcse, n_fisher_calc = _rate(p_fisher)
        n_chi2_calc = int(sum(r.estimate.chi2_calculable for r in results))
        n_fisher_calc = int(sum(r.estimate.fisher_calculable for r in results))
        if bias is not None:
            ror = math.exp(bias)

    return PerformanceSummary(
        scenario=s,
        n_iterations=len(results),
        n_estimable=n_estimable,
        n_chi2_calc=n_chi2_calc,
        n_fisher_calc=n_fisher_calc,
        bias=bias,
        bias_mcse=bias_mcse,
        emp_se=emp_se,
        mod_se=mod_se,
        coverage=coverage,
        coverage_mcse=coverage_mcse,
        reject_t=reject_t,
        reject_t_mcse=reject_t_mcse,
        reject_chi2=reject_chi2,
        reject_chi2_mcse=reject_chi2_mcse,
        reject_chi2_adj=reject_chi2_adj,
        reject_chi2_adj_mcse=reject_chi2_adj_mcse,
        reject_fisher=reject_fisher,
        reject_fisher_mcse=reject_fisher_mcse,
        ror=ror,
        degenerate=degenerate,
    )


def type1_slice(summaries: Sequence[PerformanceSummary]) -> list[PerformanceSummary]:
    """Keep only null-effect scenarios, where rejection rates are Type-1 error."""
    return [s for s in summaries if s.scenario.beta_r == 0.0]
