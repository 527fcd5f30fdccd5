"""Delimited output: per-grid summary CSVs, the run manifest, raw dumps.

Output is byte-stable: fixed column order, shortest round-trip float
formatting, LF line endings, and a manifest without timestamps.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

from . import __version__
from .config import plan_digest
from .engine import IterationResult
from .metrics import PerformanceSummary
from .scenario import Scenario

SUMMARY_COLUMNS = [
    "scenario_id",
    "set",
    "sensitivity",
    "outcome",
    "n",
    "or_intermediate",
    "effect_outcome",
    "alpha_u",
    "beta_u",
    "alpha_ru",
    "beta_ru",
    "iterations",
    "n_estimable",
    "n_chi2_calc",
    "n_fisher_calc",
    "bias",
    "bias_mcse",
    "emp_se",
    "mod_se",
    "coverage",
    "coverage_mcse",
    "reject_t",
    "reject_chi2",
    "reject_chi2_adj",
    "reject_fisher",
    "ror",
]

MANIFEST_NAME = "run_manifest.json"


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def summary_row(s: PerformanceSummary) -> dict[str, str]:
    sc = s.scenario
    return {
        "scenario_id": sc.id,
        "set": sc.set_tag,
        "sensitivity": sc.sensitivity_tag,
        "outcome": sc.outcome_kind,
        "n": _cell(sc.n),
        "or_intermediate": _cell(sc.selection_or),
        "effect_outcome": _cell(sc.effect_display),
        "alpha_u": _cell(sc.alpha_u),
        "beta_u": _cell(sc.beta_u),
        "alpha_ru": _cell(sc.alpha_ru),
        "beta_ru": _cell(sc.beta_ru),
        "iterations": _cell(s.n_iterations),
        "n_estimable": _cell(s.n_estimable),
        "n_chi2_calc": _cell(s.n_chi2_calc),
        "n_fisher_calc": _cell(s.n_fisher_calc),
        "bias": _cell(s.bias),
        "bias_mcse": _cell(s.bias_mcse),
        "emp_se": _cell(s.emp_se),
        "mod_se": _cell(s.mod_se),
        "coverage": _cell(s.coverage),
        "coverage_mcse": _cell(s.coverage_mcse),
        "reject_t": _cell(s.reject_t),
        "reject_chi2": _cell(s.reject_chi2),
        "reject_chi2_adj": _cell(s.reject_chi2_adj),
        "reject_fisher": _cell(s.reject_fisher),
        "ror": _cell(s.ror),
    }


def summary_filename(set_tag: str, sensitivity: str, outcome: str) -> str:
    return f"summary_{set_tag}_{sensitivity}_{outcome}.csv"


def write_summaries(
    summaries: Sequence[PerformanceSummary],
    out_dir: str | Path,
    *,
    master_seed: int,
    iterations: int,
    errors: dict[str, str] | None = None,
) -> list[Path]:
    """Write one CSV per (set, sensitivity, outcome) plus the run manifest.

    Rows keep the order in which summaries are passed (the grid order).
    """
    if not summaries:
        raise ValueError("write_summaries requires at least one summary")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    groups: dict[tuple[str, str, str], list[PerformanceSummary]] = {}
    for s in summaries:
        key = (s.scenario.set_tag, s.scenario.sensitivity_tag, s.scenario.outcome_kind)
        groups.setdefault(key, []).append(s)

    written: list[Path] = []
    for (set_tag, sensitivity, outcome), group in groups.items():
        path = out_dir / summary_filename(set_tag, sensitivity, outcome)
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
            writer.writeheader()
            for s in group:
                writer.writerow(summary_row(s))
        written.append(path)

    manifest = {
        "artifact": "truncsim",
        "version": __version__,
        "master_seed": master_seed,
        "iterations": iterations,
        "config_hash": plan_digest([s.scenario for s in summaries], master_seed, iterations),
        "scenario_count": len(summaries),
        "files": sorted(p.name for p in written),
        "errors": dict(sorted((errors or {}).items())),
    }
    manifest_path = out_dir / MANIFEST_NAME
    manifest_path.write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    written.append(manifest_path)
    return written


_RAW_CONTINUOUS = [
    "iteration", "n1", "n0", "diff", "se", "t_stat", "df", "p_value",
    "ci_low", "ci_high", "estimable",
]
_RAW_BINARY = [
    "iteration", "n1", "n0", "log_or", "wald_se", "profile_ci_low",
    "profile_ci_high", "p_chi2", "p_chi2_adj", "p_fisher",
    "or_estimable", "chi2_calculable", "fisher_calculable",
]


def write_raw(
    scenario: Scenario, results: Sequence[IterationResult], out_dir: str | Path
) -> Path:
    """Opt-in per-iteration dump for one scenario."""
    raw_dir = Path(out_dir) / "raw"
    raw_dir.mkdir(parents=True, exist_ok=True)
    path = raw_dir / f"{scenario.id}.csv"
    continuous = scenario.outcome_kind == "continuous"
    columns = _RAW_CONTINUOUS if continuous else _RAW_BINARY
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for r in results:
            e = r.estimate
            if continuous:
                row = [r.index, r.n1, r.n0, e.diff, e.se, e.t_stat, e.df,
                       e.p_value, e.ci_low, e.ci_high, e.estimable]
            else:
                row = [r.index, r.n1, r.n0, e.log_or, e.wald_se,
                       e.profile_ci_low, e.profile_ci_high, e.p_chi2,
                       e.p_chi2_adj, e.p_fisher, e.or_estimable,
                       e.chi2_calculable, e.fisher_calculable]
            writer.writerow([_cell(v) for v in row])
    return path
