"""Faceted line charts of performance measures, rendered to standalone SVG.

Layout mirrors the summary structure: facet columns by trial size, facet rows
by parameter set, x axis the treatment effect on the selection event (OR
scale), one coloured series per treatment effect on the outcome. Rendering is
deterministic (fixed SVG hash salt, no embedded date) so reruns are
byte-identical.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import matplotlib
from matplotlib.figure import Figure

from .config import FIGURE_METRICS
from .metrics import PerformanceSummary

_EXTREME_OR = 5.0
_EXTREME_CONTINUOUS_EFFECT = 2900.0

_Y_LABELS = {
    "bias": "Bias",
    "coverage": "Coverage of 95% CI",
    "type1": "Rejection rate at 5%",
    "emp_se": "Empirical SE",
    "mod_se": "Model SE",
    "ror": "Ratio of estimated to true OR",
    "missing": "Fraction inestimable",
}
_REFERENCE_LINES = {"type1": 0.05, "coverage": 0.95}
_SVG_PARAMS = {"svg.hashsalt": "truncsim", "svg.fonttype": "none"}


def _metric_value(metric: str, row: dict) -> float | None:
    if metric == "type1":
        return row["reject_t"] if row["outcome"] == "continuous" else row["reject_chi2"]
    if metric == "missing":
        if row["iterations"] in (None, 0) or row["n_estimable"] is None:
            return None
        return (row["iterations"] - row["n_estimable"]) / row["iterations"]
    return row[metric]


def _check_metric(metric: str, outcome: str) -> None:
    if metric not in FIGURE_METRICS:
        raise ValueError(f"unknown metric {metric!r}; choose from {FIGURE_METRICS}")
    if metric == "ror" and outcome != "binary":
        raise ValueError("metric 'ror' is only computed for binary outcomes")


def _rows_from_summaries(summaries: Sequence[PerformanceSummary]) -> list[dict]:
    rows = []
    for s in summaries:
        sc = s.scenario
        rows.append(
            {
                "set": sc.set_tag,
                "sensitivity": sc.sensitivity_tag,
                "outcome": sc.outcome_kind,
                "n": sc.n,
                "or_intermediate": sc.selection_or,
                "effect_outcome": sc.effect_display,
                "iterations": s.n_iterations,
                "n_estimable": s.n_estimable,
                "bias": s.bias,
                "coverage": s.coverage,
                "emp_se": s.emp_se,
                "mod_se": s.mod_se,
                "ror": s.ror,
                "reject_t": s.reject_t,
                "reject_chi2": s.reject_chi2,
            }
        )
    return rows


def _rows_from_csv(path: str | Path) -> list[dict]:
    def num(text: str) -> float | None:
        return None if text == "" else float(text)

    rows = []
    with Path(path).open(encoding="utf-8", newline="") as fh:
        for record in csv.DictReader(fh):
            rows.append(
                {
                    "set": record["set"],
                    "sensitivity": record["sensitivity"],
                    "outcome": record["outcome"],
                    "n": int(record["n"]),
                    "or_intermediate": float(record["or_intermediate"]),
                    "effect_outcome": float(record["effect_outcome"]),
                    "iterations": int(record["iterations"]),
                    "n_estimable": int(record["n_estimable"]),
                    "bias": num(record["bias"]),
                    "coverage": num(record["coverage"]),
                    "emp_se": num(record["emp_se"]),
                    "mod_se": num(record["mod_se"]),
                    "ror": num(record["ror"]),
                    "reject_t": num(record["reject_t"]),
                    "reject_chi2": num(record["reject_chi2"]),
                }
            )
    return rows


def _is_extreme_or(value: float) -> bool:
    return value in (_EXTREME_OR, round(1.0 / _EXTREME_OR, 12))


def _is_extreme_effect(outcome: str, value: float) -> bool:
    if outcome == "continuous":
        return abs(value) == _EXTREME_CONTINUOUS_EFFECT
    return _is_extreme_or(value)


def _build_figure_rows(rows: list[dict], metric: str, include_extreme: bool) -> Figure:
    if not rows:
        raise ValueError("no summaries to plot")
    outcomes = {r["outcome"] for r in rows}
    if len(outcomes) > 1:
        raise ValueError(f"summaries mix outcome kinds {sorted(outcomes)}")
    outcome = outcomes.pop()
    _check_metric(metric, outcome)
    if not include_extreme:
        rows = [
            r
            for r in rows
            if not _is_extreme_or(r["or_intermediate"])
            and not _is_extreme_effect(outcome, r["effect_outcome"])
        ]
        if not rows:
            raise ValueError("all points are extreme grid values; pass include_extreme")

    n_values = sorted({r["n"] for r in rows})
    set_tags = sorted({r["set"] for r in rows})
    effects = sorted({r["effect_outcome"] for r in rows})
    colors = matplotlib.colormaps["tab10"].colors

    fig = Figure(figsize=(2.6 * len(n_values) + 1.6, 2.2 * len(set_tags) + 1.2))
    axes = fig.subplots(len(set_tags), len(n_values), squeeze=False, sharex=True, sharey=True)
    for i, set_tag in enumerate(set_tags):
        for j, n in enumerate(n_values):
            ax = axes[i][j]
            if metric in _REFERENCE_LINES:
                ax.axhline(_REFERENCE_LINES[metric], color="0.4", lw=0.8, ls="--")
            for k, effect in enumerate(effects):
                points = [
                    (r["or_intermediate"], _metric_value(metric, r))
                    for r in rows
                    if r["set"] == set_tag and r["n"] == n and r["effect_outcome"] == effect
                ]
                points = sorted((x, y) for x, y in points if y is not None)
                if not points:
                    continue
                ax.plot(
                    [x for x, _ in points],
                    [y for _, y in points],
                    marker="o",
                    markersize=2.5,
                    linewidth=1.0,
                    color=colors[k % len(colors)],
                    label=f"{effect:g}" if i == 0 and j == 0 else None,
                )
            ax.set_title(f"{set_tag}, n={n}", fontsize=9)
            ax.grid(True, alpha=0.25)
            if i == len(set_tags) - 1:
                ax.set_xlabel("Treatment effect on selection (OR)", fontsize=8)
            if j == 0:
                ax.set_ylabel(_Y_LABELS[metric], fontsize=8)
            ax.tick_params(labelsize=7)
    handles, labels = axes[0][0].get_legend_handles_labels()
    if handles:
        fig.legend(
            handles,
            labels,
            title="Effect on outcome",
            loc="center right",
            fontsize=7,
            title_fontsize=8,
        )
    fig.suptitle(_Y_LABELS[metric], fontsize=11)
    fig.subplots_adjust(left=0.09, right=0.85, bottom=0.12, top=0.86, hspace=0.35, wspace=0.15)
    return fig


def build_figure(
    summaries: Sequence[PerformanceSummary], metric: str, include_extreme: bool = False
) -> Figure:
    """Assemble the faceted chart for a family of summaries."""
    return _build_figure_rows(_rows_from_summaries(summaries), metric, include_extreme)


def _save_svg(fig: Figure, out_path: str | Path) -> Path:
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context(_SVG_PARAMS):
        fig.savefig(out_path, format="svg", metadata={"Date": None})
    return out_path


def emit_figure(
    summaries: Sequence[PerformanceSummary],
    metric: str,
    out_path: str | Path,
    include_extreme: bool = False,
) -> Path:
    """Render summaries for one outcome kind to a standalone SVG file."""
    return _save_svg(build_figure(summaries, metric, include_extreme), out_path)


def emit_figure_csv(
    csv_path: str | Path,
    metric: str,
    out_path: str | Path,
    include_extreme: bool = False,
) -> Path:
    """Render a previously written summary CSV to a standalone SVG file."""
    rows = _rows_from_csv(csv_path)
    if metric == "type1":
        null_effect = {"continuous": 0.0, "binary": 1.0}
        rows = [r for r in rows if r["effect_outcome"] == null_effect[r["outcome"]]]
    return _save_svg(_build_figure_rows(rows, metric, include_extreme), out_path)
