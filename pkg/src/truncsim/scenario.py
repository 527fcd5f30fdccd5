"""Scenario definitions and grid construction for two-arm truncated-outcome trials.

A scenario fixes one data-generating configuration: a logistic model for the
post-randomisation selection event and either a normal or a logistic model for
the outcome among selected participants.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace
from pathlib import Path

SET_TAGS = ("set1", "set2")
SENSITIVITY_TAGS = ("core", "A", "B", "C")
OUTCOME_KINDS = ("continuous", "binary")

# Core parameterisation shared by every grid cell.
N_VALUES = (100, 200, 500, 1000)
SELECTION_INTERCEPT = math.log(0.2)
CONFOUNDER_ON_SELECTION = math.log(0.8)
INTERACTION_ON_SELECTION = math.log(0.8)  # set2 only
OUTCOME_SD = 580.0
CONTINUOUS_INTERCEPT = 3300.0
CONTINUOUS_CONFOUNDER = -116.0  # -0.2 SD per unit of u
BINARY_INTERCEPT = math.log(0.1)
BINARY_CONFOUNDER = math.log(1.2)

# Sensitivity variant overrides.
SENS_A_CONFOUNDER_ON_SELECTION = math.log(0.5)
SENS_A_CONTINUOUS_CONFOUNDER = -580.0  # -1 SD
SENS_A_BINARY_CONFOUNDER = math.log(1.5)


def selection_or_values() -> tuple[float, ...]:
    """Odds-ratio grid for the treatment effect on the selection event."""
    return tuple((100 + 5 * k) / 100.0 for k in range(21)) + (5.0,)


def continuous_effect_values() -> tuple[float, ...]:
    """Treatment effects on the continuous outcome, in grams (0.1-SD steps plus 5 SD)."""
    return tuple(58.0 * k for k in range(21)) + (5.0 * OUTCOME_SD,)


def binary_effect_or_values() -> tuple[float, ...]:
    """Odds-ratio grid for the treatment effect on the binary outcome."""
    return selection_or_values()


def _round12(x: float) -> float:
    # +0.0 normalises -0.0 so equal values always share a representation
    return round(float(x), 12) + 0.0


def _canon_float(x: float | None) -> str:
    return "-" if x is None else repr(_round12(x))


@dataclass(frozen=True)
class Scenario:
    """One fully specified data-generating configuration.

    All effect parameters on the selection event and on a binary outcome are
    log odds ratios; continuous-outcome parameters are in outcome units
    (grams). ``sigma_y`` must be set for continuous scenarios and left None
    for binary ones.
    """

    set_tag: str
    sensitivity_tag: str
    outcome_kind: str
    n: int
    intercept_s: float
    alpha_r: float
    alpha_u: float
    alpha_ru: float
    intercept_y: float
    beta_r: float
    beta_u: float
    beta_ru: float = 0.0
    sigma_y: float | None = None

    def __post_init__(self) -> None:
        if self.set_tag not in SET_TAGS:
            raise ValueError(f"set_tag must be one of {SET_TAGS}, got {self.set_tag!r}")
        if self.sensitivity_tag not in SENSITIVITY_TAGS:
            raise ValueError(
                f"sensitivity_tag must be one of {SENSITIVITY_TAGS}, got {self.sensitivity_tag!r}"
            )
        if self.outcome_kind not in OUTCOME_KINDS:
            raise ValueError(
                f"outcome_kind must be one of {OUTCOME_KINDS}, got {self.outcome_kind!r}"
            )
        if not isinstance(self.n, int) or self.n < 4 or self.n % 2:
            raise ValueError(f"n must be an even integer >= 4, got {self.n!r}")
        if self.outcome_kind == "continuous":
            if self.sigma_y is None or not self.sigma_y > 0:
                raise ValueError("continuous scenarios require sigma_y > 0")
        elif self.sigma_y is not None:
            raise ValueError("binary scenarios must not set sigma_y")
        for name in ("intercept_s", "alpha_r", "alpha_u", "alpha_ru",
                     "intercept_y", "beta_r", "beta_u", "beta_ru"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def canonical(self) -> str:
        """Canonical field string; two scenarios are the same cell iff these match."""
        return "|".join(
            (
                self.set_tag,
                self.sensitivity_tag,
                self.outcome_kind,
                str(self.n),
                _canon_float(self.intercept_s),
                _canon_float(self.alpha_r),
                _canon_float(self.alpha_u),
                _canon_float(self.alpha_ru),
                _canon_float(self.intercept_y),
                _canon_float(self.beta_r),
                _canon_float(self.beta_u),
                _canon_float(self.beta_ru),
                _canon_float(self.sigma_y),
            )
        )

    @property
    def selection_or(self) -> float:
        """Treatment effect on the selection event on the odds-ratio scale."""
        return _round12(math.exp(self.alpha_r))

    @property
    def effect_display(self) -> float:
        """Treatment effect on the outcome: grams if continuous, OR if binary."""
        if self.outcome_kind == "continuous":
            return _round12(self.beta_r)
        return _round12(math.exp(self.beta_r))

    @property
    def id(self) -> str:
        digest = hashlib.blake2b(
            self.canonical().encode("ascii"), digest_size=6
        ).hexdigest()
        return (
            f"{self.set_tag}-{self.sensitivity_tag}-{self.outcome_kind}"
            f"-n{self.n}-or{self.selection_or:g}-ef{self.effect_display:g}-{digest}"
        )


def build_core_grid(
    set_tag: str,
    outcome_kind: str,
    *,
    n_values: tuple[int, ...] | None = None,
    or_values: tuple[float, ...] | None = None,
    effect_values: tuple[float, ...] | None = None,
) -> list[Scenario]:
    """Cartesian product of the core grids for one (set, outcome kind) pair.

    ``effect_values`` are grams for continuous outcomes and odds ratios for
    binary ones. Overrides replace the corresponding default grid.
    """
    if set_tag not in SET_TAGS:
        raise ValueError(f"set_tag must be one of {SET_TAGS}, got {set_tag!r}")
    if outcome_kind not in OUTCOME_KINDS:
        raise ValueError(f"outcome_kind must be one of {OUTCOME_KINDS}, got {outcome_kind!r}")
    ns = tuple(n_values) if n_values is not None else N_VALUES
    ors = tuple(or_values) if or_values is not None else selection_or_values()
    if effect_values is not None:
        effects = tuple(effect_values)
    elif outcome_kind == "continuous":
        effects = continuous_effect_values()
    else:
        effects = binary_effect_or_values()

    alpha_ru = INTERACTION_ON_SELECTION if set_tag == "set2" else 0.0
    continuous = outcome_kind == "continuous"
    grid = []
    for n in ns:
        for or_value in ors:
            for effect in effects:
                grid.append(
                    Scenario(
                        set_tag=set_tag,
                        sensitivity_tag="core",
                        outcome_kind=outcome_kind,
                        n=n,
                        intercept_s=SELECTION_INTERCEPT,
                        alpha_r=math.log(or_value),
                        alpha_u=CONFOUNDER_ON_SELECTION,
                        alpha_ru=alpha_ru,
                        intercept_y=CONTINUOUS_INTERCEPT if continuous else BINARY_INTERCEPT,
                        beta_r=effect if continuous else math.log(effect),
                        beta_u=CONTINUOUS_CONFOUNDER if continuous else BINARY_CONFOUNDER,
                        sigma_y=OUTCOME_SD if continuous else None,
                    )
                )
    return grid


def apply_sensitivity(grid: list[Scenario], variant: str) -> list[Scenario]:
    """Apply one sensitivity variant uniformly to a grid.

    A strengthens confounding, B reverses the treatment effect on selection
    (odds-ratio reciprocal), C raises the selection and binary-outcome event
    rates to 50%.
    """
    if variant not in ("A", "B", "C"):
        raise ValueError(f"variant must be A, B or C, got {variant!r}")
    out = []
    for s in grid:
        continuous = s.outcome_kind == "continuous"
        if variant == "A":
            s = replace(
                s,
                sensitivity_tag="A",
                alpha_u=SENS_A_CONFOUNDER_ON_SELECTION,
                beta_u=SENS_A_CONTINUOUS_CONFOUNDER if continuous else SENS_A_BINARY_CONFOUNDER,
            )
        elif variant == "B":
            s = replace(s, sensitivity_tag="B", alpha_r=-s.alpha_r)
        else:
            s = replace(
                s,
                sensitivity_tag="C",
                intercept_s=0.0,
                intercept_y=s.intercept_y if continuous else 0.0,
            )
        out.append(s)
    return out


def true_estimand(s: Scenario) -> float:
    """Treatment effect on the outcome absent any truncation: beta_r."""
    return s.beta_r


def bias_expected(s: Scenario) -> bool:
    """Whether the causal structure implies selection bias for this scenario.

    Requires a treatment (or treatment-by-confounder) effect on selection
    together with confounder effects on both selection and outcome.
    """
    return (
        (s.alpha_r != 0.0 or s.alpha_ru != 0.0)
        and s.alpha_u != 0.0
        and s.beta_u != 0.0
    )


@dataclass(frozen=True)
class RunPlan:
    """An ordered set of scenarios plus the execution protocol."""

    scenarios: tuple[Scenario, ...]
    iterations: int = 10000
    master_seed: int = 0
    out_dir: Path | None = None
    emit_raw: bool = False
    threads: int = 1

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        ids = [s.id for s in self.scenarios]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate scenario ids in plan: {dupes[:3]}")
