"""Cohort generation and extraction of the truncated analysis set.

Each simulated participant consumes a fixed stride of three uniforms from the
trial's random stream, in the order (confounder, selection event, outcome),
with the control arm laid out before the treatment arm. Normals come from the
inverse CDF of a single uniform. The fixed stride keeps stream consumption
independent of the selection outcomes, so a trial is a pure function of
(scenario, stream).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np
from scipy.special import expit, ndtri

from .scenario import Scenario

DRAWS_PER_PARTICIPANT = 3
# floor for inverse-CDF inputs; keeps ndtri finite when a uniform lands on 0
U_FLOOR = 2.0**-54


def selection_logit(s: Scenario, r, u):
    return s.intercept_s + s.alpha_r * r + s.alpha_u * u + s.alpha_ru * (r * u)


def outcome_linear(s: Scenario, r, u):
    return s.intercept_y + s.beta_r * r + s.beta_u * u + s.beta_ru * (r * u)


def intermediate_prob(s: Scenario, r, u):
    """Probability of the selection event given arm ``r`` and confounder ``u``."""
    return expit(selection_logit(s, r, u))


def outcome_param(s: Scenario, r, u):
    """Outcome-model parameter: the mean (continuous) or event probability (binary)."""
    if s.outcome_kind == "continuous":
        return outcome_linear(s, r, u)
    return expit(outcome_linear(s, r, u))


class ParticipantRecord(NamedTuple):
    r: int
    u: float
    s: int
    y: float | None


@dataclass(frozen=True)
class TrialData:
    """Column-wise per-participant data for one simulated trial.

    ``y`` is NaN exactly where ``s`` is 0: the outcome does not exist for
    unselected participants.
    """

    scenario_id: str
    outcome_kind: str
    r: np.ndarray
    u: np.ndarray
    s: np.ndarray
    y: np.ndarray

    @property
    def n(self) -> int:
        return self.r.shape[0]

    def records(self) -> Iterator[ParticipantRecord]:
        for i in range(self.n):
            selected = bool(self.s[i])
            yield ParticipantRecord(
                r=int(self.r[i]),
                u=float(self.u[i]),
                s=int(selected),
                y=float(self.y[i]) if selected else None,
            )


@dataclass(frozen=True)
class AnalysisSet:
    """Observed outcome values among selected participants, by arm."""

    treatment: np.ndarray
    control: np.ndarray

    @property
    def n1(self) -> int:
        return self.treatment.shape[0]

    @property
    def n0(self) -> int:
        return self.control.shape[0]


@dataclass(frozen=True)
class TwoByTwoTable:
    """Event/non-event counts by arm: (a, b) treatment, (c, d) control."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self) -> None:
        if min(self.a, self.b, self.c, self.d) < 0:
            raise ValueError("cell counts must be non-negative")

    @property
    def n1(self) -> int:
        return self.a + self.b

    @property
    def n0(self) -> int:
        return self.c + self.d

    @property
    def total(self) -> int:
        return self.a + self.b + self.c + self.d


def arm_indicator(n: int) -> np.ndarray:
    """0/1 arm labels with the control half first."""
    return np.repeat(np.array([0.0, 1.0]), n // 2)


def generate_trial(scenario: Scenario, stream: np.random.Generator) -> TrialData:
    """Simulate one trial from a scenario and a dedicated random stream."""
    n = scenario.n
    r = arm_indicator(n)
    raw = stream.random(DRAWS_PER_PARTICIPANT * n).reshape(n, DRAWS_PER_PARTICIPANT)
    u = ndtri(np.maximum(raw[:, 0], U_FLOOR))
    pi = intermediate_prob(scenario, r, u)
    s = raw[:, 1] < pi
    if scenario.outcome_kind == "continuous":
        y = outcome_linear(scenario, r, u) + scenario.sigma_y * ndtri(
            np.maximum(raw[:, 2], U_FLOOR)
        )
    else:
        y = (raw[:, 2] < expit(outcome_linear(scenario, r, u))).astype(np.float64)
    y = np.where(s, y, np.nan)
    return TrialData(
        scenario_id=scenario.id,
        outcome_kind=scenario.outcome_kind,
        r=r.astype(np.int64),
        u=u,
        s=s,
        y=y,
    )


def analysis_set(t: TrialData) -> AnalysisSet | TwoByTwoTable:
    """Restrict a trial to selected participants.

    Continuous trials yield the per-arm outcome values; binary trials yield
    the 2x2 event table. Empty arms are legitimate outputs here; downstream
    estimators flag them.
    """
    treat = t.r == 1
    if t.outcome_kind == "continuous":
        return AnalysisSet(
            treatment=t.y[t.s & treat],
            control=t.y[t.s & ~treat],
        )
    events = t.s & (t.y == 1.0)
    a = int(np.sum(events & treat))
    c = int(np.sum(events & ~treat))
    n1 = int(np.sum(t.s & treat))
    n0 = int(np.sum(t.s & ~treat))
    return TwoByTwoTable(a=a, b=n1 - a, c=c, d=n0 - c)
