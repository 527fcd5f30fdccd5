"""Deterministic Monte Carlo execution.

Every (scenario, iteration) pair owns a counter-based random stream: the
stream key is a hash of the master seed and scenario id, and the iteration
index is placed in the Philox counter. Streams are therefore independent,
platform-stable, and reachable in any order, which makes results invariant to
execution order and parallelism.
"""

from __future__ import annotations

import hashlib
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np
from numpy.random import Generator, Philox
from scipy.special import expit, ndtri

from . import analysis, dgp
from .analysis import BinaryEstimate, ContinuousEstimate, ProfileBracketError
from .scenario import RunPlan, Scenario

# iterations per vectorised block, sized to keep working arrays ~2e6 elements
_BLOCK_ELEMENTS = 2_000_000
_CONF = 0.95


def _stream_key(master_seed: int, scenario_id: str) -> np.ndarray:
    digest = hashlib.blake2b(
        f"{master_seed}:{scenario_id}".encode("utf-8"), digest_size=16
    ).digest()
    return np.frombuffer(digest, dtype="<u8").copy()


def derive_stream(master_seed: int, scenario_id: str, iteration_index: int) -> Generator:
    """Independent random stream for one (scenario, iteration) pair."""
    counter = np.zeros(4, dtype=np.uint64)
    counter[2] = iteration_index
    return Generator(Philox(key=_stream_key(master_seed, scenario_id), counter=counter))


class _StreamFactory:
    """Re-keys a single Philox state per iteration; bit-identical to derive_stream."""

    def __init__(self, master_seed: int, scenario_id: str):
        self._key = _stream_key(master_seed, scenario_id)
        self._bits = Philox(key=self._key)
        self._gen = Generator(self._bits)

    def stream(self, iteration_index: int) -> Generator:
        state = self._bits.state
        inner = state["state"]
        inner["key"][:] = self._key
        inner["counter"][:] = 0
        inner["counter"][2] = iteration_index
        state["buffer_pos"] = 4  # drop any buffered draws from the previous key
        self._bits.state = state
        return self._gen


@dataclass(frozen=True)
class IterationResult:
    """One simulated trial's survivor counts and analysis results."""

    scenario_id: str
    index: int
    n1: int
    n0: int
    estimate: ContinuousEstimate | BinaryEstimate


@dataclass(frozen=True)
class GridResult:
    """Per-scenario outcome of a grid run; exactly one of results/error is set."""

    scenario: Scenario
    results: list[IterationResult] | None
    error: str | None


def _opt(value: float) -> float | None:
    return None if np.isnan(value) else float(value)


def _continuous_block(scenario, raw, u, sel, n1, n0, start, out):
    half = scenario.n // 2
    r = dgp.arm_indicator(scenario.n)
    y = dgp.outcome_linear(scenario, r, u) + scenario.sigma_y * ndtri(
        np.maximum(raw[..., 2], dgp.U_FLOOR)
    )
    yz = np.where(sel, y, 0.0)
    sq = yz * yz
    stats = analysis.ttest_from_moments(
        n1,
        n0,
        yz[:, half:].sum(axis=1),
        yz[:, :half].sum(axis=1),
        sq[:, half:].sum(axis=1),
        sq[:, :half].sum(axis=1),
        _CONF,
    )
    estimable = stats["estimable"]
    for j in range(raw.shape[0]):
        if estimable[j]:
            est = ContinuousEstimate(
                diff=float(stats["diff"][j]),
                se=float(stats["se"][j]),
                t_stat=float(stats["t"][j]),
                df=float(stats["df"][j]),
                p_value=float(stats["p"][j]),
                ci_low=float(stats["lo"][j]),
                ci_high=float(stats["hi"][j]),
                estimable=True,
            )
        else:
            est = ContinuousEstimate(None, None, None, None, None, None, None, False)
        out.append(
            IterationResult(
                scenario_id=scenario.id,
                index=start + j,
                n1=int(n1[j]),
                n0=int(n0[j]),
                estimate=est,
            )
        )


def _binary_block(scenario, raw, u, sel, n1, n0, start, out):
    half = scenario.n // 2
    r = dgp.arm_indicator(scenario.n)
    events = sel & (raw[..., 2] < expit(dgp.outcome_linear(scenario, r, u)))
    a = events[:, half:].sum(axis=1)
    c = events[:, :half].sum(axis=1)
    b = n1 - a
    d = n0 - c
    log_or, wald, estimable = analysis.log_or_wald(a, b, c, d)
    stat, stat_adj, chi2_ok = analysis.chi2_statistics(a, b, c, d)
    with np.errstate(invalid="ignore"):
        p_chi2 = np.where(chi2_ok, analysis.chi2_upper(np.where(chi2_ok, stat, 0.0), 1), np.nan)
        p_adj = np.where(chi2_ok, analysis.chi2_upper(np.where(chi2_ok, stat_adj, 0.0), 1), np.nan)
    p_fisher, fisher_ok = analysis.fisher_p_values(a, b, c, d)
    ci_lo = np.full(a.shape, np.nan)
    ci_hi = np.full(a.shape, np.nan)
    if estimable.any():
        idx = np.flatnonzero(estimable)
        lo, hi = analysis.profile_bounds(a[idx], b[idx], c[idx], d[idx], _CONF)
        ci_lo[idx] = lo
        ci_hi[idx] = hi
    for j in range(raw.shape[0]):
        est = BinaryEstimate(
            log_or=_opt(log_or[j]),
            wald_se=_opt(wald[j]),
            profile_ci_low=_opt(ci_lo[j]),
            profile_ci_high=_opt(ci_hi[j]),
            p_chi2=_opt(p_chi2[j]),
            p_chi2_adj=_opt(p_adj[j]),
            p_fisher=_opt(p_fisher[j]),
            or_estimable=bool(estimable[j]),
            chi2_calculable=bool(chi2_ok[j]),
            fisher_calculable=bool(fisher_ok[j]),
        )
        out.append(
            IterationResult(
                scenario_id=scenario.id,
                index=start + j,
                n1=int(n1[j]),
                n0=int(n0[j]),
                estimate=est,
            )
        )


def run_scenario(
    scenario: Scenario, iterations: int, master_seed: int
) -> list[IterationResult]:
    """Simulate and analyse ``iterations`` independent trials of one scenario.

    Result ``i`` depends only on (scenario, master_seed, i); trials are
    processed in vectorised blocks purely for speed and each row's values are
    independent of block composition.
    """
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    n = scenario.n
    half = n // 2
    draws = dgp.DRAWS_PER_PARTICIPANT * n
    block = max(1, min(iterations, _BLOCK_ELEMENTS // draws))
    factory = _StreamFactory(master_seed, scenario.id)
    r = dgp.arm_indicator(n)
    continuous = scenario.outcome_kind == "continuous"
    out: list[IterationResult] = []
    for start in range(0, iterations, block):
        stop = min(start + block, iterations)
        uniforms = np.empty((stop - start, draws))
        for j, it in enumerate(range(start, stop)):
            factory.stream(it).random(out=uniforms[j])
        raw = uniforms.reshape(stop - start, n, dgp.DRAWS_PER_PARTICIPANT)
        u = ndtri(np.maximum(raw[..., 0], dgp.U_FLOOR))
        sel = raw[..., 1] < dgp.intermediate_prob(scenario, r, u)
        n1 = sel[:, half:].sum(axis=1)
        n0 = sel[:, :half].sum(axis=1)
        if continuous:
            _continuous_block(scenario, raw, u, sel, n1, n0, start, out)
        else:
            _binary_block(scenario, raw, u, sel, n1, n0, start, out)
    return out


def run_grid(
    plan: RunPlan, progress: Callable[[str], None] | None = None
) -> Iterator[GridResult]:
    """Execute every scenario in plan order, yielding per-scenario results.

    Numerical contract failures inside one scenario are reported on that
    scenario's error channel without aborting the rest of the grid. With
    ``plan.threads > 1`` scenarios run concurrently but are still emitted in
    plan order with identical contents.
    """
    t0 = time.perf_counter()

    def execute(sc: Scenario) -> GridResult:
        try:
            return GridResult(sc, run_scenario(sc, plan.iterations, plan.master_seed), None)
        except (ProfileBracketError, ArithmeticError) as exc:
            return GridResult(sc, None, f"{type(exc).__name__}: {exc}")

    def emit(item: GridResult) -> GridResult:
        if progress is not None:
            elapsed = time.perf_counter() - t0
            progress(f"{item.scenario.id}\t{plan.iterations}\t{elapsed:.3f}")
        return item

    if plan.threads <= 1 or len(plan.scenarios) <= 1:
        for sc in plan.scenarios:
            yield emit(execute(sc))
        return

    with ThreadPoolExecutor(max_workers=plan.threads) as pool:
        window: list = []
        scenarios: Sequence[Scenario] = plan.scenarios
        depth = plan.threads + 1
        for sc in scenarios[:depth]:
            window.append(pool.submit(execute, sc))
        for nxt in range(depth, len(scenarios) + depth):
            item = window.pop(0).result()
            if nxt < len(scenarios):
                window.append(pool.submit(execute, scenarios[nxt]))
            yield emit(item)
