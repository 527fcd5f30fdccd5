"""Analyses for truncated two-arm comparisons.

Implements the pooled-variance t-test, the sample log odds ratio with Wald SE
and a profile-likelihood confidence interval, Pearson and (N-1)-adjusted
chi-squared tests, Fisher's exact test, and the probability kernels these
need. Every function has a vector core operating on arrays of values/tables
so a whole simulation run can be analysed in a handful of array operations;
the public scalar API wraps the same cores.

Inestimable or incalculable inputs are data, not errors: estimators return
flagged results so missingness can be counted downstream.

Conventions, fixed here so results are comparable across runs:

* log odds ratio estimable iff all four cells are positive (separation
  otherwise); chi-squared and Fisher calculable iff all margins are positive.
* No continuity correction in the Pearson statistic; the adjusted variant
  scales it by (N-1)/N.
* Fisher's two-sided p sums the probabilities of all tables with the observed
  margins that are no more probable than the observed one, with relative
  slack 1e-7 on the comparison.
* Profile-interval endpoints solve deviance = chi-square quantile by bracketed
  bisection to well below 1e-8 in the log odds ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps
from scipy.special import gammaln

from .dgp import AnalysisSet, TwoByTwoTable

FISHER_SLACK = 1e-7
_BRACKET_DOUBLINGS = 10  # bracket grows 2, 4, ..., 1024 Wald SEs
_BISECTION_STEPS = 60
_LOGIT_CLIP = 600.0


class ProfileBracketError(RuntimeError):
    """Profile-interval bracketing failed; the table should have been flagged."""


# ---------------------------------------------------------------------------
# probability kernels


def _as_array(x, name: str, *, minimum=None) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if minimum is not None and np.any(arr < minimum):
        raise ValueError(f"{name} must be >= {minimum}")
    return arr


def _scalar_or_array(out: np.ndarray, scalar: bool):
    return float(out) if scalar else out


def t_tail(t, df):
    """Upper tail P(T > t) of Student's t with ``df`` degrees of freedom."""
    scalar = np.isscalar(t) and np.isscalar(df)
    _as_array(df, "df", minimum=1)
    return _scalar_or_array(sps.t.sf(t, df), scalar)


def _t_ppf(q, df):
    # Newton-polish scipy's ppf: its raw inverse can be ~1e-10 off in absolute
    # terms at low df, while cdf/pdf are accurate to machine precision
    x = sps.t.ppf(q, df)
    for _ in range(2):
        density = sps.t.pdf(x, df)
        step = np.where(density > 0, (sps.t.cdf(x, df) - q) / np.where(density > 0, density, 1.0), 0.0)
        x = x - step
    return x


def t_quantile(df, q):
    """Quantile of Student's t: the value with lower-tail probability ``q``."""
    scalar = np.isscalar(df) and np.isscalar(q)
    _as_array(df, "df", minimum=1)
    qa = np.asarray(q, dtype=np.float64)
    if np.any((qa <= 0) | (qa >= 1)):
        raise ValueError("q must lie strictly inside (0, 1)")
    return _scalar_or_array(_t_ppf(qa, df), scalar)


def chi2_upper(x, df=1):
    """Upper tail of the chi-squared distribution."""
    scalar = np.isscalar(x) and np.isscalar(df)
    _as_array(x, "x", minimum=0)
    _as_array(df, "df", minimum=1)
    return _scalar_or_array(sps.chi2.sf(x, df), scalar)


def log_binom(n, k):
    """Natural log of the binomial coefficient C(n, k)."""
    scalar = np.isscalar(n) and np.isscalar(k)
    na = np.asarray(n, dtype=np.float64)
    ka = np.asarray(k, dtype=np.float64)
    if np.any((ka < 0) | (ka > na)):
        raise ValueError("k must satisfy 0 <= k <= n")
    out = gammaln(na + 1) - gammaln(ka + 1) - gammaln(na - ka + 1)
    return _scalar_or_array(out, scalar)


# ---------------------------------------------------------------------------
# estimate containers


@dataclass(frozen=True)
class ContinuousEstimate:
    """Mean difference with pooled-variance t inference; fields None if inestimable."""

    diff: float | None
    se: float | None
    t_stat: float | None
    df: float | None
    p_value: float | None
    ci_low: float | None
    ci_high: float | None
    estimable: bool


@dataclass(frozen=True)
class BinaryEstimate:
    """Log odds ratio, profile interval and test p-values for one 2x2 table.

    The odds-ratio fields require all cells positive; the test p-values only
    require positive margins, so the two flag families differ by design.
    """

    log_or: float | None
    wald_se: float | None
    profile_ci_low: float | None
    profile_ci_high: float | None
    p_chi2: float | None
    p_chi2_adj: float | None
    p_fisher: float | None
    or_estimable: bool
    chi2_calculable: bool
    fisher_calculable: bool


# ---------------------------------------------------------------------------
# continuous: pooled t-test


def ttest_from_moments(n1, n0, sum1, sum0, ss1, ss0, conf: float = 0.95) -> dict:
    """Vector pooled t-test from per-arm counts, sums and sums of squares.

    Returns arrays keyed diff/se/t/df/p/lo/hi/estimable; non-estimable rows
    hold NaN. A row is estimable when both arms are non-empty, the pooled
    degrees of freedom are positive and the pooled variance is positive.
    """
    n1 = np.asarray(n1, dtype=np.float64)
    n0 = np.asarray(n0, dtype=np.float64)
    sum1 = np.asarray(sum1, dtype=np.float64)
    sum0 = np.asarray(sum0, dtype=np.float64)
    ss1 = np.asarray(ss1, dtype=np.float64)
    ss0 = np.asarray(ss0, dtype=np.float64)
    df = n1 + n0 - 2
    with np.errstate(divide="ignore", invalid="ignore"):
        diff = sum1 / n1 - sum0 / n0
        dev1 = ss1 - sum1 * sum1 / n1
        dev0 = ss0 - sum0 * sum0 / n0
        pooled = (dev1 + dev0) / df
        estimable = (n1 >= 1) & (n0 >= 1) & (df >= 1) & (pooled > 0)
        se = np.sqrt(pooled * (1.0 / n1 + 1.0 / n0))
        t = diff / se
        df_safe = np.where(estimable, df, 1.0)
        p = 2.0 * sps.t.sf(np.abs(t), df_safe)
        margin = _t_ppf(0.5 + conf / 2.0, df_safe) * se
        lo = diff - margin
        hi = diff + margin
    nan = np.nan
    return {
        "diff": np.where(estimable, diff, nan),
        "se": np.where(estimable, se, nan),
        "t": np.where(estimable, t, nan),
        "df": np.where(estimable, df, nan),
        "p": np.where(estimable, p, nan),
        "lo": np.where(estimable, lo, nan),
        "hi": np.where(estimable, hi, nan),
        "estimable": estimable,
    }


def mean_diff_ttest(a: AnalysisSet, conf: float = 0.95) -> ContinuousEstimate:
    """Two-sample equal-variance t-test of treatment minus control means.

    Degenerate analysis sets are allowed and come back flagged inestimable
    rather than raising, so they can be counted as missing data.
    """
    if not 0 < conf < 1:
        raise ValueError("conf must lie strictly inside (0, 1)")
    tvals = np.asarray(a.treatment, dtype=np.float64)
    cvals = np.asarray(a.control, dtype=np.float64)
    out = ttest_from_moments(
        np.array([float(tvals.size)]),
        np.array([float(cvals.size)]),
        np.array([tvals.sum()]),
        np.array([cvals.sum()]),
        np.array([(tvals * tvals).sum()]),
        np.array([(cvals * cvals).sum()]),
        conf,
    )
    if not out["estimable"][0]:
        return ContinuousEstimate(None, None, None, None, None, None, None, False)
    return ContinuousEstimate(
        diff=float(out["diff"][0]),
        se=float(out["se"][0]),
        t_stat=float(out["t"][0]),
        df=float(out["df"][0]),
        p_value=float(out["p"][0]),
        ci_low=float(out["lo"][0]),
        ci_high=float(out["hi"][0]),
        estimable=True,
    )


# ---------------------------------------------------------------------------
# binary: odds ratio and tests, vector cores over table arrays


def table_arrays(tables) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Stack TwoByTwoTable objects (or an iterable of 4-tuples) into cell arrays."""
    rows = [
        (t.a, t.b, t.c, t.d) if isinstance(t, TwoByTwoTable) else tuple(t)
        for t in tables
    ]
    arr = np.asarray(rows, dtype=np.int64).reshape(-1, 4)
    return arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]


def log_or_wald(a, b, c, d) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sample log odds ratio and Wald SE; NaN where any cell is zero.

    For a saturated 2x2 logistic model this closed form equals the maximum
    likelihood estimate.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    estimable = (a > 0) & (b > 0) & (c > 0) & (d > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_or = np.log((a * d) / (b * c))
        wald = np.sqrt(1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d)
    return (
        np.where(estimable, log_or, np.nan),
        np.where(estimable, wald, np.nan),
        estimable,
    )


def chi2_statistics(a, b, c, d) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pearson statistic, its (N-1)/N adjustment, and the calculability mask."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    total = a + b + c + d
    calculable = (a + b > 0) & (c + d > 0) & (a + c > 0) & (b + d > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        num = total * (a * d - b * c) ** 2
        den = (a + b) * (c + d) * (a + c) * (b + d)
        stat = num / den
        adjusted = stat * (total - 1.0) / total
    return (
        np.where(calculable, stat, np.nan),
        np.where(calculable, adjusted, np.nan),
        calculable,
    )


def fisher_p_values(a, b, c, d) -> tuple[np.ndarray, np.ndarray]:
    """Two-sided Fisher p by minimum-likelihood enumeration; NaN where incalculable.

    Conditions on both margins and sums hypergeometric probabilities of every
    table no more probable than the observed one, with relative slack
    ``FISHER_SLACK`` on the comparison. Calculability mirrors the chi-squared
    rule (all margins positive) so the two missing-data counts are comparable.
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    c = np.asarray(c, dtype=np.int64)
    d = np.asarray(d, dtype=np.int64)
    n1 = a + b
    n0 = c + d
    m = a + c
    total = n1 + n0
    calculable = (n1 > 0) & (n0 > 0) & (m > 0) & (b + d > 0)
    if not calculable.any():
        return np.full(a.shape, np.nan), calculable

    # gammaln lookup over the integer range removes per-table special-function calls
    lg = gammaln(np.arange(int(total.max()) + 2, dtype=np.float64))

    def log_choose(n, k):
        return lg[n + 1] - lg[k + 1] - lg[n - k + 1]

    k_min = np.maximum(0, m - n0)
    k_max = np.minimum(m, n1)
    width = np.where(calculable, k_max - k_min + 1, 1)
    offsets = np.arange(int(width.max()))
    k = k_min[:, None] + offsets[None, :]
    valid = offsets[None, :] < width[:, None]
    k = np.where(valid, k, 0)
    log_denominator = log_choose(total, m)
    log_pmf = (
        log_choose(n1[:, None], k)
        + log_choose(n0[:, None], m[:, None] - k)
        - log_denominator[:, None]
    )
    a_safe = np.where(calculable, a, 0)
    log_pmf_obs = (
        log_choose(n1, a_safe) + log_choose(n0, m - a_safe) - log_denominator
    )
    include = valid & (log_pmf <= (log_pmf_obs + math.log1p(FISHER_SLACK))[:, None])
    p = np.exp(np.where(include, log_pmf, -np.inf)).sum(axis=1)
    p = np.minimum(p, 1.0)
    return np.where(calculable, p, np.nan), calculable


def _profile_deviance(beta, a, c, n1, n0, loglik_max):
    """Deviance 2*(max log-lik - profiled log-lik) at log odds ratio ``beta``.

    The intercept that maximises the binomial log-likelihood at fixed beta
    solves a quadratic in the control-arm odds, so no inner iteration is
    needed.
    """
    total = n1 + n0
    m = a + c
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        r = np.exp(np.clip(beta, -_LOGIT_CLIP, _LOGIT_CLIP))
        quad_a = r * (total - m)
        quad_b = n1 * r + n0 - m * (1.0 + r)
        root = np.sqrt(quad_b * quad_b + 4.0 * quad_a * m)
        odds = np.where(quad_b >= 0, (2.0 * m) / (quad_b + root), (root - quad_b) / (2.0 * quad_a))
        alpha = np.log(odds)
        eta1 = alpha + beta
        loglik = (
            a * eta1
            - n1 * np.logaddexp(0.0, eta1)
            + c * alpha
            - n0 * np.logaddexp(0.0, alpha)
        )
    return 2.0 * (loglik_max - loglik)


def profile_bounds(a, b, c, d, conf: float = 0.95) -> tuple[np.ndarray, np.ndarray]:
    """Profile-likelihood interval endpoints for arrays of all-positive tables.

    Brackets each endpoint at beta-hat +/- k Wald SEs with k doubling from 2,
    then bisects a fixed number of steps; every row is resolved independently
    of the others. Raises ProfileBracketError if any row fails to bracket
    within 1024 Wald SEs, which signals a table that should have been flagged
    inestimable upstream.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if np.any((a <= 0) | (b <= 0) | (c <= 0) | (d <= 0)):
        raise ValueError("profile interval requires all cells > 0")
    n1 = a + b
    n0 = c + d
    beta_hat = np.log((a * d) / (b * c))
    wald = np.sqrt(1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d)
    loglik_max = (
        a * np.log(a / n1) + b * np.log(b / n1) + c * np.log(c / n0) + d * np.log(d / n0)
    )
    target = float(sps.chi2.ppf(conf, 1))

    def dev(beta):
        return _profile_deviance(beta, a, c, n1, n0, loglik_max)

    def solve(direction):
        k = np.full(a.shape, 2.0)
        found = dev(beta_hat + direction * k * wald) >= target
        for _ in range(_BRACKET_DOUBLINGS - 1):
            k = np.where(found, k, 2.0 * k)
            found = found | (dev(beta_hat + direction * k * wald) >= target)
        if not found.all():
            bad = int(np.argmin(found))
            raise ProfileBracketError(
                "profile deviance failed to bracket within "
                f"{2 ** _BRACKET_DOUBLINGS} Wald SEs for table "
                f"({int(a[bad])}, {int(b[bad])}, {int(c[bad])}, {int(d[bad])})"
            )
        inner = beta_hat.copy()
        outer = beta_hat + direction * k * wald
        for _ in range(_BISECTION_STEPS):
            mid = 0.5 * (inner + outer)
            high = dev(mid) >= target
            outer = np.where(high, mid, outer)
            inner = np.where(high, inner, mid)
        return 0.5 * (inner + outer)

    return solve(-1.0), solve(1.0)


# ---------------------------------------------------------------------------
# scalar table API


def log_odds_ratio(t: TwoByTwoTable) -> tuple[float, float] | None:
    """(log OR, Wald SE) for an all-positive table, else None (separation)."""
    log_or, wald, estimable = log_or_wald(
        np.array([t.a]), np.array([t.b]), np.array([t.c]), np.array([t.d])
    )
    if not estimable[0]:
        return None
    return float(log_or[0]), float(wald[0])


def profile_ci(t: TwoByTwoTable, conf: float = 0.95) -> tuple[float, float]:
    """Profile-likelihood confidence interval for the log odds ratio."""
    if min(t.a, t.b, t.c, t.d) <= 0:
        raise ValueError("profile_ci requires all cells > 0")
    lo, hi = profile_bounds(
        np.array([t.a]), np.array([t.b]), np.array([t.c]), np.array([t.d]), conf
    )
    return float(lo[0]), float(hi[0])


def pearson_chi2(t: TwoByTwoTable) -> tuple[float, float] | None:
    """(statistic, p) of the uncorrected Pearson test, or None on a zero margin."""
    stat, _, calculable = chi2_statistics(
        np.array([t.a]), np.array([t.b]), np.array([t.c]), np.array([t.d])
    )
    if not calculable[0]:
        return None
    s = float(stat[0])
    return s, float(chi2_upper(s, 1))


def adjusted_chi2(t: TwoByTwoTable) -> tuple[float, float] | None:
    """(statistic, p) of the (N-1)-scaled Pearson test, or None on a zero margin."""
    _, adjusted, calculable = chi2_statistics(
        np.array([t.a]), np.array([t.b]), np.array([t.c]), np.array([t.d])
    )
    if not calculable[0]:
        return None
    s = float(adjusted[0])
    return s, float(chi2_upper(s, 1))


def fisher_exact(t: TwoByTwoTable) -> float | None:
    """Two-sided Fisher exact p-value, or None on a zero margin."""
    p, calculable = fisher_p_values(
        np.array([t.a]), np.array([t.b]), np.array([t.c]), np.array([t.d])
    )
    if not calculable[0]:
        return None
    return float(p[0])
