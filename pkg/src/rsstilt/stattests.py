"""Tests for the population mean from a ranked set sample.

The central statistic is

    T = (mean of row means - mu0) / S,   S**2 = (1/k**2) * sum_r s_r**2 / m_r,

with ``s_r**2`` the unbiased variance of row ``r``. It is referred to the
standard normal (PT), to a Student t with Welch-Satterthwaite degrees of
freedom (WT), or to its own bootstrap distribution (EAT, EAR, PB). Two
empirical-likelihood comparators for balanced designs are included.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from .core import Design, UrssSample
from .errors import (
    DegenerateValues,
    NoConvergence,
    RowTooSmall,
    UnbalancedDesign,
    ZeroVariance,
)
from .resampling import BootstrapBatch, bootstrap, draw_urss_batch, fit_parametric
from .sampling import RngSeed, SeedLike

ALTERNATIVES = ("greater", "less", "two-sided")
BOOTSTRAP_ALTERNATIVES = ("greater", "less")


@dataclass(frozen=True)
class TestOutcome:
    """Result of one test.

    ``hull_violation`` is only ever set by :func:`liu_el_test`, when the null
    mean falls outside the convex hull of the cycle means.
    """

    __test__ = False  # keep pytest from collecting this class

    statistic: float
    p_value: float
    method: str
    df: Optional[float] = None
    B: Optional[int] = None
    seed: Optional[RngSeed] = None
    hull_violation: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value {self.p_value!r} outside [0, 1]")
        if self.df is not None and not self.df > 0:
            raise ValueError(f"df must be positive, got {self.df!r}")


def _require_rows(design: Design, minimum: int = 2) -> None:
    small = [r + 1 for r, m in enumerate(design.counts) if m < minimum]
    if small:
        raise RowTooSmall(f"rows {small} have fewer than {minimum} observations")


def _row_stats(values: np.ndarray, design: Design) -> tuple[np.ndarray, np.ndarray]:
    """Row means and unbiased row variances along the last axis."""
    off = design.offsets[:-1]
    counts = np.asarray(design.counts, dtype=float)
    means = np.add.reduceat(values, off, axis=-1) / counts
    dev = values - np.repeat(means, design.counts, axis=-1)
    var = np.add.reduceat(dev * dev, off, axis=-1) / (counts - 1)
    return means, var


def pt_statistic_batch(values: np.ndarray, design: Design, mu0) -> np.ndarray:
    """Vectorised :func:`pt_statistic` over the leading axes of ``values``.

    Resamples whose every row is constant give ``S = 0``; their statistic
    is ``+/-inf`` (or ``nan`` when the numerator is also zero) instead of an
    error, since a bootstrap batch should not abort on one such draw.
    """
    _require_rows(design)
    means, var = _row_stats(np.asarray(values, dtype=float), design)
    counts = np.asarray(design.counts, dtype=float)
    k = design.k
    s = np.sqrt((var / counts).sum(axis=-1)) / k
    with np.errstate(divide="ignore", invalid="ignore"):
        return (means.mean(axis=-1) - mu0) / s


def pt_statistic(sample: UrssSample, mu0: float) -> float:
    _require_rows(sample.design)
    var = sample.row_variances()
    counts = np.asarray(sample.design.counts, dtype=float)
    s2 = (var / counts).sum() / sample.k**2
    if not s2 > 0:
        raise ZeroVariance("every row is constant; S = 0")
    return float((sample.rss_mean - mu0) / np.sqrt(s2))


def welch_df(sample: UrssSample) -> float:
    """Welch-Satterthwaite degrees of freedom of the row-mean contrast."""
    _require_rows(sample.design)
    var = sample.row_variances()
    counts = np.asarray(sample.design.counts, dtype=float)
    num = (var / counts).sum() ** 2
    den = (var**2 / (counts**2 * (counts - 1))).sum()
    if not den > 0:
        raise ZeroVariance("every row is constant; df undefined")
    return float(num / den)


def _check_alternative(alternative: str, allowed=ALTERNATIVES) -> str:
    if alternative not in allowed:
        raise ValueError(f"alternative must be one of {allowed}, got {alternative!r}")
    return alternative


def _normal_p(t: float, alternative: str) -> float:
    if alternative == "greater":
        return float(stats.norm.sf(t))
    if alternative == "less":
        return float(stats.norm.cdf(t))
    return float(min(2 * stats.norm.sf(abs(t)), 1.0))


def _student_p(t: float, df: float, alternative: str) -> float:
    if alternative == "greater":
        return float(stats.t.sf(t, df))
    if alternative == "less":
        return float(stats.t.cdf(t, df))
    return float(min(2 * stats.t.sf(abs(t), df), 1.0))


def pt_test(sample: UrssSample, mu0: float, alternative: str = "greater") -> TestOutcome:
    """Asymptotic normal test of ``H0: mu = mu0``."""
    alternative = _check_alternative(alternative)
    t = pt_statistic(sample, mu0)
    return TestOutcome(t, _normal_p(t, alternative), "PT")


def wt_test(sample: UrssSample, mu0: float, alternative: str = "greater") -> TestOutcome:
    """Welch-type t approximation to the null law of the PT statistic."""
    alternative = _check_alternative(alternative)
    t = pt_statistic(sample, mu0)
    df = welch_df(sample)
    return TestOutcome(t, _student_p(t, df, alternative), "WT", df=df)


def bootstrap_p_value(t_obs: float, t_star: np.ndarray, alternative: str = "greater") -> float:
    """Fraction of bootstrap statistics strictly beyond the observed one.

    ``"greater"`` counts ``T* > T``; ``"less"`` counts ``T* < T``. Ties never
    count, and ``nan`` statistics (degenerate resamples) never count.
    """
    if alternative == "greater":
        hits = np.count_nonzero(t_star > t_obs)
    else:
        hits = np.count_nonzero(t_star < t_obs)
    return float(hits / t_star.size)


def et_bootstrap_test(
    sample: UrssSample,
    mu0: float,
    method: str,
    B: int,
    seed: SeedLike,
    alternative: str = "greater",
) -> TestOutcome:
    """Bootstrap test with the null imposed by exponential tilting.

    The sample is tilted so the resampling law has mean ``mu0`` (pooled
    observations for EAT, row means for EAR); the observed statistic is
    compared with ``B`` statistics computed on resamples at the same
    ``mu0``.
    """
    alternative = _check_alternative(alternative, BOOTSTRAP_ALTERNATIVES)
    method = method.upper()
    if method not in ("EAT", "EAR"):
        raise ValueError(f"method must be EAT or EAR, got {method!r}")
    _require_rows(sample.design)
    t = pt_statistic(sample, mu0)
    batch = bootstrap(sample, method, B, seed, target=mu0)
    t_star = pt_statistic_batch(batch.values, sample.design, mu0)
    p = bootstrap_p_value(t, t_star, alternative)
    return TestOutcome(t, p, method, B=batch.B, seed=_seed_meta(seed))


def parametric_bootstrap_test(
    sample: UrssSample,
    mu0: float,
    family: str,
    B: int,
    seed: SeedLike,
    alternative: str = "greater",
) -> TestOutcome:
    """Parametric bootstrap test of ``H0: mu = mu0``.

    Resamples come from the fitted parent (mean = pooled sample mean), so
    each resample statistic is centred at the fitted mean rather than at
    ``mu0``; otherwise the bootstrap law would sit around the observed
    statistic and the p-value would hover near one half.
    """
    alternative = _check_alternative(alternative, BOOTSTRAP_ALTERNATIVES)
    _require_rows(sample.design)
    t = pt_statistic(sample, mu0)
    fitted = fit_parametric(sample, family)
    values = draw_urss_batch(fitted, sample.design, B, seed)
    t_star = pt_statistic_batch(values, sample.design, fitted.mean)
    p = bootstrap_p_value(t, t_star, alternative)
    return TestOutcome(t, p, "PB", B=int(B), seed=_seed_meta(seed))


def _seed_meta(seed: SeedLike) -> RngSeed | None:
    if isinstance(seed, RngSeed):
        return seed
    if isinstance(seed, (int, np.integer)):
        return RngSeed(int(seed))
    return None


def percentile_ci(
    sample: UrssSample,
    mu0: float,
    method: str,
    B: int,
    seed: SeedLike,
    level: float = 0.95,
    family: str = "normal",
) -> tuple[float, float]:
    """Percentile interval of ``mean* - mu0`` over ``B`` resamples.

    ``mean*`` is the mean of row means of a resample. No null is imposed:
    the resampling law is centred at the mean of the row means, the same
    estimator ``mean*`` computes, via the EAT or EAR tilt or the fitted
    parametric parent (``"PB"``). For unbalanced designs the pooled mean
    would be a biased centre, since it over-weights the larger rows.
    """
    if not 0 < level < 1:
        raise ValueError(f"level must be in (0, 1), got {level!r}")
    _require_rows(sample.design)
    batch: BootstrapBatch = bootstrap(sample, method, B, seed, target=sample.rss_mean, family=family)
    diffs = batch.rss_means() - mu0
    tail = (1 - level) / 2
    lo, hi = np.quantile(diffs, [tail, 1 - tail])
    return float(lo), float(hi)


def percentile_ci_decision(
    sample: UrssSample,
    mu0: float,
    method: str,
    B: int,
    seed: SeedLike,
    level: float = 0.95,
    family: str = "normal",
) -> bool:
    """Reject when the percentile interval of ``mean* - mu0`` misses zero."""
    lo, hi = percentile_ci(sample, mu0, method, B, seed, level, family)
    return bool(lo > 0 or hi < 0)


def _require_balanced(design: Design) -> None:
    if not design.is_balanced:
        raise UnbalancedDesign(f"design {design} is not balanced")


def baklizi_test(sample: UrssSample, mu0: float) -> TestOutcome:
    """Scaled empirical-likelihood statistic for a balanced RSS.

    The row variances in the scale factor are estimated by the unbiased
    within-row sample variances.
    """
    _require_balanced(sample.design)
    _require_rows(sample.design)
    dev = sample.values - mu0
    ss = float(dev @ dev)
    var_sum = float(sample.row_variances().sum())
    if not ss > 0 or not var_sum > 0:
        raise ZeroVariance("degenerate sample for the Baklizi statistic")
    ell = float(dev.sum()) ** 2 / ss
    c0 = (var_sum + float(((sample.row_means - mu0) ** 2).sum())) / var_sum
    stat = c0 * ell
    return TestOutcome(stat, float(stats.chi2.sf(stat, 1)), "Baklizi")


def cycle_means(sample: UrssSample) -> np.ndarray:
    """Mean of each cycle (one observation per rank) of a balanced sample."""
    _require_balanced(sample.design)
    return np.vstack(sample.rows).mean(axis=0)


def el_mean_statistic(x: np.ndarray, mu0: float, tol: float = 1e-10, max_iter: int = 200) -> tuple[float, np.ndarray]:
    """Empirical likelihood ratio statistic ``-2 log R(mu0)`` for a mean.

    Solves the dual ``sum d_i / (1 + eta d_i) = 0`` with ``d = x - mu0`` by
    Newton steps safeguarded by bisection on the interval where all
    ``1 + eta d_i > 0``. Returns the statistic and the EL weights. ``mu0``
    must lie strictly inside the range of ``x``; callers check that.
    """
    x = np.asarray(x, dtype=float)
    d = x - mu0
    if np.all(d == d[0]):
        raise DegenerateValues("all values equal")
    n = d.size
    # feasible open interval for eta
    lo = -1.0 / d.max()
    hi = -1.0 / d.min()

    def grad(eta: float) -> tuple[float, float]:
        z = 1.0 + eta * d
        return float((d / z).sum()), float(-((d / z) ** 2).sum())

    eta = 0.0
    for _ in range(max_iter):
        g, h = grad(eta)
        if abs(g) <= tol:
            break
        # g is strictly decreasing in eta
        if g > 0:
            lo = eta
        else:
            hi = eta
        step = eta - g / h
        eta = step if lo < step < hi else 0.5 * (lo + hi)
    else:
        raise NoConvergence(f"EL dual did not converge (gradient {g!r})")
    z = 1.0 + eta * d
    stat = float(2.0 * np.log(z).sum())
    return max(stat, 0.0), 1.0 / (n * z)


def liu_el_test(sample: UrssSample, mu0: float) -> TestOutcome:
    """Owen's EL test applied to the cycle means of a balanced RSS.

    When ``mu0`` is not strictly inside the range of the cycle means the EL
    ratio is zero; this is reported as ``p = 0`` with ``hull_violation`` set
    rather than raised.
    """
    cm = cycle_means(sample)
    if not cm.min() < mu0 < cm.max():
        return TestOutcome(np.inf, 0.0, "Liu", hull_violation=True)
    stat, _ = el_mean_statistic(cm, mu0)
    return TestOutcome(stat, float(stats.chi2.sf(stat, 1)), "Liu")


__all__ = [
    "TestOutcome",
    "baklizi_test",
    "bootstrap_p_value",
    "cycle_means",
    "el_mean_statistic",
    "et_bootstrap_test",
    "liu_el_test",
    "parametric_bootstrap_test",
    "percentile_ci",
    "percentile_ci_decision",
    "pt_statistic",
    "pt_statistic_batch",
    "pt_test",
    "welch_df",
    "wt_test",
]
