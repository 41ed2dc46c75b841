"""Exponential tilting of ranked set samples.

The KL-closest reweighting of a reference measure ``w`` on points ``v``
subject to a mean constraint has the closed form

    p_i = w_i exp(lam * v_i) / sum_j w_j exp(lam * v_j),

so the whole problem reduces to finding the scalar ``lam`` at which the
tilted mean ``A'(lam)`` hits the target, where
``A(lam) = log sum_i w_i exp(lam * v_i)`` is the log-normaliser. ``A'`` is
strictly increasing (its derivative is the tilted variance), which is what
makes the bracketed Newton iteration in :func:`solve_lambda` safe.

Three flavours are exposed:

* :func:`eat_weights` tilts all ``n`` observations jointly (base ``1/n``);
* :func:`ear_weights` tilts the ``k`` row means (base ``1/k``);
* :func:`row_et_weights` tilts a single row as if it were a simple random
  sample (base ``1/m_r``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import TiltWeights, UrssSample, WeightedDf
from .errors import (
    DegenerateValues,
    NoConvergence,
    RowTooSmall,
    TargetOutOfRange,
    WeightMismatch,
)

MAX_ITER = 200
REL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class TiltProblem:
    """Mean-constrained tilting of ``base_weights`` on ``values``."""

    values: np.ndarray
    base_weights: np.ndarray
    target: float

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float).reshape(-1)
        w = np.asarray(self.base_weights, dtype=float).reshape(-1)
        if v.shape != w.shape or v.size < 2:
            raise WeightMismatch("values and base weights need equal length >= 2")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-10:
            raise WeightMismatch("base weights must be positive and sum to 1")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "base_weights", w)
        object.__setattr__(self, "target", float(self.target))

    @classmethod
    def uniform(cls, values, target: float) -> "TiltProblem":
        values = np.asarray(values, dtype=float)
        return cls(values, np.full(values.size, 1.0 / values.size), target)

    @property
    def base_mean(self) -> float:
        return float(self.base_weights @ self.values)

    def log_normalizer(self, lam: float) -> float:
        """``A(lam) = log sum_i w_i exp(lam v_i)``, evaluated stably."""
        a = lam * self.values
        top = a.max()
        return float(top + np.log(self.base_weights @ np.exp(a - top)))

    def weights(self, lam: float) -> np.ndarray:
        a = lam * self.values
        e = self.base_weights * np.exp(a - a.max())
        return e / e.sum()

    def tilted_mean(self, lam: float) -> float:
        return float(self.weights(lam) @ self.values)


def _moments(lam: float, d: np.ndarray, w: np.ndarray) -> tuple[float, float]:
    # mean and variance of the centred values d under the tilt at lam
    a = lam * d
    e = w * np.exp(a - a.max())
    e /= e.sum()
    mean = float(e @ d)
    var = float(e @ (d - mean) ** 2)
    return mean, var


def solve_lambda(problem: TiltProblem) -> float:
    """Find the multiplier whose tilt has mean ``problem.target``.

    Bisection on a bracket grown geometrically from ``[-1, 1]``, with
    Newton steps taken whenever they stay inside the bracket.

    Raises
    ------
    DegenerateValues
        All values are equal.
    TargetOutOfRange
        Target not strictly inside ``(min(values), max(values))``.
    NoConvergence
        More than ``MAX_ITER`` function evaluations were needed.
    """
    v, w, target = problem.values, problem.base_weights, problem.target
    lo_v, hi_v = float(v.min()), float(v.max())
    if lo_v == hi_v:
        raise DegenerateValues(f"all {v.size} values equal {lo_v!r}")
    if not lo_v < target < hi_v:
        raise TargetOutOfRange(
            f"target {target!r} not strictly inside ({lo_v!r}, {hi_v!r})"
        )
    tol = REL_TOL * (1.0 + abs(target))
    # Centring on the target makes the residual the tilted mean of d.
    d = v - target

    g, gp = _moments(0.0, d, w)
    if abs(g) <= tol:
        return 0.0

    evals = 1
    lo, hi = -1.0, 1.0
    g_lo, _ = _moments(lo, d, w)
    while g_lo > 0:
        lo *= 2.0
        g_lo, _ = _moments(lo, d, w)
        evals += 1
        if evals >= MAX_ITER:
            raise NoConvergence("could not bracket the multiplier")
    g_hi, _ = _moments(hi, d, w)
    while g_hi < 0:
        hi *= 2.0
        g_hi, _ = _moments(hi, d, w)
        evals += 1
        if evals >= MAX_ITER:
            raise NoConvergence("could not bracket the multiplier")

    lam = 0.0
    while evals < MAX_ITER:
        if g > 0:
            hi = lam
        else:
            lo = lam
        step = lam - g / gp if gp > 0 else np.nan
        lam = step if lo < step < hi else 0.5 * (lo + hi)
        g, gp = _moments(lam, d, w)
        evals += 1
        if abs(g) <= tol:
            return _polish(lam, g, gp, d, w)
        if not lo < lam < hi:
            break
    raise NoConvergence(
        f"residual {g!r} after {evals} evaluations (target {target!r})"
    )


def _polish(lam: float, g: float, gp: float, d: np.ndarray, w: np.ndarray) -> float:
    # A couple of extra Newton steps take the residual from the acceptance
    # tolerance down to rounding level, so that equivalent problems (shifted
    # or rescaled values) give weights equal to ~1e-14.
    for _ in range(3):
        if g == 0 or not gp > 0:
            break
        cand = lam - g / gp
        g_new, gp_new = _moments(cand, d, w)
        if not abs(g_new) < abs(g):
            break
        lam, g, gp = cand, g_new, gp_new
    return float(lam)


def _tilt(problem: TiltProblem, level: str) -> TiltWeights:
    v = problem.values
    if np.all(v == problem.target):
        # every weighting meets the constraint; keep the base measure
        lam = 0.0
    else:
        lam = solve_lambda(problem)
    return TiltWeights(
        level=level,
        weights=problem.weights(lam),
        lam=lam,
        target=problem.target,
        values=problem.values,
    )


def eat_weights(sample: UrssSample, target: float | None = None) -> TiltWeights:
    """Per-observation weights tilting the pooled sample to mean ``target``.

    ``target`` defaults to the pooled mean, which gives uniform weights;
    pass the null value to impose a hypothesis.
    """
    if target is None:
        target = sample.grand_mean
    return _tilt(TiltProblem.uniform(sample.values, target), "observation")


def ear_weights(sample: UrssSample, target: float | None = None) -> TiltWeights:
    """Per-row weights tilting the row means to mean ``target``.

    The base measure is uniform over rows. ``target`` defaults to the
    pooled mean of all ``n`` observations, which for an unbalanced design
    differs from the mean of the row means and therefore gives a
    non-trivial tilt.
    """
    if target is None:
        target = sample.grand_mean
    return _tilt(TiltProblem.uniform(sample.row_means, target), "row")


def row_et_weights(sample: UrssSample, r: int, target: float | None = None) -> TiltWeights:
    """Tilt the observations of row ``r`` (0-based) to mean ``target``."""
    row = sample.rows[r]
    if row.size < 2:
        raise RowTooSmall(f"row {r + 1} has {row.size} observation(s); need >= 2")
    if target is None:
        target = float(row.mean())
    return _tilt(TiltProblem.uniform(row, target), "observation")


def et_df_eat(sample: UrssSample, weights: TiltWeights) -> WeightedDf:
    if len(weights) != sample.n:
        raise WeightMismatch(f"{len(weights)} weights for {sample.n} observations")
    return WeightedDf.from_points(sample.values, weights.weights)


def observation_masses(sample: UrssSample, row_weights: TiltWeights) -> np.ndarray:
    """Spread each row weight evenly over that row's observations."""
    if len(row_weights) != sample.k:
        raise WeightMismatch(f"{len(row_weights)} row weights for {sample.k} rows")
    counts = np.asarray(sample.design.counts, dtype=float)
    return np.repeat(row_weights.weights / counts, sample.design.counts)


def et_df_ear(sample: UrssSample, row_weights: TiltWeights) -> WeightedDf:
    return WeightedDf.from_points(sample.values, observation_masses(sample, row_weights))


def et_variance(sample: UrssSample, weights: TiltWeights) -> float:
    """Tilted second moment about the pooled sample mean.

    Deviations are taken about the untilted pooled mean, not about the
    tilted mean, so this is not the variance of the tilted distribution
    unless the tilt is trivial.
    """
    if len(weights) != sample.n:
        raise WeightMismatch(f"{len(weights)} weights for {sample.n} observations")
    dev = sample.values - sample.grand_mean
    return float(weights.weights @ dev**2)
