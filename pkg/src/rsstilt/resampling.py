"""Bootstrap resampling of ranked set samples.

Every algorithm here fills slot ``(r, j)`` of a resample the same way: pick
``k`` values i.i.d. from some estimate of the parent distribution, sort
them, keep the ``r``-th. The algorithms differ only in how the ``k`` values
are picked:

* EAT draws from the pooled observations with per-observation tilted
  probabilities;
* EAR first draws a row with its tilted row probability, then an
  observation uniformly within that row;
* the parametric bootstrap draws from a fitted parent distribution.

Resamples are held as one ``(B, n)`` array in the flattened layout of
:class:`~rsstilt.core.UrssSample`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .core import Design, DistributionSpec, TiltWeights, UrssSample
from .errors import NonPositiveMean, WeightMismatch
from .sampling import SeedLike, as_generator
from .tilting import ear_weights, eat_weights


class AliasTable:
    """Walker/Vose alias table for O(1) categorical draws."""

    def __init__(self, probs) -> None:
        p = np.asarray(probs, dtype=float)
        if p.ndim != 1 or p.size == 0 or np.any(p < 0) or p.sum() <= 0:
            raise ValueError("probabilities must be a nonempty nonnegative vector")
        n = p.size
        scaled = p * (n / p.sum())
        prob = np.ones(n)
        alias = np.arange(n)
        small = [i for i in range(n) if scaled[i] < 1.0]
        large = [i for i in range(n) if scaled[i] >= 1.0]
        while small and large:
            s, g = small.pop(), large.pop()
            prob[s] = scaled[s]
            alias[s] = g
            scaled[g] -= 1.0 - scaled[s]
            (small if scaled[g] < 1.0 else large).append(g)
        # leftovers are 1 up to rounding
        self.prob = prob
        self.alias = alias
        self.size = n

    def draw(self, rng: np.random.Generator, shape) -> np.ndarray:
        col = rng.integers(0, self.size, size=shape)
        keep = rng.random(shape) < self.prob[col]
        return np.where(keep, col, self.alias[col])


@dataclass(frozen=True, eq=False)
class BootstrapBatch:
    """``B`` resamples sharing the source design."""

    design: Design
    values: np.ndarray
    method: str
    seed: SeedLike | None = None

    @property
    def B(self) -> int:
        return self.values.shape[0]

    def resample(self, b: int) -> UrssSample:
        return UrssSample.from_flat(self.values[b], self.design)

    def __iter__(self) -> Iterator[UrssSample]:
        return (self.resample(b) for b in range(self.B))

    def __len__(self) -> int:
        return self.B

    def row_means(self) -> np.ndarray:
        """``(B, k)`` array of per-resample row means."""
        off = self.design.offsets
        return np.add.reduceat(self.values, off[:-1], axis=1) / np.asarray(self.design.counts)

    def rss_means(self) -> np.ndarray:
        """Per-resample mean of row means."""
        return self.row_means().mean(axis=1)


def _rank_select(picked: np.ndarray, design: Design) -> np.ndarray:
    # picked: (B, n, k) draws; keep the r-th smallest in each slot of rank r
    picked.sort(axis=2)
    idx = design.ranks[None, :, None]
    return np.take_along_axis(picked, np.broadcast_to(idx, picked.shape[:2] + (1,)), axis=2)[..., 0]


def _check_B(B: int) -> int:
    B = int(B)
    if B < 1:
        raise ValueError(f"B must be a positive integer, got {B}")
    return B


def eat_picks(sample: UrssSample, weights: TiltWeights, shape, rng: np.random.Generator) -> np.ndarray:
    """Indices into ``sample.values`` drawn with the EAT probabilities."""
    if weights.level != "observation" or len(weights) != sample.n:
        raise WeightMismatch(
            f"EAT needs {sample.n} per-observation weights, got {len(weights)} ({weights.level})"
        )
    return AliasTable(weights.weights).draw(rng, shape)


def ear_picks(sample: UrssSample, row_weights: TiltWeights, shape, rng: np.random.Generator) -> np.ndarray:
    """Indices into ``sample.values``: a row by EAR weight, then a uniform member."""
    if row_weights.level != "row" or len(row_weights) != sample.k:
        raise WeightMismatch(
            f"EAR needs {sample.k} per-row weights, got {len(row_weights)} ({row_weights.level})"
        )
    design = sample.design
    rows = AliasTable(row_weights.weights).draw(rng, shape)
    counts = np.asarray(design.counts)
    within = np.floor(rng.random(shape) * counts[rows]).astype(np.intp)
    return design.offsets[:-1][rows] + within


def bootstrap_eat(
    sample: UrssSample, weights: TiltWeights, B: int, seed: SeedLike
) -> BootstrapBatch:
    """Resample by drawing ``k`` pooled observations per slot with EAT weights."""
    design = sample.design
    idx = eat_picks(sample, weights, (_check_B(B), design.n, design.k), as_generator(seed))
    return BootstrapBatch(design, _rank_select(sample.values[idx], design), "EAT", seed)


def bootstrap_ear(
    sample: UrssSample, row_weights: TiltWeights, B: int, seed: SeedLike
) -> BootstrapBatch:
    """Resample by drawing a row with EAR weights, then a member of that row."""
    design = sample.design
    idx = ear_picks(sample, row_weights, (_check_B(B), design.n, design.k), as_generator(seed))
    return BootstrapBatch(design, _rank_select(sample.values[idx], design), "EAR", seed)


def fit_parametric(sample: UrssSample, family: str, mean: float | None = None) -> DistributionSpec:
    """Fitted parent for the parametric bootstrap.

    The location (or exponential mean) is ``mean``, by default the pooled
    sample mean; normal and logistic scales are fixed at 1.
    """
    if mean is None:
        mean = sample.grand_mean
    family = family.lower()
    if family == "normal":
        return DistributionSpec.normal(mean, 1.0)
    if family == "logistic":
        return DistributionSpec.logistic(mean, 1.0)
    if family == "exponential":
        if mean <= 0:
            raise NonPositiveMean(f"cannot fit an exponential with mean {mean!r}")
        return DistributionSpec.exponential(mean)
    raise ValueError(f"unknown family {family!r}")


def draw_urss_batch(dist: DistributionSpec, design: Design, B: int, seed: SeedLike) -> np.ndarray:
    """``B`` perfectly ranked samples from ``dist`` as a ``(B, n)`` array."""
    rng = as_generator(seed)
    return _rank_select(dist.sample(rng, (_check_B(B), design.n, design.k)), design)


def parametric_bootstrap(
    sample: UrssSample, family: str, B: int, seed: SeedLike, mean: float | None = None
) -> BootstrapBatch:
    fitted = fit_parametric(sample, family, mean)
    values = draw_urss_batch(fitted, sample.design, B, seed)
    return BootstrapBatch(sample.design, values, "Parametric", seed)


def bootstrap(
    sample: UrssSample,
    method: str,
    B: int,
    seed: SeedLike,
    target: float | None = None,
    family: str = "normal",
) -> BootstrapBatch:
    """Dispatch on ``method`` in {"EAT", "EAR", "PB"}.

    EAT and EAR tilt to ``target`` first; PB uses it as the fitted mean.
    """
    method = method.upper()
    if method == "EAT":
        return bootstrap_eat(sample, eat_weights(sample, target), B, seed)
    if method == "EAR":
        return bootstrap_ear(sample, ear_weights(sample, target), B, seed)
    if method == "PB":
        return parametric_bootstrap(sample, family, B, seed, target)
    raise ValueError(f"unknown resampling method {method!r}")


__all__ = [
    "AliasTable",
    "BootstrapBatch",
    "bootstrap",
    "bootstrap_ear",
    "bootstrap_eat",
    "draw_urss_batch",
    "ear_picks",
    "eat_picks",
    "fit_parametric",
    "parametric_bootstrap",
]
