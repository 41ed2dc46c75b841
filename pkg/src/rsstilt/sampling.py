"""Drawing ranked set samples.

All samplers take either an :class:`RngSeed` or a ready
``numpy.random.Generator``. Each judged observation consumes ``k`` parent
variates, drawn as one ``(n, k)`` block in row-major order, so the same seed
gives the same sets regardless of which sampler ranks them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .core import Design, DistributionSpec, UrssSample
from .errors import DimensionMismatch, NegativeSigma, PopulationTooSmall

_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngSeed:
    """Seed plus stream id; ``generator(*keys)`` derives independent substreams."""

    seed: int
    stream_id: int = 0

    def __post_init__(self) -> None:
        for name in ("seed", "stream_id"):
            value = int(getattr(self, name))
            if not 0 <= value <= _U64:
                raise ValueError(f"{name} must fit in an unsigned 64-bit integer")
            object.__setattr__(self, name, value)

    def generator(self, *keys: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *keys))
        return np.random.Generator(np.random.PCG64(ss))


SeedLike = Union[RngSeed, np.random.Generator, int]


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, RngSeed):
        return seed.generator()
    return RngSeed(int(seed)).generator()


def _pick(sets: np.ndarray, cols: np.ndarray) -> np.ndarray:
    return sets[np.arange(sets.shape[0]), cols]


def draw_urss(dist: DistributionSpec, design: Design, seed: SeedLike) -> UrssSample:
    """Perfectly ranked sample: the r-th smallest of k fresh parent draws."""
    rng = as_generator(seed)
    sets = dist.sample(rng, (design.n, design.k))
    sets.sort(axis=1)
    return UrssSample.from_flat(_pick(sets, design.ranks), design)


def draw_urss_imperfect(
    dist: DistributionSpec, design: Design, sigma_eps: float, seed: SeedLike
) -> UrssSample:
    """Dell-Clutter judgment ranking.

    Units are ranked on ``X + eps`` with ``eps ~ N(0, sigma_eps**2)`` and the
    unranked ``X`` of the selected unit is recorded, so
    ``corr(X, X + eps) = 1 / sqrt(1 + sigma_eps**2)`` for a unit-variance
    parent. ``sigma_eps = 0`` reproduces :func:`draw_urss` for the same seed.
    """
    if sigma_eps < 0:
        raise NegativeSigma(f"sigma_eps must be >= 0, got {sigma_eps!r}")
    rng = as_generator(seed)
    sets = dist.sample(rng, (design.n, design.k))
    judged = _judge(sets, sigma_eps, rng)
    order = np.argsort(judged, axis=1, kind="stable")
    return UrssSample.from_flat(_pick(sets, _pick(order, design.ranks)), design)


def _judge(x: np.ndarray, sigma_eps: float, rng: np.random.Generator) -> np.ndarray:
    return x + rng.normal(0.0, sigma_eps, x.shape)


def dell_clutter_pairs(
    dist: DistributionSpec, sigma_eps: float, size: int, seed: SeedLike
) -> tuple[np.ndarray, np.ndarray]:
    """``size`` pairs (value, ranking variable) under the Dell-Clutter model."""
    if sigma_eps < 0:
        raise NegativeSigma(f"sigma_eps must be >= 0, got {sigma_eps!r}")
    rng = as_generator(seed)
    x = dist.sample(rng, size)
    return x, _judge(x, sigma_eps, rng)


@dataclass(frozen=True, eq=False)
class MisrankMatrix:
    """Doubly stochastic ``p[s, r]``: true rank ``s`` judged as rank ``r``."""

    p: np.ndarray

    def __post_init__(self) -> None:
        p = np.array(self.p, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise DimensionMismatch(f"misranking matrix must be square, got {p.shape}")
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError("misranking probabilities must lie in [0, 1]")
        if np.any(np.abs(p.sum(axis=0) - 1) > 1e-9) or np.any(np.abs(p.sum(axis=1) - 1) > 1e-9):
            raise ValueError("misranking matrix must be doubly stochastic")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def k(self) -> int:
        return self.p.shape[0]

    @classmethod
    def identity(cls, k: int) -> "MisrankMatrix":
        return cls(np.eye(k))

    @classmethod
    def uniform(cls, k: int) -> "MisrankMatrix":
        return cls(np.full((k, k), 1.0 / k))


def draw_urss_matrix(
    dist: DistributionSpec, design: Design, misrank: MisrankMatrix, seed: SeedLike
) -> UrssSample:
    """Judged rank ``r`` records true order statistic ``s`` w.p. ``p[s, r]``."""
    if misrank.k != design.k:
        raise DimensionMismatch(f"{misrank.k}x{misrank.k} matrix for set size {design.k}")
    rng = as_generator(seed)
    cols = misrank.p[:, design.ranks].T  # (n, k): law of s for each slot
    cum = np.cumsum(cols / cols.sum(axis=1, keepdims=True), axis=1)
    u = rng.random(design.n)
    true_rank = np.minimum((u[:, None] >= cum).sum(axis=1), design.k - 1)
    sets = dist.sample(rng, (design.n, design.k))
    sets.sort(axis=1)
    return UrssSample.from_flat(_pick(sets, true_rank), design)


def draw_finite_population_rss(
    population: Sequence[tuple[float, float]] | np.ndarray,
    design: Design,
    seed: SeedLike,
) -> UrssSample:
    """RSS from a finite population ranked on a concomitant variable.

    Each set is ``k`` distinct records chosen without replacement; sets are
    drawn independently of one another. Ties in the concomitant are broken
    by record index.
    """
    pop = np.asarray(population, dtype=float).reshape(-1, 2)
    size = pop.shape[0]
    if size < design.k:
        raise PopulationTooSmall(f"population of {size} records, set size {design.k}")
    y, conc = pop[:, 0], pop[:, 1]
    rng = as_generator(seed)
    out = np.empty(design.n)
    for i, r in enumerate(design.ranks):
        idx = np.sort(rng.choice(size, design.k, replace=False))
        order = np.lexsort((idx, conc[idx]))
        out[i] = y[idx[order[r]]]
    return UrssSample.from_flat(out, design)
