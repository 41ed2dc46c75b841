"""Domain types shared across the package.

A ranked set sample is stored row by row: row ``r`` (0-based here, rank
``r + 1`` in the usual notation) holds the ``m_r`` measurements taken on
units judged to have that rank. The flattened view ``values`` concatenates
the rows in rank order and is what the vectorised routines consume.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import InvalidDesign, RssTiltError


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Design:
    """Per-rank measurement counts ``(m_1, ..., m_k)``."""

    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        counts = tuple(int(c) for c in self.counts)
        if len(counts) < 2:
            raise InvalidDesign(f"set size k must be >= 2, got {len(counts)}")
        if any(c < 1 for c in counts):
            raise InvalidDesign(f"every count must be >= 1, got {counts}")
        object.__setattr__(self, "counts", counts)

    @property
    def k(self) -> int:
        return len(self.counts)

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def q(self) -> np.ndarray:
        """Row proportions ``m_r / n``."""
        return np.asarray(self.counts, dtype=float) / self.n

    @property
    def is_balanced(self) -> bool:
        return len(set(self.counts)) == 1

    @property
    def ranks(self) -> np.ndarray:
        """0-based rank of each position of the flattened sample."""
        return np.repeat(np.arange(self.k), self.counts)

    @property
    def offsets(self) -> np.ndarray:
        """Start index of each row in the flattened sample (length k + 1)."""
        return np.concatenate([[0], np.cumsum(self.counts)])

    @classmethod
    def parse(cls, text: str) -> "Design":
        """Parse ``"8,3,3,2,4"`` or one of the named designs ``D1``..``D6``."""
        key = text.strip().upper()
        if key in NAMED_DESIGNS:
            return NAMED_DESIGNS[key]
        try:
            return cls(tuple(int(tok) for tok in text.split(",")))
        except ValueError as exc:
            if isinstance(exc, RssTiltError):
                raise
            raise InvalidDesign(f"cannot parse design {text!r}") from None

    def __str__(self) -> str:
        return ",".join(map(str, self.counts))


NAMED_DESIGNS: dict[str, Design] = {
    "D1": Design((5, 5, 5, 5, 5)),
    "D2": Design((8, 3, 3, 2, 4)),
    "D3": Design((3, 2, 5, 8, 3)),
    "D4": Design((3, 10, 3, 3, 3)),
    "D5": Design((4, 2, 3, 3, 8)),
    "D6": Design((2, 2, 2, 2, 2)),
}


def design_name(design: Design) -> str:
    for name, d in NAMED_DESIGNS.items():
        if d == design:
            return name
    return str(design)


@dataclass(frozen=True, eq=False)
class UrssSample:
    """An (un)balanced ranked set sample.

    Parameters
    ----------
    rows : sequence of sequences of float
        ``rows[r]`` are the measurements on units of rank ``r + 1``.
    design : Design, optional
        Expected counts. Inferred from the row lengths when omitted; when
        given, the row lengths must agree with it exactly.
    """

    rows: tuple[np.ndarray, ...]
    design: Design = None  # type: ignore[assignment]
    values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        rows = tuple(np.array(r, dtype=float).reshape(-1) for r in self.rows)
        lengths = tuple(len(r) for r in rows)
        design = self.design if self.design is not None else Design(lengths)
        if lengths != design.counts:
            raise InvalidDesign(
                f"row lengths {lengths} disagree with design {design.counts}"
            )
        flat = np.concatenate(rows)
        if not np.all(np.isfinite(flat)):
            raise InvalidDesign("sample contains non-finite values")
        object.__setattr__(self, "rows", tuple(_frozen(r) for r in rows))
        object.__setattr__(self, "design", design)
        object.__setattr__(self, "values", _frozen(flat))

    @classmethod
    def from_flat(cls, values: Sequence[float], design: Design) -> "UrssSample":
        values = np.asarray(values, dtype=float)
        if values.shape != (design.n,):
            raise InvalidDesign(
                f"expected {design.n} values for design {design}, got {values.shape}"
            )
        off = design.offsets
        return cls(tuple(values[off[r]:off[r + 1]] for r in range(design.k)), design)

    @property
    def k(self) -> int:
        return self.design.k

    @property
    def n(self) -> int:
        return self.design.n

    @property
    def row_means(self) -> np.ndarray:
        return np.array([r.mean() for r in self.rows])

    @property
    def grand_mean(self) -> float:
        """Mean of all ``n`` observations (not the mean of row means)."""
        return float(self.values.mean())

    @property
    def rss_mean(self) -> float:
        """Mean of the row means, the usual RSS estimator of the population mean."""
        return float(self.row_means.mean())

    def row_variances(self) -> np.ndarray:
        """Unbiased within-row variances; ``nan`` for rows of length one."""
        return np.array(
            [r.var(ddof=1) if len(r) > 1 else np.nan for r in self.rows]
        )

    def shifted(self, c: float) -> "UrssSample":
        return UrssSample(tuple(r + c for r in self.rows), self.design)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, UrssSample):
            return NotImplemented
        return self.design == other.design and np.array_equal(self.values, other.values)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class WeightedDf:
    """A right-continuous step distribution function.

    ``support`` is strictly increasing and ``probs`` holds the jump at each
    support point. Use :meth:`from_points` to build one from raw (possibly
    tied, unsorted) points.
    """

    support: np.ndarray
    probs: np.ndarray
    cumulative: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        support = np.asarray(self.support, dtype=float)
        probs = np.asarray(self.probs, dtype=float)
        if support.shape != probs.shape or support.ndim != 1 or support.size == 0:
            raise ValueError("support and probs must be equal-length 1-d arrays")
        if np.any(np.diff(support) <= 0):
            raise ValueError("support must be strictly increasing")
        if np.any(probs < 0):
            raise ValueError("probabilities must be nonnegative")
        total = probs.sum()
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        cum = np.cumsum(probs)
        cum[-1] = 1.0
        object.__setattr__(self, "support", _frozen(support))
        object.__setattr__(self, "probs", _frozen(probs))
        object.__setattr__(self, "cumulative", _frozen(cum))

    @classmethod
    def from_points(cls, points: Sequence[float], probs: Sequence[float]) -> "WeightedDf":
        """Merge tied points by summing their probabilities."""
        points = np.asarray(points, dtype=float)
        probs = np.asarray(probs, dtype=float)
        support, inverse = np.unique(points, return_inverse=True)
        merged = np.bincount(inverse.reshape(-1), weights=probs, minlength=support.size)
        return cls(support, merged)

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.support.tolist(), self.probs.tolist()))

    @property
    def mean(self) -> float:
        return float(self.probs @ self.support)

    def __call__(self, t):
        """Evaluate at scalar or array ``t``."""
        idx = np.searchsorted(self.support, t, side="right")
        cum = np.concatenate([[0.0], self.cumulative])
        out = cum[idx]
        return float(out) if np.ndim(out) == 0 else out


def eval_df(df: WeightedDf, t):
    """Total probability of the atoms at or below ``t``."""
    return df(t)


def edf(sample: UrssSample) -> WeightedDf:
    """Empirical DF of the pooled sample, mass ``1/n`` per observation."""
    n = sample.n
    return WeightedDf.from_points(sample.values, np.full(n, 1.0 / n))


@dataclass(frozen=True)
class DistributionSpec:
    """A parent population: normal, exponential (by mean) or logistic."""

    family: str
    params: tuple[float, ...]

    _ARITY = {"normal": 2, "exponential": 1, "logistic": 2}

    def __post_init__(self) -> None:
        family = self.family.lower()
        if family not in self._ARITY:
            raise ValueError(f"unknown family {self.family!r}")
        params = tuple(float(p) for p in self.params)
        if len(params) != self._ARITY[family]:
            raise ValueError(f"{family} takes {self._ARITY[family]} parameter(s)")
        if family == "exponential" and params[0] <= 0:
            raise ValueError("exponential mean must be > 0")
        if family in ("normal", "logistic") and params[1] <= 0:
            raise ValueError(f"{family} scale must be > 0")
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "params", params)

    @classmethod
    def normal(cls, mean: float = 0.0, sd: float = 1.0) -> "DistributionSpec":
        return cls("normal", (mean, sd))

    @classmethod
    def exponential(cls, mean: float = 1.0) -> "DistributionSpec":
        return cls("exponential", (mean,))

    @classmethod
    def logistic(cls, location: float = 0.0, scale: float = 1.0) -> "DistributionSpec":
        return cls("logistic", (location, scale))

    @property
    def mean(self) -> float:
        return self.params[0]

    def frozen(self):
        """The equivalent ``scipy.stats`` frozen distribution."""
        if self.family == "normal":
            return stats.norm(*self.params)
        if self.family == "exponential":
            return stats.expon(scale=self.params[0])
        return stats.logistic(*self.params)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.family == "normal":
            return rng.normal(self.params[0], self.params[1], size)
        if self.family == "exponential":
            return rng.exponential(self.params[0], size)
        return rng.logistic(self.params[0], self.params[1], size)

    def cdf(self, x):
        return self.frozen().cdf(x)

    def __str__(self) -> str:
        return f"{self.family}({','.join(f'{p:g}' for p in self.params)})"


@dataclass(frozen=True, eq=False)
class TiltWeights:
    """Solved exponential-tilting weights.

    Attributes
    ----------
    level : {"observation", "row"}
        Whether there is one weight per observation or one per rank row.
    weights : ndarray
        The tilted probabilities.
    lam : float
        Lagrange multiplier of the mean constraint.
    target : float
        The constrained mean.
    values : ndarray
        The quantities the constraint is applied to (observations or row
        means), kept so the constraint can be re-checked.
    """

    level: str
    weights: np.ndarray
    lam: float
    target: float
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.level not in ("observation", "row"):
            raise ValueError(f"unknown level {self.level!r}")
        w = np.asarray(self.weights, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if w.shape != v.shape:
            raise ValueError("weights and values differ in length")
        if np.any(w < 0) or np.any(w > 1):
            raise ValueError("weights must lie in [0, 1]")
        if abs(w.sum() - 1.0) > 1e-10:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        target = float(self.target)
        if abs(w @ v - target) > 1e-8 * (1.0 + abs(target)):
            raise ValueError(f"weighted mean {w @ v!r} misses target {target!r}")
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "values", _frozen(v))

    @property
    def tilted_mean(self) -> float:
        return float(self.weights @ self.values)

    def __len__(self) -> int:
        return len(self.weights)
