"""Monte Carlo size and power studies.

Each replication draws one ranked set sample and runs every requested
method on it. Replication ``i`` uses substream ``(i, 0)`` of the study seed
for the sample and ``(i, key)`` for a method's resampling, with ``key``
fixed per method, so a method sees the same data and the same random
numbers whichever other methods run alongside it, and results do not
depend on the number of worker processes.

Two decision modes exist:

``"size"``
    one-sided tests at level ``alpha`` (``StudyConfig.alternative``);
``"power"``
    two-sided decisions: PT/WT two-sided p-values, and for the bootstrap
    methods whether the ``1 - alpha`` percentile interval of
    ``mean* - mu0`` excludes zero.

The empirical-likelihood comparators use their chi-square p-values in both
modes.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import stats

from .core import NAMED_DESIGNS, Design, DistributionSpec, UrssSample, design_name
from .errors import RssTiltError
from .csvio import fmt
from .sampling import RngSeed, draw_urss, draw_urss_imperfect
from .stattests import (
    baklizi_test,
    et_bootstrap_test,
    liu_el_test,
    parametric_bootstrap_test,
    percentile_ci_decision,
    pt_test,
    wt_test,
)

# Substream key per method; never reorder.
METHOD_KEYS = {
    "PT": 1,
    "WT": 2,
    "EAT": 3,
    "EAR": 4,
    "PB": 5,
    "Baklizi": 6,
    "Liu": 7,
    "IEAT": 8,
    "IEAR": 9,
}
_CANONICAL = {m.upper(): m for m in METHOD_KEYS}


def canonical_method(name: str) -> str:
    try:
        return _CANONICAL[name.strip().upper()]
    except KeyError:
        raise ValueError(f"unknown method {name!r}; choose from {list(METHOD_KEYS)}") from None


@dataclass(frozen=True)
class StudyConfig:
    """One cell of a simulation table.

    ``dist`` is shifted so that the simulated population mean is
    ``mu0 + delta``. ``alternative`` is the tail used by size-mode tests;
    the lower tail is the default because for right-skewed parents it is
    the tail in which the normal approximation to ``T`` is liberal.
    """

    design: Design
    dist: DistributionSpec
    mu0: float
    delta: float = 0.0
    sigma_eps: float = 0.0
    methods: tuple[str, ...] = ("PT", "WT", "EAT", "EAR", "PB")
    B: int = 500
    replications: int = 2000
    alpha: float = 0.05
    seed: RngSeed = field(default_factory=lambda: RngSeed(0))
    alternative: str = "less"

    def __post_init__(self) -> None:
        object.__setattr__(self, "methods", tuple(canonical_method(m) for m in self.methods))
        if self.replications < 1 or self.B < 1:
            raise ValueError("replications and B must be >= 1")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha!r}")
        if self.sigma_eps < 0:
            raise ValueError("sigma_eps must be >= 0")
        if self.alternative not in ("greater", "less"):
            raise ValueError(f"alternative must be 'greater' or 'less', got {self.alternative!r}")

    @property
    def shift(self) -> float:
        return self.mu0 + self.delta - self.dist.mean

    def draw(self, i: int) -> UrssSample:
        """The sample of replication ``i``."""
        rng = self.seed.generator(i, 0)
        if self.sigma_eps > 0:
            sample = draw_urss_imperfect(self.dist, self.design, self.sigma_eps, rng)
        else:
            sample = draw_urss(self.dist, self.design, rng)
        return sample.shifted(self.shift) if self.shift != 0 else sample


@dataclass
class StudyResult:
    """Rejection rates per method, over successful replications only."""

    config: StudyConfig
    mode: str
    rejections: dict[str, int]
    successes: dict[str, int]
    failures: dict[str, int]
    p_values: dict[str, np.ndarray]

    @property
    def rates(self) -> dict[str, float]:
        return {
            m: (self.rejections[m] / self.successes[m] if self.successes[m] else math.nan)
            for m in self.config.methods
        }

    @property
    def se(self) -> dict[str, Optional[float]]:
        out: dict[str, Optional[float]] = {}
        for m, rate in self.rates.items():
            n = self.successes[m]
            out[m] = math.sqrt(rate * (1 - rate) / n) if n > 1 else None
        return out

    def rows(self) -> list[dict]:
        cfg = self.config
        rates, se = self.rates, self.se
        return [
            {
                "distribution": str(cfg.dist),
                "design": design_name(cfg.design),
                "sigma_eps": cfg.sigma_eps,
                "delta": cfg.delta,
                "method": m,
                "rate": rates[m],
                "se": se[m],
                "failures": self.failures[m],
                "R": cfg.replications,
                "B": cfg.B,
                "seed": cfg.seed.seed,
            }
            for m in cfg.methods
        ]


RESULT_COLUMNS = (
    "distribution", "design", "sigma_eps", "delta", "method",
    "rate", "se", "failures", "R", "B", "seed",
)


def _decide(config: StudyConfig, mode: str, method: str, sample: UrssSample, i: int):
    """Return ``(p_value or nan, reject)`` for one method on one sample."""
    rng = config.seed.generator(i, METHOD_KEYS[method])
    mu0, alpha, B = config.mu0, config.alpha, config.B
    base = method[1:] if method in ("IEAT", "IEAR") else method
    family = config.dist.family
    if base in ("PT", "WT"):
        test = pt_test if base == "PT" else wt_test
        alt = config.alternative if mode == "size" else "two-sided"
        p = test(sample, mu0, alt).p_value
        return p, p <= alpha
    if base in ("Baklizi", "Liu"):
        p = (baklizi_test if base == "Baklizi" else liu_el_test)(sample, mu0).p_value
        return p, p <= alpha
    if mode == "power":
        reject = percentile_ci_decision(sample, mu0, base, B, rng, level=1 - alpha, family=family)
        return math.nan, reject
    if base == "PB":
        p = parametric_bootstrap_test(sample, mu0, family, B, rng, config.alternative).p_value
    else:
        p = et_bootstrap_test(sample, mu0, base, B, rng, config.alternative).p_value
    return p, p <= alpha


def _run_chunk(args) -> list[dict[str, tuple[float, bool] | None]]:
    config, mode, start, stop = args
    out = []
    for i in range(start, stop):
        sample = config.draw(i)
        rec: dict[str, tuple[float, bool] | None] = {}
        for m in config.methods:
            try:
                rec[m] = _decide(config, mode, m, sample, i)
            except RssTiltError:
                rec[m] = None
        out.append(rec)
    return out


def default_workers() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)


def run_study(config: StudyConfig, mode: Optional[str] = None, threads: Optional[int] = None) -> StudyResult:
    """Run ``config.replications`` replications and tally rejections.

    ``mode`` defaults to ``"size"`` when ``delta == 0`` and ``"power"``
    otherwise. ``threads`` is the number of worker processes (default: all
    available cores); the result does not depend on it.
    """
    if mode is None:
        mode = "size" if config.delta == 0 else "power"
    if mode not in ("size", "power"):
        raise ValueError(f"mode must be 'size' or 'power', got {mode!r}")
    R = config.replications
    workers = default_workers() if threads is None else max(1, int(threads))
    workers = min(workers, R)
    if workers == 1:
        records = _run_chunk((config, mode, 0, R))
    else:
        step = max(1, math.ceil(R / (workers * 4)))
        chunks = [(config, mode, s, min(s + step, R)) for s in range(0, R, step)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = [rec for part in pool.map(_run_chunk, chunks) for rec in part]

    rejections = {m: 0 for m in config.methods}
    successes = {m: 0 for m in config.methods}
    failures = {m: 0 for m in config.methods}
    p_values = {m: np.full(R, np.nan) for m in config.methods}
    for i, rec in enumerate(records):
        for m in config.methods:
            outcome = rec[m]
            if outcome is None:
                failures[m] += 1
                continue
            p, reject = outcome
            successes[m] += 1
            rejections[m] += int(reject)
            p_values[m][i] = p
    return StudyResult(config, mode, rejections, successes, failures, p_values)


def run_size_study(config: StudyConfig, threads: Optional[int] = None) -> StudyResult:
    if config.delta != 0:
        raise ValueError("size studies need delta = 0")
    return run_study(config, "size", threads)


def run_power_study(config: StudyConfig, threads: Optional[int] = None) -> StudyResult:
    return run_study(config, "power", threads)


def run_imperfect_study(config: StudyConfig, threads: Optional[int] = None) -> StudyResult:
    """Size (``delta == 0``) or power study under judgment-ranking error."""
    if not config.sigma_eps > 0:
        raise ValueError("imperfect-ranking studies need sigma_eps > 0")
    return run_study(config, None, threads)


def qq_pvalues(config: StudyConfig, method: str, threads: Optional[int] = None) -> tuple[np.ndarray, np.ndarray]:
    """Sorted null p-values of ``method`` with uniform plotting positions.

    Failed replications are dropped, so both arrays have length
    ``replications - failures``.
    """
    if config.delta != 0:
        raise ValueError("Q-Q p-values need delta = 0")
    method = canonical_method(method)
    cfg = replace(config, methods=(method,))
    result = run_study(cfg, "size", threads)
    p = np.sort(result.p_values[method][~np.isnan(result.p_values[method])])
    positions = (np.arange(1, p.size + 1) - 0.5) / p.size
    return positions, p


def ks_to_uniform(p_values: Sequence[float]) -> float:
    """Kolmogorov-Smirnov distance of a sample to Uniform(0, 1)."""
    return float(stats.kstest(np.asarray(p_values, dtype=float), "uniform").statistic)


def ks_critical(n: int, level: float = 0.01) -> float:
    """Critical KS distance for a one-sample test of size ``level``."""
    return float(stats.kstwo.isf(level, n))


PAPER_POPULATIONS = {
    "normal": (DistributionSpec.normal(0.0, 1.0), 0.0),
    "exponential": (DistributionSpec.exponential(1.0), 1.0),
    "logistic": (DistributionSpec.logistic(1.0, 1.0), 1.0),
}


def paper_grid(seed: RngSeed, B: int = 500, replications: int = 2000) -> Iterable[tuple[str, StudyConfig]]:
    """Configurations for the size, power and imperfect-ranking tables.

    Yields ``(table_label, config)``: ``"size"`` (perfect ranking, five
    methods), ``"power"`` (shifts 0.1, 0.2, 0.3) and ``"imperfect"``
    (``sigma_eps`` in {0.5, 1}).
    """
    designs = [NAMED_DESIGNS[f"D{i}"] for i in range(1, 6)]
    common = dict(B=B, replications=replications, seed=seed)
    for dist, mu0 in PAPER_POPULATIONS.values():
        for d in designs:
            yield "size", StudyConfig(d, dist, mu0, **common)
    for delta in (0.1, 0.2, 0.3):
        for dist, mu0 in PAPER_POPULATIONS.values():
            for d in designs:
                yield "power", StudyConfig(d, dist, mu0, delta=delta, **common)
    for sigma in (0.5, 1.0):
        for dist, mu0 in PAPER_POPULATIONS.values():
            for d in designs:
                yield "imperfect", StudyConfig(
                    d, dist, mu0, sigma_eps=sigma,
                    methods=("PT", "EAT", "EAR", "IEAT", "IEAR"), **common,
                )


def results_csv(results: Iterable[StudyResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS)
    for res in results:
        for row in res.rows():
            writer.writerow([fmt(row[c]) for c in RESULT_COLUMNS])
    return buf.getvalue()


def config_dict(config: StudyConfig) -> dict:
    d = asdict(config)
    d["design"] = str(config.design)
    d["dist"] = str(config.dist)
    d["seed"] = f"{config.seed.seed}:{config.seed.stream_id}"
    d["methods"] = ",".join(config.methods)
    return d
