"""Acceptance criteria, each at its stated tolerance.

Every check appends one PASS/FAIL line, printed in the pytest terminal
summary. The Monte Carlo criteria use the full R=2000, B=500 settings and a
single seed fixed in advance; they take a couple of minutes on one core.
"""

import itertools
import math

import numpy as np
import pytest
from scipy import stats

from conftest import ACCEPTANCE_LINES
from rsstilt.core import NAMED_DESIGNS, Design, DistributionSpec, UrssSample
from rsstilt.montecarlo import (
    StudyConfig,
    ks_critical,
    ks_to_uniform,
    run_imperfect_study,
    run_power_study,
    run_size_study,
)
from rsstilt.resampling import bootstrap_eat
from rsstilt.sampling import MisrankMatrix, RngSeed, dell_clutter_pairs, draw_urss_matrix
from rsstilt.stattests import baklizi_test, el_mean_statistic, pt_statistic, welch_df
from rsstilt.tilting import REL_TOL, TiltProblem, eat_weights, solve_lambda

SEED = RngSeed(1017)
R, B = 2000, 500
NORMAL = DistributionSpec.normal(0.0, 1.0)
EXPO = DistributionSpec.exponential(1.0)
D1 = NAMED_DESIGNS["D1"]


def check(criterion, label, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def check_rates(criterion, result, targets, tol):
    ok = True
    for method, target in targets.items():
        rate = result.rates[method]
        good = abs(rate - target) <= tol
        detail = (
            f"{method} rate {rate:.4f} vs {target:.3f} +/- {tol} "
            f"(se {result.se[method]:.4f}, failures {result.failures[method]})"
        )
        ok &= check(criterion, "rate", good, detail)
    return ok


# --- 1-5: Monte Carlo reproductions -----------------------------------------

@pytest.fixture(scope="module")
def normal_size():
    cfg = StudyConfig(D1, NORMAL, 0.0, methods=("PT", "WT", "EAT", "EAR", "PB"),
                      B=B, replications=R, seed=SEED)
    return run_size_study(cfg)


@pytest.mark.slow
def test_c1_normal_size(normal_size):
    targets = {"PT": 0.062, "WT": 0.041, "EAT": 0.056, "EAR": 0.052, "PB": 0.050}
    assert check_rates(1, normal_size, targets, 0.015)


@pytest.mark.slow
@pytest.mark.parametrize("method", ["EAT", "EAR"])
def test_bootstrap_p_values_uniform_under_null(normal_size, method):
    p = normal_size.p_values[method]
    p = p[~np.isnan(p)]
    ks, crit = ks_to_uniform(p), ks_critical(p.size)
    assert check("1/p-values", f"{method} KS to uniform", ks < crit, f"{ks:.4f} < {crit:.4f}")


@pytest.mark.slow
def test_c2_exponential_size():
    cfg = StudyConfig(D1, EXPO, 1.0, methods=("PT", "EAR"), B=B, replications=R, seed=SEED)
    res = run_size_study(cfg)
    ok = check_rates(2, res, {"PT": 0.107}, 0.02)
    ok &= check(2, "PT liberal", res.rates["PT"] > 0.08, f"PT rate {res.rates['PT']:.4f} > 0.08")
    ok &= check_rates(2, res, {"EAR": 0.080}, 0.015)
    assert ok


@pytest.mark.slow
def test_c3_power():
    cfg = StudyConfig(D1, NORMAL, 0.0, delta=0.3, methods=("PT", "EAT", "EAR", "PB"),
                      B=B, replications=R, seed=SEED)
    res = run_power_study(cfg)
    targets = {"PT": 0.696, "EAT": 0.698, "EAR": 0.684, "PB": 0.694}
    assert check_rates(3, res, targets, 0.03)


@pytest.mark.slow
def test_c4_imperfect_size():
    cfg = StudyConfig(D1, NORMAL, 0.0, sigma_eps=0.5, methods=("PT", "EAT", "EAR"),
                      B=B, replications=R, seed=SEED)
    res = run_imperfect_study(cfg)
    assert check_rates(4, res, {"PT": 0.056, "EAT": 0.054, "EAR": 0.054}, 0.015)


@pytest.mark.parametrize("sigma, expected", [(0.5, 0.894), (1.0, 0.707)])
def test_c4_judgment_correlation(sigma, expected):
    x, y = dell_clutter_pairs(NORMAL, sigma, 100_000, SEED)
    rho = float(np.corrcoef(x, y)[0, 1])
    assert check(4, f"corr(X, X+eps) at sigma={sigma}", abs(rho - expected) <= 0.01,
                 f"{rho:.4f} vs {expected} +/- 0.01")


@pytest.mark.slow
def test_c5_small_design_qq():
    cfg = StudyConfig(NAMED_DESIGNS["D6"], NORMAL, 0.0, methods=("EAR", "Liu"),
                      B=B, replications=R, seed=SEED)
    res = run_size_study(cfg)
    p_ear = res.p_values["EAR"][~np.isnan(res.p_values["EAR"])]
    p_liu = res.p_values["Liu"][~np.isnan(res.p_values["Liu"])]
    ks_ear, ks_liu = ks_to_uniform(p_ear), ks_to_uniform(p_liu)
    crit = ks_critical(p_ear.size)
    ok = check(5, "EAR KS below critical", ks_ear < crit, f"{ks_ear:.4f} < {crit:.4f}")
    ok &= check(5, "EAR KS below Liu KS", ks_ear < ks_liu, f"{ks_ear:.4f} < {ks_liu:.4f}")
    assert ok


# --- 6: property suite ------------------------------------------------------------

def test_c6_random_tilting_problems():
    rng = np.random.default_rng(6001)
    worst_sum = worst_resid = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 30))
        v = rng.normal(rng.uniform(-20, 20), 10 ** rng.uniform(-2, 2), n)
        t = v.min() + rng.uniform(0.01, 0.99) * np.ptp(v)
        prob = TiltProblem.uniform(v, t)
        p = prob.weights(solve_lambda(prob))
        worst_sum = max(worst_sum, abs(p.sum() - 1))
        worst_resid = max(worst_resid, abs(p @ v - t))
    ok = worst_sum <= 1e-8 and worst_resid <= 1e-8
    assert check(6, "normalisation and residual on 1000 problems", ok,
                 f"max |sum-1| {worst_sum:.2e}, max residual {worst_resid:.2e} <= 1e-8")


def _grid_lambda(v, t, step=1e-6):
    def g(lams):
        e = np.exp(np.outer(lams, v))
        return (e @ v) / e.sum(axis=1) - t

    coarse = np.arange(-64.0, 64.0 + 1e-9, 1e-2)
    i = int(np.flatnonzero(g(coarse) >= 0)[0])
    fine = np.arange(coarse[i - 1], coarse[i] + step, step)
    return fine[int(np.argmin(np.abs(g(fine))))]


def test_c6_grid_oracle():
    rng = np.random.default_rng(6002)
    worst = 0.0
    for _ in range(25):
        v = rng.uniform(0, 1, int(rng.integers(2, 6)))
        t = v.min() + rng.uniform(0.1, 0.9) * np.ptp(v)
        worst = max(worst, abs(solve_lambda(TiltProblem.uniform(v, t)) - _grid_lambda(v, t)))
    assert check(6, "grid-search oracle", worst <= 1e-5, f"max |dlambda| {worst:.2e} <= 1e-5")


def test_c6_lambda_zero_iff_base_mean():
    rng = np.random.default_rng(6003)
    ok = True
    for _ in range(200):
        v = rng.normal(size=int(rng.integers(2, 15)))
        base = rng.dirichlet(np.ones(v.size))
        ok &= solve_lambda(TiltProblem(v, base, float(base @ v))) == 0.0
        t = float(base @ v) + 0.01 * np.ptp(v)
        if t < v.max():
            ok &= solve_lambda(TiltProblem(v, base, t)) > 0
    assert check(6, "lambda = 0 iff target = base mean", ok, "200 problems")


def test_c6_shift_invariance():
    rng = np.random.default_rng(6004)
    worst_w = worst_t = 0.0
    for _ in range(200):
        rows = [rng.normal(size=m) for m in (3, 2, 4, 3)]
        s = UrssSample(rows)
        c = float(rng.uniform(-100, 100))
        mu = s.values.min() + rng.uniform(0.1, 0.9) * np.ptp(s.values)
        w1 = eat_weights(s, mu).weights
        w2 = eat_weights(s.shifted(c), mu + c).weights
        worst_w = max(worst_w, float(np.abs(w1 - w2).max()))
        t1 = pt_statistic(s, mu)
        worst_t = max(worst_t, abs(pt_statistic(s.shifted(c), mu + c) - t1) / max(1.0, abs(t1)))
    ok = worst_w <= 1e-12 and worst_t <= 1e-12
    assert check(6, "location-shift invariance", ok,
                 f"weights {worst_w:.1e}, T {worst_t:.1e} <= 1e-12")


def test_c6_eat_enumeration():
    s = UrssSample([[0.0, 2.0], [1.0]])
    w = eat_weights(s, 1.3)
    batch = bootstrap_eat(s, w, 100_000, SEED)
    worst = 0.0
    for slot, r in enumerate(s.design.ranks):
        law: dict[float, float] = {}
        for combo in itertools.product(range(s.n), repeat=s.k):
            v = sorted(s.values[i] for i in combo)[r]
            law[v] = law.get(v, 0.0) + float(np.prod(w.weights[list(combo)]))
        col = batch.values[:, slot]
        tv = 0.5 * sum(abs(np.mean(col == v) - p) for v, p in law.items())
        worst = max(worst, tv)
    assert check(6, "EAT law vs exact enumeration", worst < 0.01, f"max TV {worst:.4f} < 0.01")


def test_c6_pooled_mixture_identity():
    p = np.array([[0.6, 0.3, 0.1], [0.3, 0.4, 0.3], [0.1, 0.3, 0.6]])
    s = draw_urss_matrix(NORMAL, Design((3334,) * 3), MisrankMatrix(p), SEED)
    ks = float(stats.kstest(s.values, "norm").statistic)
    crit = ks_critical(s.n)
    assert check(6, "doubly stochastic pooled mixture", ks < crit, f"KS {ks:.4f} < {crit:.4f}")


def test_c6_thread_determinism():
    cfg = StudyConfig(NAMED_DESIGNS["D2"], EXPO, 1.0, methods=("PT", "EAT", "EAR", "PB"),
                      B=50, replications=16, seed=SEED)
    a = run_size_study(cfg, threads=1)
    b = run_size_study(cfg, threads=3)
    same = a.rejections == b.rejections and all(
        np.array_equal(a.p_values[m], b.p_values[m], equal_nan=True) for m in cfg.methods
    )
    assert check(6, "determinism across worker counts", same, "1 vs 3 workers")


# --- 7: hand-arithmetic oracles ----------------------------------------------

def _rel(a, b):
    return abs(a - b) / abs(b) if b else abs(a)


def test_c7_hand_oracles():
    s = UrssSample([[1, 3], [2, 6]])
    errs = {
        "pt_statistic(mu0=2)": _rel(pt_statistic(s, 2.0), 1 / math.sqrt(1.25)),
        "pt_statistic(mu0=3)": abs(pt_statistic(s, 3.0)),
        "welch df": _rel(welch_df(s), 25 / 17),
        "welch df equal variances": _rel(welch_df(UrssSample([[0, 1, 2], [5, 6, 7]])), 4.0),
        "Baklizi l(mu0=3)": abs(baklizi_test(s, 3.0).statistic),
        "two-point EL": _rel(el_mean_statistic(np.array([0.0, 1.0]), 0.75)[0],
                             -2 * (math.log(0.5) + math.log(1.5))),
    }
    ok = True
    for name, err in errs.items():
        ok &= check(7, name, err <= 1e-12, f"relative error {err:.1e} <= 1e-12")
    assert ok
