import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from rsstilt.core import TiltWeights, UrssSample, edf
from rsstilt.errors import DegenerateValues, RowTooSmall, TargetOutOfRange, WeightMismatch
from rsstilt.tilting import (
    REL_TOL,
    TiltProblem,
    ear_weights,
    eat_weights,
    et_df_ear,
    et_df_eat,
    et_variance,
    row_et_weights,
    solve_lambda,
)


# --- worked examples --------------------------------------------------------

def test_lambda_zero_at_base_mean():
    assert solve_lambda(TiltProblem.uniform([1, 2, 3], 2.0)) == 0.0


def test_lambda_logit_closed_form():
    lam = solve_lambda(TiltProblem.uniform([0, 1], 0.75))
    assert lam == pytest.approx(math.log(3), rel=1e-12)


@pytest.mark.parametrize("target", [1.0, 0.0, -0.5, 2.0])
def test_target_on_or_outside_hull(target):
    with pytest.raises(TargetOutOfRange):
        solve_lambda(TiltProblem.uniform([0, 1], target))


def test_degenerate_values():
    with pytest.raises(DegenerateValues):
        solve_lambda(TiltProblem.uniform([2, 2, 2], 2.0))


def test_problem_validation():
    with pytest.raises(WeightMismatch):
        TiltProblem([1.0], [1.0], 1.0)
    with pytest.raises(WeightMismatch):
        TiltProblem([1.0, 2.0], [0.3, 0.3], 1.5)
    with pytest.raises(WeightMismatch):
        TiltProblem([1.0, 2.0, 3.0], [0.5, 0.5], 1.5)


def test_eat_examples():
    s = UrssSample([[1, 3], [2, 6]])
    w = eat_weights(s, 3.0)
    assert w.lam == 0.0
    np.testing.assert_array_equal(w.weights, [0.25] * 4)
    w = eat_weights(UrssSample([[0], [1]]), 0.75)
    np.testing.assert_allclose(w.weights, [0.25, 0.75], rtol=1e-12)
    with pytest.raises(TargetOutOfRange):
        eat_weights(s, 7.0)


def test_eat_default_target_is_uniform():
    s = UrssSample([[1, 1, 1, 1], [5]])
    np.testing.assert_array_equal(eat_weights(s).weights, [0.2] * 5)


def test_ear_examples():
    w = ear_weights(UrssSample([[1, 3], [2, 6]]), 3.0)
    np.testing.assert_array_equal(w.weights, [0.5, 0.5])
    assert w.lam == 0.0
    w = ear_weights(UrssSample([[0], [1]]), 0.75)
    np.testing.assert_allclose(w.weights, [0.25, 0.75], rtol=1e-12)


def test_ear_unbalanced_default_target():
    s = UrssSample([[1, 1, 1, 1], [5]])
    w = ear_weights(s)
    assert w.target == pytest.approx(1.8)
    np.testing.assert_allclose(w.weights, [0.8, 0.2], rtol=1e-12)
    assert w.lam == pytest.approx(math.log(0.25) / 4, rel=1e-12)
    assert w.level == "row"


def test_ear_range_is_row_means():
    # 0.5 is inside the value range but outside the row-mean range [1, 2]
    s = UrssSample([[0, 2], [1, 3]])
    eat_weights(s, 0.5)
    with pytest.raises(TargetOutOfRange):
        ear_weights(s, 0.5)


def test_row_et_examples():
    s = UrssSample([[2, 4], [0, 1], [5]])
    np.testing.assert_allclose(row_et_weights(s, 0, 3.0).weights, [0.5, 0.5])
    w = row_et_weights(s, 1, 0.25)
    np.testing.assert_allclose(w.weights, [0.75, 0.25], rtol=1e-12)
    assert w.lam == pytest.approx(math.log(1 / 3), rel=1e-12)
    with pytest.raises(RowTooSmall):
        row_et_weights(s, 2, 5.0)


def test_et_df_eat_examples():
    s = UrssSample([[0, 2], [4, 6, 8]])
    df = et_df_eat(s, eat_weights(s))
    assert df.atoms == edf(s).atoms
    s = UrssSample([[0], [1]])
    df = et_df_eat(s, eat_weights(s, 0.75))
    assert df(0) == pytest.approx(0.25)
    assert df(1) == 1.0
    assert df(-1) == 0.0


def test_et_df_ear_examples():
    s = UrssSample([[1, 2], [3, 4]])
    assert et_df_ear(s, ear_weights(s, s.rss_mean)).atoms == edf(s).atoms
    s = UrssSample([[1, 1], [9]])
    w = TiltWeights("row", np.array([0.5, 0.5]), 0.0, 5.0, s.row_means)
    df = et_df_ear(s, w)
    assert df.atoms == [(1.0, 0.5), (9.0, 0.5)]
    assert df.probs.sum() == pytest.approx(1.0, abs=1e-15)


def test_et_df_ear_rejects_observation_weights():
    s = UrssSample([[1, 2], [3, 4]])
    with pytest.raises(WeightMismatch):
        et_df_ear(s, eat_weights(s))


def test_et_variance_examples():
    s = UrssSample([[3, 3], [3]])
    w = TiltWeights("observation", np.full(3, 1 / 3), 0.0, 3.0, s.values)
    assert et_variance(s, w) == 0.0
    s = UrssSample([[0], [2]])
    assert et_variance(s, eat_weights(s)) == pytest.approx(1.0, rel=1e-12)
    s = UrssSample([[0], [1]])
    assert et_variance(s, eat_weights(s, 0.75)) == pytest.approx(0.25, rel=1e-12)


# --- properties ---------------------------------------------------------------

def _random_problem(rng):
    n = int(rng.integers(2, 40))
    scale = 10.0 ** rng.uniform(-3, 3)
    values = rng.normal(rng.uniform(-50, 50), scale, n)
    if rng.random() < 0.3:
        values = np.round(values, 1)  # ties
    if values.min() == values.max():
        values[0] += scale
    lo, hi = values.min(), values.max()
    target = lo + rng.uniform(0.001, 0.999) * (hi - lo)
    if rng.random() < 0.5:
        base = np.full(n, 1.0 / n)
    else:
        base = rng.dirichlet(np.ones(n)) * 0.99 + 0.01 / n
        base /= base.sum()
    return TiltProblem(values, base, target)


def test_residual_on_random_problems():
    rng = np.random.default_rng(20240501)
    for _ in range(1000):
        prob = _random_problem(rng)
        lam = solve_lambda(prob)
        p = prob.weights(lam)
        assert abs(p.sum() - 1) <= 1e-10
        assert np.all(p >= 0) and np.all(p <= 1)
        resid = abs(p @ prob.values - prob.target)
        assert resid <= REL_TOL * (1 + abs(prob.target))
        assert resid <= 1e-8


def _grid_lambda(values, target, step=1e-6):
    """Brute-force root of the tilted-mean equation on a grid."""
    v = np.asarray(values, dtype=float)

    def g(lams):
        e = np.exp(np.outer(lams, v))
        return (e @ v) / e.sum(axis=1) - target

    coarse = np.arange(-64.0, 64.0 + 1e-9, 1e-2)
    gc = g(coarse)
    i = int(np.flatnonzero(gc >= 0)[0])
    fine = np.arange(coarse[i - 1], coarse[i] + step, step)
    gf = g(fine)
    j = int(np.argmin(np.abs(gf)))
    return fine[j]


def test_grid_search_oracle():
    rng = np.random.default_rng(77)
    for _ in range(40):
        n = int(rng.integers(2, 6))
        v = rng.uniform(0, 1, n)
        lo, hi = v.min(), v.max()
        target = lo + rng.uniform(0.1, 0.9) * (hi - lo)
        lam = solve_lambda(TiltProblem.uniform(v, target))
        assert abs(lam) < 60
        assert lam == pytest.approx(_grid_lambda(v, target), abs=1e-5)


def test_monotone_in_target():
    rng = np.random.default_rng(5)
    for _ in range(20):
        v = rng.normal(size=int(rng.integers(2, 10)))
        targets = np.linspace(v.min(), v.max(), 52)[1:-1]
        lams = [solve_lambda(TiltProblem.uniform(v, t)) for t in targets]
        assert np.all(np.diff(lams) > 0)


@given(
    st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=12),
    st.floats(0.01, 0.99),
)
@settings(max_examples=200, deadline=None)
def test_sign_of_lambda(values, frac):
    v = np.asarray(values)
    assume(v.max() - v.min() > 1e-6 * (1 + np.abs(v).max()))
    prob = TiltProblem.uniform(v, v.min() + frac * (v.max() - v.min()))
    lam = solve_lambda(prob)
    tol = REL_TOL * (1 + abs(prob.target))
    if prob.target > prob.base_mean + tol:
        assert lam > 0
    elif prob.target < prob.base_mean - tol:
        assert lam < 0
    else:
        assert lam == 0.0


def test_lambda_zero_iff_base_mean():
    rng = np.random.default_rng(9)
    for _ in range(200):
        v = rng.normal(size=int(rng.integers(2, 20)))
        base = rng.dirichlet(np.ones(v.size))
        assert solve_lambda(TiltProblem(v, base, float(base @ v))) == 0.0
        off = float(base @ v) + 1e-3 * np.ptp(v)
        if off < v.max():
            assert solve_lambda(TiltProblem(v, base, off)) != 0.0


@given(
    st.lists(st.floats(-10, 10, allow_nan=False), min_size=2, max_size=12),
    st.floats(0.05, 0.95),
    st.floats(-100, 100, allow_nan=False),
)
@settings(max_examples=200, deadline=None)
def test_shift_invariance(values, frac, c):
    v = np.asarray(values)
    assume(np.ptp(v) > 1e-3)
    t = v.min() + frac * np.ptp(v)
    p1 = TiltProblem.uniform(v, t)
    p2 = TiltProblem.uniform(v + c, t + c)
    w1 = p1.weights(solve_lambda(p1))
    w2 = p2.weights(solve_lambda(p2))
    np.testing.assert_allclose(w1, w2, rtol=0, atol=1e-12)


@given(
    st.lists(st.floats(-10, 10, allow_nan=False), min_size=2, max_size=12),
    st.floats(0.05, 0.95),
    st.floats(0.01, 100),
)
@settings(max_examples=200, deadline=None)
def test_scale_invariance(values, frac, c):
    v = np.asarray(values)
    assume(np.ptp(v) > 1e-3)
    t = v.min() + frac * np.ptp(v)
    p1 = TiltProblem.uniform(v, t)
    p2 = TiltProblem.uniform(v * c, t * c)
    lam1, lam2 = solve_lambda(p1), solve_lambda(p2)
    np.testing.assert_allclose(p1.weights(lam1), p2.weights(lam2), rtol=0, atol=1e-12)
    assert lam2 == pytest.approx(lam1 / c, rel=1e-9, abs=1e-12)


def test_extreme_lambda_is_stable():
    # target very close to the max forces a large multiplier
    v = np.array([0.0, 1.0, 2.0, 1000.0])
    prob = TiltProblem.uniform(v, 999.9)
    lam = solve_lambda(prob)
    p = prob.weights(lam)
    assert np.all(np.isfinite(p))
    assert p @ v == pytest.approx(999.9, abs=1e-7)


def test_log_normalizer_derivative_is_tilted_mean():
    prob = TiltProblem.uniform([0.3, 1.7, 2.2, 5.0], 2.0)
    h = 1e-6
    for lam in (-3.0, 0.0, 0.4, 2.0):
        deriv = (prob.log_normalizer(lam + h) - prob.log_normalizer(lam - h)) / (2 * h)
        assert deriv == pytest.approx(prob.tilted_mean(lam), rel=1e-7)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_weights_satisfy_constraints(seed):
    rng = np.random.default_rng(seed)
    counts = rng.integers(1, 6, size=int(rng.integers(2, 6)))
    s = UrssSample([rng.normal(size=c) for c in counts])
    mu = s.values.min() + rng.uniform(0.05, 0.95) * np.ptp(s.values)
    w = eat_weights(s, mu)
    assert abs(w.weights.sum() - 1) <= 1e-10
    assert abs(w.weights @ s.values - mu) <= 1e-8
    df = et_df_eat(s, w)
    assert df.mean == pytest.approx(mu, abs=1e-8)
    rm = s.row_means
    if np.ptp(rm) > 0:
        target = rm.min() + rng.uniform(0.05, 0.95) * np.ptp(rm)
        wr = ear_weights(s, target)
        assert abs(wr.weights @ rm - target) <= 1e-8
        # the ear DF has the same mean as the row-mean constraint
        assert et_df_ear(s, wr).mean == pytest.approx(target, abs=1e-8)
