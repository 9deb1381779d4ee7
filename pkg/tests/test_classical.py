import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from conftest import random_binary
from fsbench.data import from_arrays
from fsbench.errors import BudgetTooSmall, NoFeatureSurvives, TooFewSamples, ZeroTotalVariance
from fsbench.selection import SCORE_SENTINEL
from fsbench.selectors import classical as C
from fsbench.synthetic import make_planted


def _scores(fn, X, y):
    return fn(from_arrays(X, y)).scores


# ---------------------------------------------------------------------------
# filters against the loop oracles

def test_filters_match_oracles_64x8():
    rng = np.random.default_rng(1)
    for _ in range(100):
        X, y = random_binary(rng, 64, 8, rate=rng.uniform(0.1, 0.9))
        ig = _scores(C.score_info_gain, X, y)
        for j in range(8):
            assert ig[j] == pytest.approx(oracles.mutual_information_bits(X[:, j], y), abs=1e-9)


def test_chi_square_examples():
    y = np.array([1, 1, 0, 0])
    assert _scores(C.score_chi_square, y[:, None], y)[0] == pytest.approx(4.0)
    indep = np.array([1, 0, 1, 0])
    assert _scores(C.score_chi_square, indep[:, None], y)[0] == pytest.approx(0.0)
    assert _scores(C.score_chi_square, np.ones((4, 1)), y)[0] == 0.0


def test_info_gain_examples():
    y = np.array([1, 1, 0, 0])
    assert _scores(C.score_info_gain, y[:, None], y)[0] == pytest.approx(1.0)
    assert _scores(C.score_info_gain, np.array([[1], [0], [1], [0]]), y)[0] == pytest.approx(0.0)


def test_mad_examples():
    y = np.array([1, 1, 0, 0])
    assert _scores(C.score_mad, np.array([[0], [0], [1], [1]]), y)[0] == pytest.approx(0.5)
    assert _scores(C.score_mad, np.ones((4, 1)), y)[0] == 0.0
    rng = np.random.default_rng(2)
    for _ in range(50):
        p = rng.uniform(0.05, 0.95)
        col = (rng.random(80) < p).astype(float)
        rate = col.mean()
        assert C.mean_abs_deviation(col[:, None])[0] == pytest.approx(2 * rate * (1 - rate), abs=1e-12)


def test_pearson_examples():
    y = np.array([1, 1, 0, 0])
    assert _scores(C.score_pearson, y[:, None], y)[0] == pytest.approx(1.0)
    assert _scores(C.score_pearson, (1 - y)[:, None], y)[0] == pytest.approx(1.0)
    assert _scores(C.score_pearson, np.array([[1], [0], [1], [0]]), np.array([1, 1, 0, 0]))[0] == pytest.approx(0.0)
    assert _scores(C.score_pearson, np.ones((4, 1)), y)[0] == 0.0


def test_anova_examples():
    # class 0 values {0, 1}, class 1 values {1, 1}
    X = np.array([[0.0], [1.0], [1.0], [1.0]])
    y = np.array([0, 0, 1, 1])
    F, p = C.anova_f(X, y.astype(float))
    assert F[0] == pytest.approx(1.0)
    assert F[0] == pytest.approx(oracles.anova_f(X[:, 0], y))
    equal = np.array([[0.0], [1.0], [0.0], [1.0]])
    sel, _ = C.select_anova(from_arrays(np.hstack([equal, y[:, None]]), y))
    assert 0 not in sel
    Fs, ps = C.anova_f(y[:, None].astype(float), y.astype(float))
    assert Fs[0] == SCORE_SENTINEL and ps[0] == 0.0
    assert 1 in sel
    with pytest.raises(TooFewSamples):
        C.anova_f(np.zeros((2, 1)), np.array([0.0, 1.0]))


def test_anova_matches_scipy():
    from scipy.stats import f_oneway

    rng = np.random.default_rng(3)
    X, y = random_binary(rng, 50, 6)
    F, p = C.anova_f(X, y.astype(float))
    for j in range(6):
        ref = f_oneway(X[y == 0, j], X[y == 1, j])
        if np.isfinite(ref.statistic):
            assert F[j] == pytest.approx(ref.statistic, rel=1e-9)
            assert p[j] == pytest.approx(ref.pvalue, rel=1e-7)


def test_filter_scores_non_negative_and_row_permutation_invariant():
    rng = np.random.default_rng(4)
    X, y = random_binary(rng, 40, 10)
    perm = rng.permutation(40)
    for fn in (C.score_chi_square, C.score_info_gain, C.score_mad, C.score_pearson, C.score_anova_f):
        a = _scores(fn, X, y)
        b = _scores(fn, X[perm], y[perm])
        assert np.all(a >= 0)
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


# ---------------------------------------------------------------------------
# ReliefF

def test_relieff_examples():
    y = np.array([1, 1, 1, 1, 0, 0, 0, 0])
    noise = np.array([1, 0, 1, 0, 1, 0, 0, 1])
    X = np.column_stack([y, np.ones(8), noise])
    w = C.score_relieff(from_arrays(X, y), k_neighbors=2).scores
    assert w[0] > 0
    assert w[1] == 0.0
    assert w[0] > w[2]


def test_relieff_small_class_shrinks_k(caplog):
    y = np.array([1, 1, 0, 0, 0, 0])
    X = np.column_stack([y, [0, 1, 0, 1, 0, 1]])
    w = C.score_relieff(from_arrays(X, y), k_neighbors=10).scores
    assert np.all(np.isfinite(w))
    assert "too small" in caplog.text


@given(st.integers(0, 2**31))
def test_relieff_invariant_to_column_order_and_bit_flips(seed):
    rng = np.random.default_rng(seed)
    X, y = random_binary(rng, 30, 5)
    d = from_arrays(X, y)
    w = C.score_relieff(d, seed=1, k_neighbors=3, sample_size=30).scores
    perm = rng.permutation(5)
    wp = C.score_relieff(from_arrays(X[:, perm], y), seed=1, k_neighbors=3, sample_size=30).scores
    np.testing.assert_allclose(wp, w[perm], atol=1e-12)
    flipped = X.copy()
    flipped[:, 2] = 1 - flipped[:, 2]
    wf = C.score_relieff(from_arrays(flipped, y), seed=1, k_neighbors=3, sample_size=30).scores
    np.testing.assert_allclose(wf, w, atol=1e-12)


# ---------------------------------------------------------------------------
# RFE

def test_rfe_ranking_is_permutation(planted):
    d, _ = planted
    s = C.score_rfe(d.take_columns(range(12))).scores
    assert sorted(s.astype(int).tolist()) == list(range(1, 13))
    one = C.score_rfe(d.take_columns([0])).scores
    assert one.tolist() == [1.0]


@pytest.mark.slow
def test_rfe_drops_noise_first():
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        y = (rng.random(200) < 0.5).astype(np.int64)
        info = np.column_stack([np.where(rng.random(200) < 0.1, 1 - y, y) for _ in range(3)])
        X = np.column_stack([info, rng.random(200) < 0.5])
        s = C.score_rfe(from_arrays(X, y), seed=seed).scores
        hits += s[3] == 1.0
    assert hits >= 95


# ---------------------------------------------------------------------------
# LASSO and linear regression

def _single_feature(rho, n=40, seed=0):
    rng = np.random.default_rng(seed)
    x = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)  # mean 0, unit variance
    rng.shuffle(x)
    return x[:, None], rho * x + 0.3  # intercept is absorbed by b0


@pytest.mark.parametrize("lam", [0.0, 0.1, 0.5, 1.9, 2.1])
def test_lasso_soft_threshold(lam):
    X, y = _single_feature(2.0)
    beta, b0 = C.fit_lasso(X, y, lam)
    assert beta[0] == pytest.approx(oracles.soft_threshold(2.0, lam), abs=1e-6)
    assert b0 == pytest.approx(0.3)
    if lam > 2.0:
        with pytest.raises(NoFeatureSurvives):
            C.lasso_support(beta, lam)


def test_lasso_lambda_zero_is_least_squares():
    rng = np.random.default_rng(5)
    X = rng.random((80, 4))
    y = X @ [1.0, -2.0, 0.5, 0.0] + 0.1 * rng.standard_normal(80)
    beta, b0 = C.fit_lasso(X, y, 0.0, tol=1e-12, max_sweeps=10000)
    Z, _ = C.standardize(X)
    ref, *_ = np.linalg.lstsq(np.column_stack([Z, np.ones(80)]), y, rcond=None)
    np.testing.assert_allclose(beta, ref[:4], atol=1e-6)


def test_lasso_zero_column_excluded(toy):
    sel, _ = C.select_lasso(toy, lam=0.01)
    assert 2 not in sel  # the constant column


@given(st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_lasso_support_monotone_in_lambda(l1, l2):
    lo, hi = sorted((l1, l2))
    rng = np.random.default_rng(0)
    # orthogonal +-1 columns (Hadamard rows)
    H = np.array([[1, 1, 1, 1], [1, -1, 1, -1], [1, 1, -1, -1], [1, -1, -1, 1]], dtype=float)
    X = np.repeat(H[:, 1:], 5, axis=0)
    y = X @ [2.5, 1.0, 0.2] + rng.standard_normal(20) * 0.0
    b_hi, _ = C.fit_lasso(X, y, hi)
    b_lo, _ = C.fit_lasso(X, y, lo)
    assert set(np.flatnonzero(b_hi)) <= set(np.flatnonzero(b_lo))


def test_linear_regression_examples():
    rng = np.random.default_rng(6)
    y = (rng.random(100) < 0.5).astype(int)
    noise = (rng.random((100, 5)) < 0.5).astype(float)
    sel, _ = C.select_linear_regression(from_arrays(np.column_stack([y, noise]), y))
    assert 0 in sel
    twin, _ = C.select_linear_regression(from_arrays(np.column_stack([y, y, noise]), y))
    assert 0 in twin or 1 in twin
    only_noise, _ = C.select_linear_regression(from_arrays(noise, y))
    assert len(only_noise) >= 1


# ---------------------------------------------------------------------------
# PCA

def test_pca_examples():
    a = np.array([0, 1, 0, 1, 1, 0], dtype=float)
    X = np.column_stack([a, a, np.ones(6)])
    rel, m, evals = C.pca_relevance(X)
    assert m == 1
    assert evals[0] / evals.sum() == pytest.approx(1.0)
    assert rel[2] == pytest.approx(0.0, abs=1e-12)
    rng = np.random.default_rng(7)
    Y = rng.random((50, 5))
    _, _, ev = C.pca_relevance(Y)
    assert ev.sum() == pytest.approx(np.trace(np.cov(Y, rowvar=False, bias=True)), abs=1e-9)
    with pytest.raises(ZeroTotalVariance):
        C.pca_relevance(np.ones((5, 3)))


def test_pca_identity_covariance_ties_by_index():
    H = np.array([[1, 1, 1, 1], [1, -1, 1, -1], [1, 1, -1, -1], [1, -1, -1, 1]], dtype=float)
    X = H[:, 1:]  # three orthogonal columns with equal variance
    sel, ranking = C.select_pca(from_arrays(X, [1, 0, 1, 0]))
    np.testing.assert_allclose(ranking.scores, ranking.scores[0])
    assert list(sel) == list(range(len(sel)))


# ---------------------------------------------------------------------------
# ABC

def test_abc_single_feature():
    d = from_arrays([[1], [0], [1], [0], [1], [0]], [1, 0, 1, 0, 1, 0])
    sel, _ = C.select_abc(d, colony=4, iterations=2)
    assert sel == [0]


def test_abc_budget_errors(toy):
    with pytest.raises(BudgetTooSmall):
        C.abc_search(toy, colony=1)
    with pytest.raises(BudgetTooSmall):
        C.abc_search(toy, iterations=0)


def test_abc_best_never_worse_than_initial(toy):
    mask, fit, initial, history = C.abc_search(toy, seed=2, colony=6, iterations=8)
    assert fit >= initial
    assert all(b >= a for a, b in zip(history, history[1:]))
    assert mask.any()


@pytest.mark.slow
def test_abc_recovers_planted_features():
    hits = 0
    for seed in range(100):
        d, informative = make_planted(n_rows=300, n_informative=3, n_noise=7, seed=seed)
        sel, _ = C.select_abc(d, seed=seed)
        hits += set(informative) <= set(sel)
    assert hits >= 90


def test_scores_are_finite_on_degenerate_data():
    d = from_arrays(np.zeros((6, 3)), [1, 0, 1, 0, 1, 0])
    for fn in (C.score_chi_square, C.score_info_gain, C.score_mad, C.score_pearson, C.score_anova_f):
        s = fn(d).scores
        assert np.all(s == 0.0)
    assert math.isfinite(C.score_relieff(d).scores.sum())
