import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fsbench.data import FeatureKind, from_arrays
from fsbench.errors import NoPermissionFeatures
from fsbench.selection import FeatureScore
from fsbench.selectors import domain as D
from fsbench.synthetic import make_planted


def test_trace_sizes_strictly_increase():
    D.SaturationTrace(((1, 0.5), (2, 0.6)))
    with pytest.raises(ValueError):
        D.SaturationTrace(((2, 0.5), (2, 0.6)))


def test_step_sizes():
    assert D.step_sizes(40, 0.05) == list(range(2, 41, 2))
    assert D.step_sizes(7, 0.05) == [1, 2, 3, 4, 5, 6, 7]
    assert D.step_sizes(45, 0.1)[-1] == 45


def test_flat_trace_returns_first_step():
    trace = D.SaturationTrace(((2, 0.7), (4, 0.7), (6, 0.7)))
    assert D.saturation_prefix(trace) == 2


# ---------------------------------------------------------------------------
# SigPID

def _perm_dataset(seed=0, n=200):
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < 0.5).astype(int)
    X = np.column_stack([y, (rng.random((n, 5)) < 0.3), (rng.random((n, 3)) < 0.5)]).astype(float)
    kinds = ["P"] * 6 + ["A"] * 3
    return from_arrays(X, y, feature_kinds=kinds)


def test_sigpid_perfect_permission_survives():
    d = _perm_dataset()
    s = D.signed_rate_difference(d.features, d.labels)
    assert s[0] == 1.0
    sel, _ = D.select_sigpid(d)
    assert 0 in sel


def test_sigpid_l2_support():
    X = np.zeros((10000, 2))
    X[0, 0] = 1
    X[:5000, 1] = 1
    assert D._sigpid_l2(X, [0, 1], 0.001) == [1]


def test_sigpid_l3_duplicate():
    rng = np.random.default_rng(1)
    col = (rng.random(100) < 0.4).astype(float)
    other = (rng.random(100) < 0.4).astype(float)
    X = np.column_stack([col, col, other])
    kept = D._sigpid_l3(X, [0, 1, 2], 0.95)
    assert kept.count(0) + kept.count(1) == 1
    assert 2 in kept


def test_sigpid_needs_permissions():
    d = from_arrays([[1, 0], [0, 1], [1, 1], [0, 0]], [1, 0, 1, 0], feature_kinds=["A", "A"])
    with pytest.raises(NoPermissionFeatures):
        D.select_sigpid(d)


def test_domain_gating(demo):
    kinds = demo.feature_kinds
    sel, _ = D.select_sigpid(demo, seed=1)
    assert {kinds[j] for j in sel} == {FeatureKind.PERMISSION}
    sel, _ = D.select_sigapi(demo, seed=1)
    assert {kinds[j] for j in sel} == {FeatureKind.API_CALL}


def test_unknown_kinds_warn(caplog):
    d = _perm_dataset().replace(feature_kinds=None)
    D.select_sigapi(d)
    assert "feature kinds unknown" in caplog.text


# ---------------------------------------------------------------------------
# SigAPI

def test_sigapi_perfect_feature_first_step():
    d = _perm_dataset()
    d = d.replace(feature_kinds=("A",) * d.n_cols)
    sel, ranking = D.select_sigapi(d)
    assert sel == [0]
    assert ranking.order()[0] == 0


def test_sigapi_without_api_columns_falls_back(caplog):
    d = _perm_dataset().replace(feature_kinds=("P",) * 9)
    sel, _ = D.select_sigapi(d)
    assert sel and "falling back" in caplog.text


# ---------------------------------------------------------------------------
# RFG

def test_rfg_grid_includes_full_set():
    d, _ = make_planted(n_rows=120, n_informative=1, n_noise=4, seed=3)
    sel, _ = D.select_rfg(d, n_trees=5)
    assert 1 <= len(sel) <= d.n_cols


@pytest.mark.slow
def test_rfg_planted_size():
    small = 0
    for seed in range(100):
        d, _ = make_planted(n_rows=1000, seed=seed)
        sel, _ = D.select_rfg(d, seed=seed, n_trees=20)
        small += len(sel) <= 15
    assert small >= 90


# ---------------------------------------------------------------------------
# JOWMDroid

def test_weight_maps():
    w = np.array([0.0, 0.5, 1.0])
    np.testing.assert_allclose(D.weight_map(0, 2.0, 0.1, w), [0.1, 1.1, 2.1])
    np.testing.assert_allclose(D.weight_map(1, 2.0, 0.0, w), [0.0, 0.25, 1.0])
    np.testing.assert_allclose(D.weight_map(2, 1.0, 0.5, w)[1], 0.5)


def test_jowmdroid_keeps_perfect_feature_and_is_elitist():
    d = _perm_dataset(seed=4, n=120)
    mask, fit, history, _ = D.jowmdroid_search(d, seed=2, population=6, generations=5)
    assert mask[0]
    assert all(b >= a for a, b in zip(history, history[1:]))
    sel, _ = D.select_jowmdroid(d, seed=2, population=6, generations=5)
    assert 0 in sel


def test_jowmdroid_equal_weights_deterministic():
    X = np.tile(np.array([[1, 0], [0, 1]], dtype=float), (10, 2))
    y = np.tile([1, 0], 10)
    d = from_arrays(X, y)
    a = D.select_jowmdroid(d, seed=5, population=5, generations=3)[0]
    b = D.select_jowmdroid(d, seed=5, population=5, generations=3)[0]
    assert a == b and len(a) >= 1


# ---------------------------------------------------------------------------
# MT

def test_mt_tiers():
    rng = np.random.default_rng(5)
    y = (rng.random(200) < 0.5).astype(int)
    strong = np.where(rng.random(200) < 0.1, 1 - y, y)
    noise = (rng.random((200, 4)) < 0.5)
    X = np.column_stack([np.zeros(200), strong, strong, noise]).astype(float)
    sel, _ = D.select_mt(from_arrays(X, y))
    assert 0 not in sel
    assert (1 in sel) != (2 in sel)
    assert len(sel) <= 3 + 1  # ceil(5 survivors / 2) plus ties


# ---------------------------------------------------------------------------
# SemiDroid

def test_semidroid_extremes():
    y = np.array([1, 1, 1, 0, 0, 0])
    X = np.column_stack([y, [1, 0, 1, 0, 1, 0], np.zeros(6), [1, 0, 0, 0, 1, 1]])
    sel, agg = D.select_semidroid(from_arrays(X, y))
    assert 0 in sel and 2 not in sel
    assert agg.order()[0] == 0


@given(st.lists(st.integers(-500, 500), min_size=2, max_size=12), st.floats(0.1, 5.0))
def test_aggregate_rank_monotone_invariance(raw, a):
    s = np.array(raw, dtype=float)
    base = [FeatureScore(s), FeatureScore(-s)]
    rescaled = [FeatureScore(np.exp(s / 100) * a), FeatureScore(-s)]
    np.testing.assert_array_equal(D.aggregate_rank(base), D.aggregate_rank(rescaled))


# ---------------------------------------------------------------------------
# every domain method returns a valid non-empty subset

@settings(max_examples=15)
@given(st.integers(0, 2**31), st.integers(6, 40), st.integers(1, 8))
def test_domain_methods_valid_subsets(seed, n, p):
    rng = np.random.default_rng(seed)
    X = (rng.random((n, p)) < rng.uniform(0.05, 0.95)).astype(float)
    y = np.array([0, 1] * (n // 2) + [1] * (n % 2))
    d = from_arrays(X, y, feature_kinds=[("P", "A")[j % 2] for j in range(p)] if p > 1 else ["P"])
    runs = [
        lambda: D.select_mt(d),
        lambda: D.select_semidroid(d),
        lambda: D.select_sigapi(d, seed=seed),
        lambda: D.select_sigpid(d, seed=seed),
        lambda: D.select_jowmdroid(d, seed=seed, population=4, generations=2),
        lambda: D.select_rfg(d, seed=seed, n_trees=3),
    ]
    for run in runs:
        sel, _ = run()
        assert len(sel) >= 1
        assert len(set(sel)) == len(sel)
        assert all(0 <= j < p for j in sel)
