"""The eleven classical feature-selection methods.

Filters return a :class:`FeatureScore`; Subset methods return
``(selected_indices, ranking_or_None)``. Columns with zero variance always
score 0 (or get a zero coefficient / zero relevance).
"""

from __future__ import annotations

import logging
import math

import numpy as np
from scipy import stats

from fsbench import models
from fsbench.data import Dataset, binarize
from fsbench.errors import (
    BudgetTooSmall,
    ConstantLabels,
    NoFeatureSurvives,
    TooFewSamples,
    ZeroTotalVariance,
)
from fsbench.evaluation import cv_f1
from fsbench.selection import SCORE_SENTINEL, FeatureScore

log = logging.getLogger(__name__)


def _xy(d: Dataset) -> tuple[np.ndarray, np.ndarray]:
    y = d.labels.astype(float)
    if y.min() == y.max():
        raise ConstantLabels(f"{d.name}: labels are constant")
    return d.features, y


def _entropy_terms(counts: np.ndarray, total) -> np.ndarray:
    """-c/total * log2(c/total) with 0 log 0 := 0, elementwise."""
    counts = np.asarray(counts, dtype=float)
    total = np.broadcast_to(np.asarray(total, dtype=float), counts.shape)
    out = np.zeros_like(counts)
    ok = (counts > 0) & (total > 0)
    p = counts[ok] / total[ok]
    out[ok] = -p * np.log2(p)
    return out


def contingency(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Observed 2x2 counts per feature, shape (p, 2, 2) indexed [j, x_value, class]."""
    n1 = y.sum()
    n0 = len(y) - n1
    x1_c1 = X.T @ y
    x1 = X.sum(axis=0)
    x1_c0 = x1 - x1_c1
    x0_c1 = n1 - x1_c1
    x0_c0 = n0 - x1_c0
    return np.stack([np.stack([x0_c0, x0_c1], -1), np.stack([x1_c0, x1_c1], -1)], 1)


# ---------------------------------------------------------------------------
# filters

def chi_square(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    obs = contingency(X, y)
    n = len(y)
    rows = obs.sum(axis=2, keepdims=True)
    cols = obs.sum(axis=1, keepdims=True)
    exp = rows * cols / n
    with np.errstate(divide="ignore", invalid="ignore"):
        cell = np.where(exp > 0, (obs - exp) ** 2 / exp, 0.0)
    return cell.sum(axis=(1, 2))


def score_chi_square(d: Dataset, seed: int = 0) -> FeatureScore:
    X, y = _xy(d)
    return FeatureScore(chi_square(binarize(X, d.name), y))


def info_gain(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """H(Y) - H(Y|X_j) in bits for every binary column of X."""
    n = len(y)
    n1 = y.sum()
    h_y = _entropy_terms(np.array([n - n1, n1]), n).sum()
    obs = contingency(X, y)  # [j, x, c]
    x_tot = obs.sum(axis=2)  # [j, x]
    h_cond = np.zeros(X.shape[1])
    for v in (0, 1):
        h_given = _entropy_terms(obs[:, v, :], x_tot[:, v:v + 1]).sum(axis=1)
        h_cond += x_tot[:, v] / n * h_given
    return np.maximum(h_y - h_cond, 0.0)


def score_info_gain(d: Dataset, seed: int = 0) -> FeatureScore:
    X, y = _xy(d)
    return FeatureScore(info_gain(binarize(X, d.name), y))


def mean_abs_deviation(X: np.ndarray) -> np.ndarray:
    return np.abs(X - X.mean(axis=0)).mean(axis=0)


def score_mad(d: Dataset, seed: int = 0) -> FeatureScore:
    return FeatureScore(mean_abs_deviation(d.features))


def abs_pearson(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    sx = np.sqrt((Xc ** 2).sum(axis=0))
    sy = math.sqrt(float(yc @ yc))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = (Xc.T @ yc) / (sx * sy)
    r = np.where(sx > 0, r, 0.0) if sy > 0 else np.zeros(X.shape[1])
    return np.minimum(np.abs(r), 1.0)


def score_pearson(d: Dataset, seed: int = 0) -> FeatureScore:
    X, y = _xy(d)
    return FeatureScore(abs_pearson(X, y))


def anova_f(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One-way F statistic and p-value per column for two groups.

    A column with zero within-group variance but separated means gets the
    finite sentinel score and p = 0; a fully constant column gets F = 0.
    """
    n = len(y)
    if n < 3:
        raise TooFewSamples("ANOVA needs at least 3 samples")
    mean = X.mean(axis=0)
    ssb = np.zeros(X.shape[1])
    ssw = np.zeros(X.shape[1])
    for c in (0, 1):
        Xc = X[y == c]
        mc = Xc.mean(axis=0)
        ssb += len(Xc) * (mc - mean) ** 2
        ssw += ((Xc - mc) ** 2).sum(axis=0)
    df_w = n - 2
    # tiny SSB from rounding of equal means is treated as zero
    ssb = np.where(ssb <= 1e-12 * np.maximum(ssb + ssw, 1.0), 0.0, ssb)
    F = np.zeros(X.shape[1])
    pos = ssw > 0
    F[pos] = ssb[pos] / (ssw[pos] / df_w)
    sentinel = (ssw == 0) & (ssb > 0)
    F[sentinel] = SCORE_SENTINEL
    p = np.ones(X.shape[1])
    p[pos] = stats.f.sf(F[pos], 1, df_w)
    p[sentinel] = 0.0
    return F, p


def score_anova_f(d: Dataset, seed: int = 0) -> FeatureScore:
    X, y = _xy(d)
    return FeatureScore(anova_f(X, y)[0])


def select_anova(d: Dataset, seed: int = 0, alpha: float = 0.05):
    X, y = _xy(d)
    F, p = anova_f(X, y)
    ranking = FeatureScore(F)
    selected = [int(j) for j in ranking.order() if p[j] < alpha]
    if not selected:
        log.warning("%s: no feature significant at alpha=%g; keeping the top-F feature", d.name, alpha)
        selected = [int(ranking.order()[0])]
    return selected, ranking


# ---------------------------------------------------------------------------
# ReliefF

def score_relieff(d: Dataset, seed: int = 0, k_neighbors: int = 10, sample_size: int = 200) -> FeatureScore:
    """ReliefF weights with range-normalised Manhattan distance.

    Equal distances are resolved by the lower row index. When a class is too
    small for ``k_neighbors`` the neighbour count for it shrinks.
    """
    X, y = _xy(d)
    y = y.astype(np.int64)
    n, p = X.shape
    rng_ = X.max(axis=0) - X.min(axis=0)
    scale = np.where(rng_ > 0, rng_, 1.0)
    Xn = np.where(rng_ > 0, (X - X.min(axis=0)) / scale, 0.0)
    m = min(n, sample_size)
    sample = np.sort(np.random.default_rng(seed).choice(n, size=m, replace=False))
    members = {c: np.flatnonzero(y == c) for c in (0, 1)}
    k_hit = {c: min(k_neighbors, len(members[c]) - 1) for c in (0, 1)}
    k_miss = {c: min(k_neighbors, len(members[1 - c])) for c in (0, 1)}
    for c in (0, 1):
        if k_hit[c] < k_neighbors or k_miss[c] < k_neighbors:
            log.info("%s: class %d too small for k=%d; using %d hits / %d misses",
                     d.name, c, k_neighbors, k_hit[c], k_miss[c])
    w = np.zeros(p)
    for i in sample:
        c = y[i]
        diff = np.abs(Xn - Xn[i])
        dist = diff.sum(axis=1)
        for pool, k, sign in ((members[c], k_hit[c], -1.0), (members[1 - c], k_miss[c], 1.0)):
            if k <= 0:
                continue
            pool = pool[pool != i]
            order = np.lexsort((pool, dist[pool]))[:k]
            w += sign * diff[pool[order]].sum(axis=0) / (m * k)
    return FeatureScore(w)


# ---------------------------------------------------------------------------
# RFE

def score_rfe(d: Dataset, seed: int = 0, step: int = 1) -> FeatureScore:
    """Recursive elimination with the linear SVM; score = elimination round.

    Features dropped in round r score r; the survivors of the last round
    score one more than that. Among equal |weight| the higher index goes first.
    """
    X, y = _xy(d)
    if step < 1:
        raise BudgetTooSmall("RFE step must be >= 1")
    p = X.shape[1]
    score = np.zeros(p)
    remaining = np.arange(p)
    rnd = 1
    while len(remaining) > step:
        svm = models.LinearSVM(seed=seed).fit(X[:, remaining], y)
        mag = np.abs(svm.coef_)
        # smallest |w| first, higher index first among ties
        order = np.lexsort((-remaining, mag))
        drop = order[:step]
        score[remaining[drop]] = rnd
        remaining = np.delete(remaining, drop)
        rnd += 1
    score[remaining] = rnd
    return FeatureScore(score)


# ---------------------------------------------------------------------------
# LASSO / linear regression

def standardize(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean-centre and scale columns to unit (population) variance.

    Returns the scaled matrix and a mask of columns with non-zero variance;
    zero-variance columns come back as all zeros.
    """
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    ok = sd > 1e-12
    Z = np.zeros_like(X, dtype=float)
    Z[:, ok] = (X[:, ok] - mu[ok]) / sd[ok]
    return Z, ok


def soft_threshold(rho: float, lam: float) -> float:
    return math.copysign(max(abs(rho) - lam, 0.0), rho)


def fit_lasso(X: np.ndarray, y: np.ndarray, lam: float, tol: float = 1e-7,
              max_sweeps: int = 1000) -> tuple[np.ndarray, float]:
    """Cyclic coordinate descent for (1/2n)|y - Zb - b0|^2 + lam |b|_1.

    ``Z`` is ``X`` standardised; the returned coefficients live on that
    scale. The intercept is the mean of ``y``.
    """
    y = np.asarray(y, dtype=float)
    Z, ok = standardize(np.asarray(X, dtype=float))
    n, p = Z.shape
    b0 = float(y.mean())
    r = y - b0
    beta = np.zeros(p)
    active = np.flatnonzero(ok)
    for _ in range(max_sweeps):
        max_delta = 0.0
        for j in active:
            zj = Z[:, j]
            old = beta[j]
            rho = float(zj @ r) / n + old
            new = soft_threshold(rho, lam)
            if new != old:
                r -= zj * (new - old)
                beta[j] = new
                max_delta = max(max_delta, abs(new - old))
        if max_delta < tol:
            break
    return beta, b0


def lasso_support(beta: np.ndarray, lam: float) -> list[int]:
    support = [int(j) for j in np.flatnonzero(beta != 0)]
    if not support:
        raise NoFeatureSurvives(f"lambda={lam:g} zeroes every coefficient; lower lambda")
    return support


def select_lasso(d: Dataset, seed: int = 0, lam: float = 0.01):
    X, y = _xy(d)
    beta, _ = fit_lasso(X, y, lam)
    return lasso_support(beta, lam), FeatureScore(np.abs(beta))


def select_linear_regression(d: Dataset, seed: int = 0):
    X, y = _xy(d)
    Z, ok = standardize(X)
    n, p = Z.shape
    beta = np.zeros(p)
    if ok.any():
        Za = Z[:, ok]
        gram = Za.T @ Za / n + 1e-8 * np.eye(Za.shape[1])
        beta[ok] = np.linalg.solve(gram, Za.T @ (y - y.mean()) / n)
    mag = np.abs(beta)
    selected = [int(j) for j in np.flatnonzero(mag > mag.mean())]
    if not selected:
        selected = [int(j) for j in np.flatnonzero(mag == mag.max())]
    return selected, FeatureScore(mag)


# ---------------------------------------------------------------------------
# PCA

def pca_relevance(X: np.ndarray, variance_target: float = 0.95) -> tuple[np.ndarray, int, np.ndarray]:
    """Return (relevance per feature, retained component count, eigenvalues desc)."""
    cov = np.atleast_2d(np.cov(X, rowvar=False, bias=True))
    evals, evecs = np.linalg.eigh(cov)
    evals = np.clip(evals[::-1], 0.0, None)
    evecs = evecs[:, ::-1]
    total = evals.sum()
    if total <= 0:
        raise ZeroTotalVariance("every feature is constant")
    ratio = np.cumsum(evals) / total
    m = int(np.searchsorted(ratio, variance_target - 1e-12) + 1)
    m = min(m, len(evals))
    relevance = (evecs[:, :m] ** 2) @ evals[:m]
    return relevance, m, evals


def select_pca(d: Dataset, seed: int = 0, variance_target: float = 0.95):
    if not 0 < variance_target <= 1:
        raise ValueError("variance_target must lie in (0, 1]")
    relevance, m, _ = pca_relevance(d.features, variance_target)
    ranking = FeatureScore(relevance)
    return [int(j) for j in ranking.order()[:m]], ranking


# ---------------------------------------------------------------------------
# artificial bee colony

class _MaskFitness:
    """Cached KNN cross-validated F1 of a feature mask minus a size penalty."""

    def __init__(self, X, y, seed, penalty=0.001, folds=3):
        self.X, self.y, self.seed, self.penalty, self.folds = X, y, seed, penalty, folds
        self.cache: dict[bytes, float] = {}

    def __call__(self, mask: np.ndarray) -> float:
        if not mask.any():
            return -math.inf
        key = np.packbits(mask).tobytes()
        if key not in self.cache:
            f1 = cv_f1(self.X[:, mask], self.y, folds=self.folds, seed=self.seed)
            self.cache[key] = f1 - self.penalty * mask.sum() / len(mask)
        return self.cache[key]


def abc_search(d: Dataset, seed: int = 0, colony: int = 20, iterations: int = 50, limit: int = 10):
    """Binary artificial bee colony over feature-inclusion masks.

    Returns ``(best_mask, best_fitness, initial_best_fitness, best_history)``.
    """
    if colony < 2 or iterations < 1:
        raise BudgetTooSmall("ABC needs colony >= 2 and iterations >= 1")
    X, y = _xy(d)
    p = X.shape[1]
    rng = np.random.default_rng(seed)
    fitness = _MaskFitness(X, y.astype(np.int64), seed)
    n_food = max(1, colony // 2)

    def random_mask():
        m = rng.random(p) < 0.5
        if not m.any():
            m[rng.integers(p)] = True
        return m

    foods = [random_mask() for _ in range(n_food)]
    fits = np.array([fitness(m) for m in foods])
    trials = np.zeros(n_food, dtype=np.int64)
    b = int(np.argmax(fits))
    best_mask, best_fit = foods[b].copy(), float(fits[b])
    initial_best = best_fit
    history = [best_fit]

    def try_neighbour(i):
        cand = foods[i].copy()
        j = rng.integers(p)
        cand[j] = not cand[j]
        f = fitness(cand)
        if f > fits[i]:
            foods[i], fits[i], trials[i] = cand, f, 0
        else:
            trials[i] += 1

    for _ in range(iterations):
        for i in range(n_food):  # employed bees
            try_neighbour(i)
        finite = np.where(np.isfinite(fits), fits, np.nanmin(fits[np.isfinite(fits)]))
        weights = finite - finite.min() + 1e-9
        probs = weights / weights.sum()
        for _ in range(n_food):  # onlookers
            try_neighbour(int(rng.choice(n_food, p=probs)))
        b = int(np.argmax(fits))
        if fits[b] > best_fit:
            best_mask, best_fit = foods[b].copy(), float(fits[b])
        worst = int(np.argmax(trials))
        if trials[worst] > limit:  # scout
            foods[worst] = random_mask()
            fits[worst] = fitness(foods[worst])
            trials[worst] = 0
            if fits[worst] > best_fit:
                best_mask, best_fit = foods[worst].copy(), float(fits[worst])
        history.append(best_fit)
    return best_mask, best_fit, initial_best, history


def select_abc(d: Dataset, seed: int = 0, colony: int = 20, iterations: int = 50):
    mask, *_ = abc_search(d, seed=seed, colony=colony, iterations=iterations)
    return [int(j) for j in np.flatnonzero(mask)], None
