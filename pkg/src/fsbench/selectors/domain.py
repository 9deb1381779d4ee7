"""Android-specific selectors: SigPID, SigAPI, RFG, JOWMDroid, MT, SemiDroid.

These are compact, documented realisations of the published pipelines,
tuned for desk-scale benchmarking rather than bit-exact reproduction. Every
method returns a non-empty subset; the fallbacks are logged.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from fsbench import models
from fsbench.data import Dataset, FeatureKind, binarize
from fsbench.errors import ConstantLabels, NoPermissionFeatures
from fsbench.evaluation import cv_f1
from fsbench.selection import FeatureScore
from fsbench.selectors.classical import (
    abs_pearson,
    chi_square,
    info_gain,
    mean_abs_deviation,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SaturationTrace:
    steps: tuple[tuple[int, float], ...]

    def __post_init__(self):
        sizes = [s for s, _ in self.steps]
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError("trace subset sizes must strictly increase")

    @property
    def sizes(self) -> list[int]:
        return [s for s, _ in self.steps]

    @property
    def metrics(self) -> list[float]:
        return [m for _, m in self.steps]


def step_sizes(n: int, fraction: float) -> list[int]:
    """Prefix sizes step, 2*step, ... always ending at ``n``."""
    step = max(1, int(round(fraction * n)))
    sizes = list(range(step, n + 1, step))
    if not sizes or sizes[-1] != n:
        sizes.append(n)
    return sizes


def saturation_prefix(trace: SaturationTrace, ratio: float = 0.995) -> int:
    """Smallest traced size whose metric reaches ``ratio`` x the best metric."""
    best = max(trace.metrics)
    for size, metric in trace.steps:
        if metric >= ratio * best:
            return size
    return trace.sizes[-1]


def _labels(d: Dataset) -> np.ndarray:
    y = d.labels.astype(np.int64)
    if y.min() == y.max():
        raise ConstantLabels(f"{d.name}: labels are constant")
    return y


def _candidates(d: Dataset, kind: FeatureKind, method: str) -> np.ndarray:
    if not d.kinds_known:
        log.warning("%s: feature kinds unknown for %s; inspecting all %d columns "
                    "(method designed for %s features)", method, d.name, d.n_cols, kind.name)
        return np.arange(d.n_cols)
    cols = np.array([j for j, k in enumerate(d.feature_kinds) if k is kind], dtype=np.int64)
    return cols


def _trace(X, y, ordered: np.ndarray, sizes, seed, spec=None, stop=None) -> SaturationTrace:
    steps = []
    for size in sizes:
        f1 = cv_f1(X[:, ordered[:size]], y, spec, folds=3, seed=seed)
        steps.append((size, f1))
        if stop is not None and stop(steps):
            break
    return SaturationTrace(tuple(steps))


def _ranked(scores: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """``cols`` sorted by decreasing score, lower index first on ties."""
    return cols[np.lexsort((cols, -scores[cols]))]


# ---------------------------------------------------------------------------
# SigPID

def signed_rate_difference(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    mal = X[y == 1]
    ben = X[y == 0]
    return mal.mean(axis=0) - ben.mean(axis=0)


def _sigpid_l1(trace: SaturationTrace, gain: float, patience: int) -> int:
    kept = trace.sizes[0]
    prev = trace.metrics[0]
    stagnant = 0
    for size, f1 in trace.steps[1:]:
        if f1 - prev >= gain:
            kept, stagnant = size, 0
        else:
            stagnant += 1
            if stagnant >= patience:
                break
        prev = f1
    return kept


def _sigpid_l2(X: np.ndarray, cols: list[int], min_support: float) -> list[int]:
    support = X[:, cols].sum(axis=0)
    return [c for c, s in zip(cols, support) if s >= min_support * len(X)]


def _sigpid_l3(X: np.ndarray, cols: list[int], confidence: float) -> list[int]:
    """Drop the later (lower-|s|) member of every highly co-occurring pair.

    ``cols`` must already be ordered by decreasing |s|.
    """
    if not cols:
        return []
    sub = X[:, cols]
    co = sub.T @ sub
    support = np.diag(co)
    kept: list[int] = []
    for a in range(len(cols)):
        redundant = False
        for b in kept:
            # P(a | b) and P(b | a)
            if (support[b] > 0 and co[a, b] / support[b] >= confidence) or \
               (support[a] > 0 and co[a, b] / support[a] >= confidence):
                redundant = True
                break
        if not redundant:
            kept.append(a)
    return [cols[a] for a in kept]


def select_sigpid(d: Dataset, seed: int = 0, step_fraction: float = 0.05, min_gain: float = 0.005,
                  patience: int = 3, min_support: float = 0.001, confidence: float = 0.95):
    """Three-level permission pruning: saturation ranking, support, co-occurrence."""
    y = _labels(d)
    cand = _candidates(d, FeatureKind.PERMISSION, "sigpid")
    if len(cand) == 0:
        raise NoPermissionFeatures(f"{d.name}: no permission columns")
    X = binarize(d.features, d.name)
    s = signed_rate_difference(X, y)
    ordered = _ranked(np.abs(s), cand)

    def saturated(steps):
        return _stagnant_run(steps, min_gain) >= patience

    trace = _trace(X, y, ordered, step_sizes(len(cand), step_fraction), seed, stop=saturated)
    kept = [int(c) for c in ordered[:_sigpid_l1(trace, min_gain, patience)]]
    n1 = len(kept)
    kept = _sigpid_l2(X, kept, min_support)
    n2 = len(kept)
    kept = _sigpid_l3(X, kept, confidence)
    log.info("%s sigpid: %d candidates -> L1 %d -> L2 %d -> L3 %d", d.name, len(cand), n1, n2, len(kept))
    if not kept:
        log.warning("%s sigpid: every feature pruned; keeping the top-|s| feature", d.name)
        kept = [int(ordered[0])]
    ranking = np.zeros(d.n_cols)
    ranking[cand] = np.abs(s[cand])
    return kept, FeatureScore(ranking)


def _stagnant_run(steps, min_gain) -> int:
    run = 0
    for (_, a), (_, b) in zip(steps, steps[1:]):
        run = run + 1 if b - a < min_gain else 0
    return run


# ---------------------------------------------------------------------------
# SigAPI

def select_sigapi(d: Dataset, seed: int = 0, step_fraction: float = 0.05, ratio: float = 0.995):
    """Smallest info-gain prefix of API columns reaching ``ratio`` x best traced F1."""
    y = _labels(d)
    cand = _candidates(d, FeatureKind.API_CALL, "sigapi")
    if len(cand) == 0:
        log.warning("%s sigapi: no API-call columns; falling back to all columns", d.name)
        cand = np.arange(d.n_cols)
    X = binarize(d.features, d.name)
    ig = info_gain(X, y.astype(float))
    ordered = _ranked(ig, cand)
    trace = _trace(X, y, ordered, step_sizes(len(cand), step_fraction), seed)
    size = saturation_prefix(trace, ratio)
    ranking = np.zeros(d.n_cols)
    ranking[cand] = ig[cand]
    return [int(c) for c in ordered[:size]], FeatureScore(ranking)


# ---------------------------------------------------------------------------
# RFG

def select_rfg(d: Dataset, seed: int = 0, tolerance: float = 0.005, n_trees: int = 100):
    """Grid over 10%..100% info-gain prefixes scored with the random forest."""
    y = _labels(d)
    X = binarize(d.features, d.name)
    ig = info_gain(X, y.astype(float))
    ordered = _ranked(ig, np.arange(d.n_cols))
    sizes = sorted({max(1, math.ceil(d.n_cols * q / 10)) for q in range(1, 11)})
    spec = models.ModelSpec(models.RANDOM_FOREST, {"n_trees": str(n_trees)}, seed=seed)
    trace = _trace(X, y, ordered, sizes, seed, spec=spec)
    best = max(trace.metrics)
    size = next(s for s, f in trace.steps if f >= best - tolerance)
    return [int(c) for c in ordered[:size]], FeatureScore(ig)


# ---------------------------------------------------------------------------
# JOWMDroid

_BOUNDS = np.array([[0.0, 3.0], [0.1, 10.0], [-1.0, 1.0], [0.0, 1.0]])  # func, a, b, cut


def weight_map(func: int, a: float, b: float, w: np.ndarray) -> np.ndarray:
    if func == 0:
        return a * w + b
    if func == 1:
        return np.power(w, a)
    return 1.0 / (1.0 + np.exp(-a * (w - b)))


def _decode(v: np.ndarray, w: np.ndarray) -> np.ndarray:
    func = min(int(v[0]), 2)
    return weight_map(func, v[1], v[2], w) >= v[3]


def jowmdroid_search(d: Dataset, seed: int = 0, population: int = 15, generations: int = 40,
                     mutation: float = 0.5, crossover: float = 0.9):
    """Differential evolution over (mapping function, a, b, cut).

    Returns ``(best_mask, best_fitness, per_generation_best, weights)``.
    """
    y = _labels(d)
    X = binarize(d.features, d.name)
    ig = info_gain(X, y.astype(float))
    w = ig / ig.max() if ig.max() > 0 else np.zeros_like(ig)
    rng = np.random.default_rng(seed)
    cache: dict[bytes, float] = {}

    def fitness(mask):
        if not mask.any():
            return -math.inf
        key = np.packbits(mask).tobytes()
        if key not in cache:
            cache[key] = cv_f1(X[:, mask], y, folds=3, seed=seed)
        return cache[key]

    lo, hi = _BOUNDS[:, 0], _BOUNDS[:, 1]
    pop = lo + rng.random((population, len(lo))) * (hi - lo)
    fits = np.array([fitness(_decode(v, w)) for v in pop])
    history = [float(fits.max())]
    for _ in range(generations):
        for i in range(population):
            others = [j for j in range(population) if j != i]
            r1, r2, r3 = rng.choice(others, 3, replace=False)
            mutant = np.clip(pop[r1] + mutation * (pop[r2] - pop[r3]), lo, np.nextafter(hi, lo))
            cross = rng.random(len(lo)) < crossover
            cross[rng.integers(len(lo))] = True
            trial = np.where(cross, mutant, pop[i])
            f = fitness(_decode(trial, w))
            if f >= fits[i]:
                pop[i], fits[i] = trial, f
        history.append(float(fits.max()))
    best = int(np.argmax(fits))
    return _decode(pop[best], w), float(fits[best]), history, w


def select_jowmdroid(d: Dataset, seed: int = 0, population: int = 15, generations: int = 40):
    mask, fit, _, w = jowmdroid_search(d, seed, population, generations)
    ranking = FeatureScore(w)
    if not mask.any() or not math.isfinite(fit):
        k = max(1, math.ceil(0.1 * d.n_cols))
        log.warning("%s jowmdroid: empty selection; falling back to top %d by weight", d.name, k)
        return [int(j) for j in ranking.order()[:k]], ranking
    return [int(j) for j in np.flatnonzero(mask)], ranking


# ---------------------------------------------------------------------------
# Multi-Tiered

def select_mt(d: Dataset, seed: int = 0, min_mad: float = 0.01, max_corr: float = 0.95):
    """Variance tier, correlation tier, then info gain at or above the median."""
    y = _labels(d)
    X = d.features
    ig = info_gain(binarize(X, d.name), y.astype(float))
    tier1 = np.flatnonzero(mean_abs_deviation(X) >= min_mad)
    if len(tier1) == 0:
        log.warning("%s mt: every column near-constant; keeping the top-IG feature", d.name)
        return [int(_ranked(ig, np.arange(d.n_cols))[0])], FeatureScore(ig)
    ordered = _ranked(ig, tier1)
    corr = np.atleast_2d(np.corrcoef(X[:, ordered], rowvar=False))
    kept: list[int] = []
    for a in range(len(ordered)):
        if all(abs(corr[a, b]) <= max_corr for b in kept):
            kept.append(a)
    tier2 = ordered[kept]
    med = float(np.median(ig[tier2]))
    tier3 = [int(j) for j in tier2 if ig[j] >= med]
    log.info("%s mt: tiers %d -> %d -> %d -> %d", d.name, d.n_cols, len(tier1), len(tier2), len(tier3))
    return tier3, FeatureScore(ig)


# ---------------------------------------------------------------------------
# SemiDroid

def aggregate_rank(rankings: list[FeatureScore]) -> np.ndarray:
    """Mean 0-based rank position over several rankings (lower = better)."""
    return np.mean([r.ranks() for r in rankings], axis=0)


def select_semidroid(d: Dataset, seed: int = 0, keep_fraction: float = 0.5):
    y = _labels(d).astype(float)
    Xb = binarize(d.features, d.name)
    rankings = [
        FeatureScore(info_gain(Xb, y)),
        FeatureScore(chi_square(Xb, y)),
        FeatureScore(abs_pearson(d.features, y)),
        FeatureScore(mean_abs_deviation(d.features)),
    ]
    agg = FeatureScore(-aggregate_rank(rankings))
    k = max(1, math.ceil(keep_fraction * d.n_cols))
    return [int(j) for j in agg.order()[:k]], agg

