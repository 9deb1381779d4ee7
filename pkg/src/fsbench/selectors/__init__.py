"""Built-in selection methods and their registry entries."""

from __future__ import annotations

from fsbench.data import Dataset
from fsbench.selection import BASELINE_METHOD, MethodInfo, Option, SelectorKind, _read_about
from fsbench.selectors import classical as C
from fsbench.selectors import domain as D

ORD = SelectorKind.ORDERING
SUB = SelectorKind.SUBSET


def select_all_features(d: Dataset, seed: int = 0):
    return list(range(d.n_cols)), None


def builtin_methods() -> list[MethodInfo]:
    specs = [
        ("abc", SUB, C.select_abc, {
            "colony": Option(int, 20, "bees in the colony (half employed, half onlookers)"),
            "iterations": Option(int, 50, "search iterations"),
        }),
        ("anova", SUB, C.select_anova, {
            "alpha": Option(float, 0.05, "significance level of the F test"),
        }),
        ("chi_square", ORD, C.score_chi_square, {}),
        ("info_gain", ORD, C.score_info_gain, {}),
        ("lasso", SUB, C.select_lasso, {
            "lam": Option(float, 0.01, "L1 penalty on standardised columns"),
        }),
        ("linear_regression", SUB, C.select_linear_regression, {}),
        ("mad", ORD, C.score_mad, {}),
        ("pca", SUB, C.select_pca, {
            "variance_target": Option(float, 0.95, "cumulative explained variance to retain"),
        }),
        ("pearson", ORD, C.score_pearson, {}),
        ("relieff", ORD, C.score_relieff, {
            "k_neighbors": Option(int, 10, "nearest hits / misses per sampled instance"),
            "sample_size": Option(int, 200, "instances sampled for weight updates"),
        }),
        ("rfe", ORD, C.score_rfe, {
            "step": Option(int, 1, "features eliminated per round"),
        }),
        ("jowmdroid", SUB, D.select_jowmdroid, {
            "population": Option(int, 15, "differential evolution population"),
            "generations": Option(int, 40, "differential evolution generations"),
        }),
        ("mt", SUB, D.select_mt, {
            "min_mad": Option(float, 0.01, "tier 1 near-zero-variance cut"),
            "max_corr": Option(float, 0.95, "tier 2 pairwise |correlation| cut"),
        }),
        ("rfg", SUB, D.select_rfg, {
            "tolerance": Option(float, 0.005, "F1 slack from the grid maximum"),
            "n_trees": Option(int, 100, "trees of the inner random forest"),
        }),
        ("semidroid", SUB, D.select_semidroid, {
            "keep_fraction": Option(float, 0.5, "share of features kept by aggregate rank"),
        }),
        ("sigapi", SUB, D.select_sigapi, {
            "step_fraction": Option(float, 0.05, "prefix growth per trace step"),
            "ratio": Option(float, 0.995, "fraction of the best traced F1 to reach"),
        }),
        ("sigpid", SUB, D.select_sigpid, {
            "step_fraction": Option(float, 0.05, "prefix growth per trace step"),
            "min_gain": Option(float, 0.005, "F1 gain that counts as progress"),
            "patience": Option(int, 3, "stagnant steps before stopping"),
            "min_support": Option(float, 0.001, "minimum share of rows using a permission"),
            "confidence": Option(float, 0.95, "co-occurrence confidence that marks redundancy"),
        }),
    ]
    out = [
        MethodInfo(id=mid, kind=kind, run=fn, options=opts, description=_read_about(mid))
        for mid, kind, fn, opts in specs
    ]
    out.append(MethodInfo(
        id=BASELINE_METHOD, kind=SUB, run=select_all_features, listed=False,
        description=_read_about(BASELINE_METHOD),
    ))
    return out

