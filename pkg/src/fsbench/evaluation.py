"""Stratified K-fold protocol, binary metrics and the benchmark run loop.

Malware (label 1) is the positive class throughout.
"""

from __future__ import annotations

import concurrent.futures as cf
import hashlib
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import rankdata

from fsbench import models
from fsbench.config import RunConfig
from fsbench.data import Dataset, load_csv, preprocess
from fsbench.errors import ClassSmallerThanK, FSBenchError, SelectorFailure, SingleClass

log = logging.getLogger(__name__)

METRIC_NAMES = ("accuracy", "precision", "recall", "f1", "roc_auc", "mcc")


def derive_seed(base: int, *parts) -> int:
    """Stable 63-bit seed for a task key; independent of scheduling and PYTHONHASHSEED."""
    key = "|".join([str(base), *map(str, parts)]).encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big") >> 1


# ---------------------------------------------------------------------------
# folds

@dataclass(frozen=True, eq=False)
class FoldPlan:
    K: int
    assignments: np.ndarray

    def test_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def splits(self):
        for f in range(self.K):
            yield self.train_rows(f), self.test_rows(f)


def stratified_kfold(labels: Sequence[int], K: int = 5, seed: int = 0) -> FoldPlan:
    """Shuffle each class (seeded) and deal its rows round-robin to the folds.

    The deal continues across classes, so the first fold of the second class
    is the one after the last fold used by the first class. That keeps total
    fold sizes within one of each other as well. A class with fewer than K
    rows is allowed (with a warning) as long as it has two.
    """
    y = np.asarray(labels, dtype=np.int64)
    if K < 2:
        raise ClassSmallerThanK("K must be >= 2 to leave data for testing")
    rng = np.random.default_rng(seed)
    assign = np.empty(len(y), dtype=np.int64)
    offset = 0
    for c in np.unique(y):
        rows = np.flatnonzero(y == c)
        if len(rows) < 2:
            # some training fold would then miss the class entirely
            raise ClassSmallerThanK(f"class {c} has {len(rows)} row(s); at least 2 are needed")
        if len(rows) < K:
            log.warning("class %s has %d rows, fewer than K=%d; some folds get none", c, len(rows), K)
        rows = rng.permutation(rows)
        assign[rows] = (offset + np.arange(len(rows))) % K
        offset = (offset + len(rows)) % K
    return FoldPlan(K=K, assignments=assign)


# ---------------------------------------------------------------------------
# metrics

@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class MetricSet:
    accuracy: float
    precision: float
    recall: float
    f1: float
    roc_auc: float
    mcc: float


def confusion(y_true, y_pred) -> ConfusionMatrix:
    t = np.asarray(y_true, dtype=np.int64)
    p = np.asarray(y_pred, dtype=np.int64)
    return ConfusionMatrix(
        tp=int(np.sum((t == 1) & (p == 1))),
        tn=int(np.sum((t == 0) & (p == 0))),
        fp=int(np.sum((t == 0) & (p == 1))),
        fn=int(np.sum((t == 1) & (p == 0))),
    )


def _ratio(num: float, den: float, what: str) -> float:
    if den == 0:
        log.debug("%s is 0/0, defined as 0", what)
        return 0.0
    return num / den


def metrics_from_confusion(cm: ConfusionMatrix) -> dict[str, float]:
    tp, tn, fp, fn = cm.tp, cm.tn, cm.fp, cm.fn
    precision = _ratio(tp, tp + fp, "precision")
    recall = _ratio(tp, tp + fn, "recall")
    f1 = _ratio(2 * precision * recall, precision + recall, "f1")
    den = math.sqrt(float(tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    mcc = _ratio(float(tp) * tn - float(fp) * fn, den, "mcc")
    return {
        "accuracy": _ratio(tp + tn, cm.total, "accuracy"),
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "mcc": mcc,
    }


def roc_auc(y_true, scores) -> float:
    """P(score_pos > score_neg) + 0.5 * P(tie), via average ranks."""
    y = np.asarray(y_true, dtype=np.int64)
    s = np.asarray(scores, dtype=float)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("roc_auc needs both classes")
    r = rankdata(s)
    u = r[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def metric_set(y_true, y_pred, scores) -> MetricSet:
    m = metrics_from_confusion(confusion(y_true, y_pred))
    return MetricSet(roc_auc=roc_auc(y_true, scores), **m)


def cv_f1(X: np.ndarray, y: np.ndarray, spec: models.ModelSpec | None = None,
          folds: int = 3, seed: int = 0) -> float:
    """Mean F1 of ``spec`` (KNN by default) over stratified folds.

    Used by the wrapper selectors. The fold count shrinks to the minority
    class size when that is smaller than ``folds``.
    """
    y = np.asarray(y, dtype=np.int64)
    spec = spec or models.ModelSpec(models.KNN, seed=seed)
    n_min = int(min(y.sum(), len(y) - y.sum()))
    K = min(folds, n_min)
    if K < 2:
        raise SelectorFailure(f"inner CV needs >= 2 rows per class, minority has {n_min}")
    plan = stratified_kfold(y, K, seed)
    total = 0.0
    for train, test in plan.splits():
        m = models.fit_arrays(spec, X[train], y[train])
        total += metrics_from_confusion(confusion(y[test], m.predict(X[test])))["f1"]
    return total / K


# ---------------------------------------------------------------------------
# records

@dataclass(frozen=True)
class EvalRecord:
    dataset: str
    method: str
    model: str
    fold: int
    metrics: MetricSet
    n_selected: int
    selection_seconds: float | None = None
    train_seconds: float | None = None

    def sort_key(self):
        return (self.dataset, self.method, self.model, self.fold)

    def to_json(self) -> str:
        return json.dumps(asdict(self), allow_nan=False)

    @classmethod
    def from_dict(cls, raw: dict) -> "EvalRecord":
        raw = dict(raw)
        raw["metrics"] = MetricSet(**raw["metrics"])
        return cls(**raw)


@dataclass(frozen=True)
class FailureRecord:
    dataset: str
    method: str
    model: str | None
    fold: int | None
    stage: str
    error: str

    def sort_key(self):
        return (self.dataset, self.method, self.model or "", -1 if self.fold is None else self.fold)


@dataclass
class RunResult:
    records: list[EvalRecord]
    failures: list[FailureRecord] = field(default_factory=list)
    # (dataset, method, model, fold) -> {"selection_seconds", "train_seconds"}
    timings: list[dict] = field(default_factory=list)
    datasets: dict[str, dict] = field(default_factory=dict)


def write_store(records: Iterable[EvalRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in sorted(records, key=EvalRecord.sort_key):
            fh.write(r.to_json() + "\n")


def read_store(path) -> list[EvalRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(EvalRecord.from_dict(json.loads(line)))
    return out


def aggregate(records: Sequence[EvalRecord], group_by: Sequence[str]) -> list[dict]:
    """Mean of every metric per group, full precision, sorted by group key.

    Use :func:`display_round` for the 2-decimal presentation form.
    """
    for g in group_by:
        if g not in ("dataset", "method", "model", "fold"):
            raise ValueError(f"cannot group by {g!r}")
    groups: dict[tuple, list[EvalRecord]] = {}
    for r in records:
        groups.setdefault(tuple(getattr(r, g) for g in group_by), []).append(r)
    rows = []
    for key in sorted(groups):
        rs = groups[key]
        row = dict(zip(group_by, key))
        for name in METRIC_NAMES:
            row[name] = float(np.mean([getattr(r.metrics, name) for r in rs]))
        row["n_records"] = len(rs)
        rows.append(row)
    return rows


def display_round(row: dict, digits: int = 2) -> dict:
    return {k: round(v, digits) if isinstance(v, float) else v for k, v in row.items()}


# ---------------------------------------------------------------------------
# run loop

def _selector_params(cfg: RunConfig, method_id: str, seed: int):
    from fsbench.selection import SelectorParams

    over = cfg.method_overrides(method_id)
    k = over.pop("k", None)
    alpha = over.pop("alpha", None)
    lam = over.pop("lam", over.pop("lambda", None))
    try:
        return SelectorParams(
            k=None if k is None else int(k),
            alpha=None if alpha is None else float(alpha),
            lam=None if lam is None else float(lam),
            seed=seed,
            extra=over,
        )
    except ValueError as exc:
        from fsbench.errors import InvalidConfig

        raise InvalidConfig(f"{method_id}: {exc}") from None


def _selection_task(info, d: Dataset, params):
    from fsbench.selection import run_selector

    return run_selector(info, d, params)


def _train_task(key, spec: models.ModelSpec, Xtr, ytr, Xte, yte):
    t0 = time.perf_counter()
    m = models.fit_arrays(spec, Xtr, ytr)
    scores = m.score(Xte)
    pred = (scores >= m.threshold).astype(np.int64)
    elapsed = time.perf_counter() - t0
    return key, metric_set(yte, pred, scores), elapsed


class _Inline:
    """Executor stand-in that runs tasks immediately in-process."""

    def submit(self, fn, *args):
        fut = cf.Future()
        try:
            fut.set_result(fn(*args))
        except BaseException as exc:  # noqa: BLE001 - surfaced via the future
            fut.set_exception(exc)
        return fut

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


def _executor(threads: int):
    if threads <= 1:
        return _Inline()
    return cf.ProcessPoolExecutor(max_workers=threads)


def load_datasets(cfg: RunConfig) -> list[Dataset]:
    out = []
    for i, spec in enumerate(cfg.datasets):
        d = load_csv(spec.path, spec.label_column, text_labels=spec.text_labels, name=spec.display_name)
        d = preprocess(d, balance=cfg.balance, seed=derive_seed(cfg.seed, d.name, "balance"))
        out.append(d)
    return out


def evaluate_run(cfg: RunConfig, registry=None, datasets: Sequence[Dataset] | None = None) -> RunResult:
    """Run the (dataset x method x model x fold) grid described by ``cfg``.

    By default every selector runs once on the full preprocessed dataset and
    the models are cross-validated on the reduced data. With
    ``cfg.no_leakage`` selection is repeated on each training fold instead.
    Task failures are collected, never raised.
    """
    from fsbench.selection import Registry, apply_selection

    if registry is None:
        registry = Registry.default(cfg.plugin_dir, cfg.plugin_timeout)
    infos = {m: registry.get(m) for m in cfg.methods}
    if datasets is None:
        datasets = load_datasets(cfg)
    model_specs = {
        name: models.ModelSpec(name, cfg.model_overrides(name)) for name in cfg.models
    }
    result = RunResult(records=[])
    plans: dict[str, FoldPlan] = {}
    for d in datasets:
        d.require_both_classes()
        plans[d.name] = stratified_kfold(d.labels, cfg.k_folds, derive_seed(cfg.seed, d.name, "folds"))
        n_benign, n_mal = d.class_counts()
        result.datasets[d.name] = {"n_rows": d.n_rows, "n_cols": d.n_cols, "n_malware": n_mal, "n_benign": n_benign}
        log.info("%s: %d rows (%d malware, %d benign), %d features",
                 d.name, d.n_rows, n_mal, n_benign, d.n_cols)

    by_name = {d.name: d for d in datasets}
    folds_for_selection = range(cfg.k_folds) if cfg.no_leakage else [None]

    with _executor(cfg.threads) as pool:
        sel_futures = {}
        for d in datasets:
            for method in cfg.methods:
                for fold in folds_for_selection:
                    seed = derive_seed(cfg.seed, d.name, method, "select", "" if fold is None else fold)
                    params = _selector_params(cfg, method, seed)
                    src = d if fold is None else d.take_rows(plans[d.name].train_rows(fold))
                    sel_futures[(d.name, method, fold)] = pool.submit(_selection_task, infos[method], src, params)
        selections = {}
        for key, fut in sel_futures.items():
            try:
                selections[key] = fut.result()
                log.info("selected %s/%s fold=%s: %d features in %.3fs", key[0], key[1], key[2],
                         len(selections[key].selected), selections[key].selection_seconds)
            except FSBenchError as exc:
                ds, method, fold = key
                log.error("selection failed: %s/%s fold=%s: %s", ds, method, fold, exc)
                result.failures.append(FailureRecord(ds, method, None, fold, "selection", f"{type(exc).__name__}: {exc}"))
            except Exception as exc:  # noqa: BLE001 - a task must never abort the run
                ds, method, fold = key
                log.exception("selection crashed: %s/%s", ds, method)
                result.failures.append(FailureRecord(ds, method, None, fold, "selection", f"{type(exc).__name__}: {exc}"))

        train_futures = {}
        for d in datasets:
            plan = plans[d.name]
            for method in cfg.methods:
                for fold in range(cfg.k_folds):
                    sel = selections.get((d.name, method, fold if cfg.no_leakage else None))
                    if sel is None:
                        continue
                    reduced = apply_selection(by_name[d.name], sel)
                    train, test = plan.train_rows(fold), plan.test_rows(fold)
                    X, y = reduced.features, reduced.labels
                    for model in cfg.models:
                        spec = models.ModelSpec(model, model_specs[model].hyperparams,
                                                seed=derive_seed(cfg.seed, d.name, method, model, fold))
                        key = (d.name, method, model, fold)
                        train_futures[key] = (sel, pool.submit(_train_task, key, spec, X[train], y[train], X[test], y[test]))

        for key, (sel, fut) in train_futures.items():
            ds, method, model, fold = key
            try:
                _, metrics, train_s = fut.result()
            except Exception as exc:  # noqa: BLE001
                log.error("training failed: %s/%s/%s fold %d: %s", ds, method, model, fold, exc)
                result.failures.append(FailureRecord(ds, method, model, fold, "training", f"{type(exc).__name__}: {exc}"))
                continue
            log.info("%s/%s/%s fold %d: f1=%.4f mcc=%.4f train=%.3fs",
                     ds, method, model, fold, metrics.f1, metrics.mcc, train_s)
            result.timings.append({"dataset": ds, "method": method, "model": model, "fold": fold,
                                   "selection_seconds": sel.selection_seconds, "train_seconds": train_s})
            result.records.append(EvalRecord(
                dataset=ds, method=method, model=model, fold=fold, metrics=metrics,
                n_selected=len(sel.selected),
                selection_seconds=sel.selection_seconds if cfg.record_timings else None,
                train_seconds=train_s if cfg.record_timings else None,
            ))

    result.records.sort(key=EvalRecord.sort_key)
    result.failures.sort(key=FailureRecord.sort_key)
    result.timings.sort(key=lambda t: (t["dataset"], t["method"], t["model"], t["fold"]))
    return result
