"""Planted-signal datasets with known informative columns."""

from __future__ import annotations

import numpy as np

from fsbench.data import Dataset, FeatureKind


def make_planted(
    n_rows: int = 2000,
    n_informative: int = 5,
    n_noise: int = 45,
    flip: float = 0.1,
    seed: int = 0,
    malware_rate: float = 0.5,
    name: str = "planted",
) -> tuple[Dataset, np.ndarray]:
    """Labels ~ Bernoulli(malware_rate); each informative column copies the
    label and flips it with probability ``flip``; noise columns are
    Bernoulli(0.5). Returns the dataset and the informative column indices.
    """
    rng = np.random.default_rng(seed)
    y = (rng.random(n_rows) < malware_rate).astype(np.int64)
    if y.min() == y.max():
        y[0] = 1 - y[0]
    flips = rng.random((n_rows, n_informative)) < flip
    informative = np.where(flips, 1 - y[:, None], y[:, None])
    noise = (rng.random((n_rows, n_noise)) < 0.5).astype(np.int64)
    X = np.hstack([informative, noise]).astype(float)
    names = [f"f{j}" for j in range(X.shape[1])]
    return Dataset(name=name, features=X, feature_names=tuple(names), labels=y), np.arange(n_informative)


def make_demo(n_rows: int = 1000, seed: int = 2024) -> Dataset:
    """The bundled demo dataset: a planted, Android-flavoured binary table.

    Labels are Bernoulli(0.4). Columns (60 in total):

    * 3 strong columns (2 API calls, 1 intent): the label flipped with
      probability 0.2;
    * 14 weak columns (API calls and permissions) whose presence rate is
      0.12 higher in malware than in benign rows;
    * 12 "library" permission columns that follow a hidden factor unrelated
      to the label, so they carry most of the variance and no signal;
    * 31 independent Bernoulli noise columns at rates 0.05-0.5.

    No single column separates the classes; good subsets need the weak
    columns and must avoid the high-variance library block.
    """
    rng = np.random.default_rng(seed)
    y = (rng.random(n_rows) < 0.4).astype(np.int64)
    cols, names, kinds = [], [], []
    prefix = {"A": "api", "P": "perm", "I": "intent", "O": "opcode"}

    def add(values, stem, kind):
        cols.append(np.asarray(values, dtype=float))
        names.append(f"{prefix[kind.value]}_{stem}_{len(names)}")
        kinds.append(kind)

    for _ in range(14):
        base = rng.uniform(0.2, 0.5)
        rate = np.where(y == 1, base + 0.12, base)
        add(rng.random(n_rows) < rate, "weak", FeatureKind.API_CALL if len(names) % 2 else FeatureKind.PERMISSION)
    for kind in (FeatureKind.API_CALL, FeatureKind.API_CALL, FeatureKind.INTENT):
        add(np.where(rng.random(n_rows) < 0.2, 1 - y, y), "signal", kind)
    factor = rng.random(n_rows) < 0.5
    for _ in range(12):
        add(np.where(rng.random(n_rows) < 0.05, ~factor, factor), "library", FeatureKind.PERMISSION)
    for j in range(31):
        kind = (FeatureKind.API_CALL, FeatureKind.PERMISSION, FeatureKind.OPCODE)[j % 3]
        add(rng.random(n_rows) < rng.uniform(0.05, 0.5), "noise", kind)
    X = np.column_stack(cols)
    return Dataset(name="demo", features=X, feature_names=tuple(names), labels=y, feature_kinds=tuple(kinds))
