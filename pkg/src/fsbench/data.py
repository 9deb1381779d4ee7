"""Dataset model, CSV loading and the preprocessing stage (NaN removal,
deduplication, undersampling)."""

from __future__ import annotations

import csv
import enum
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from fsbench.errors import (
    AllRowsDropped,
    EmptyFile,
    InvalidDataset,
    MissingLabelColumn,
    NonBinaryLabel,
    RaggedRow,
    SingleClass,
)

log = logging.getLogger(__name__)

DEFAULT_LABEL_COLUMN = "class"
TEXT_LABELS = {"benign": 0, "malware": 1}


class FeatureKind(str, enum.Enum):
    PERMISSION = "P"
    API_CALL = "A"
    INTENT = "I"
    OPCODE = "O"
    UNKNOWN = "U"

    @classmethod
    def parse(cls, tag: str) -> "FeatureKind":
        try:
            return cls(tag.strip().upper())
        except ValueError:
            raise InvalidDataset(f"unknown feature kind tag {tag!r}") from None


@dataclass(frozen=True, eq=False)
class Dataset:
    """Binary-labelled feature matrix plus column metadata.

    ``features`` may contain NaN (missing cells) until :func:`drop_nan_rows`
    has been applied. Arrays are made read-only on construction so a dataset
    can be shared between workers.
    """

    name: str
    features: np.ndarray
    feature_names: tuple[str, ...]
    labels: np.ndarray
    feature_kinds: tuple[FeatureKind, ...] | None = None

    def __post_init__(self):
        X = np.array(self.features, dtype=float, copy=True)
        y = np.array(self.labels, dtype=np.int64, copy=True)
        if X.ndim != 2:
            raise InvalidDataset("features must be a 2-D matrix")
        n_rows, n_cols = X.shape
        if n_cols < 1:
            raise InvalidDataset("dataset needs at least one feature column")
        if n_rows < 1:
            raise InvalidDataset("dataset needs at least one row")
        if y.shape != (n_rows,):
            raise InvalidDataset(f"labels length {y.shape} != n_rows {n_rows}")
        if not np.isin(y, (0, 1)).all():
            raise NonBinaryLabel("labels must be 0 (benign) or 1 (malware)")
        names = tuple(str(n) for n in self.feature_names)
        if len(names) != n_cols:
            raise InvalidDataset("feature_names length differs from n_cols")
        if any(not n for n in names):
            raise InvalidDataset("feature names must be non-empty")
        if len(set(names)) != len(names):
            raise InvalidDataset("feature names must be unique")
        kinds = self.feature_kinds
        if kinds is not None:
            kinds = tuple(FeatureKind(k) for k in kinds)
            if len(kinds) != n_cols:
                raise InvalidDataset("feature_kinds length differs from n_cols")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "feature_kinds", kinds)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_cols(self) -> int:
        return self.features.shape[1]

    @property
    def kinds_known(self) -> bool:
        return self.feature_kinds is not None

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.name == other.name
            and self.feature_names == other.feature_names
            and self.feature_kinds == other.feature_kinds
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.features, other.features, equal_nan=True)
        )

    __hash__ = None

    def replace(self, **changes) -> "Dataset":
        fields = dict(
            name=self.name,
            features=self.features,
            feature_names=self.feature_names,
            labels=self.labels,
            feature_kinds=self.feature_kinds,
        )
        fields.update(changes)
        return Dataset(**fields)

    def take_rows(self, rows: Sequence[int] | np.ndarray) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return self.replace(features=self.features[rows], labels=self.labels[rows])

    def take_columns(self, cols: Sequence[int]) -> "Dataset":
        cols = list(cols)
        kinds = None
        if self.feature_kinds is not None:
            kinds = tuple(self.feature_kinds[c] for c in cols)
        return self.replace(
            features=self.features[:, cols],
            feature_names=tuple(self.feature_names[c] for c in cols),
            feature_kinds=kinds,
        )

    def class_counts(self) -> tuple[int, int]:
        """Return ``(n_benign, n_malware)``."""
        n_mal = int(self.labels.sum())
        return self.n_rows - n_mal, n_mal

    def require_both_classes(self) -> None:
        n_benign, n_mal = self.class_counts()
        if self.n_rows < 2 or n_benign == 0 or n_mal == 0:
            raise SingleClass(f"dataset {self.name!r} must contain both classes")

    def is_binary(self) -> bool:
        X = self.features
        return bool(np.all((X == 0) | (X == 1)))


@dataclass(frozen=True)
class DatasetMeta:
    n_malware: int
    n_benign: int
    n_features: int
    kind_histogram: dict[str, int] = field(default_factory=dict)


def meta(d: Dataset) -> DatasetMeta:
    n_benign, n_mal = d.class_counts()
    hist: dict[str, int] = {}
    kinds = d.feature_kinds or (FeatureKind.UNKNOWN,) * d.n_cols
    for k in kinds:
        hist[k.name] = hist.get(k.name, 0) + 1
    return DatasetMeta(n_malware=n_mal, n_benign=n_benign, n_features=d.n_cols, kind_histogram=hist)


def _parse_cell(cell: str) -> float:
    try:
        v = float(cell)
    except ValueError:
        return math.nan
    return v if math.isfinite(v) else math.nan


def _parse_label(cell: str, text_labels: bool, lineno: int) -> int:
    c = cell.strip()
    if text_labels and c.lower() in TEXT_LABELS:
        return TEXT_LABELS[c.lower()]
    try:
        v = float(c)
    except ValueError:
        v = math.nan
    if v == 0.0 or v == 1.0:
        return int(v)
    raise NonBinaryLabel(f"line {lineno}: label {cell!r} is not 0/1")


def kinds_sidecar_path(csv_path: str | os.PathLike) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".kinds.json")


def load_kinds(path: str | os.PathLike, feature_names: Sequence[str]) -> tuple[FeatureKind, ...]:
    with open(path, encoding="utf-8") as fh:
        mapping = json.load(fh)
    if not isinstance(mapping, dict):
        raise InvalidDataset(f"{path}: kinds sidecar must be a JSON object")
    unknown = set(mapping) - set(feature_names)
    if unknown:
        log.warning("%s: %d kind entries name no column (ignored)", path, len(unknown))
    return tuple(
        FeatureKind.parse(mapping[n]) if n in mapping else FeatureKind.UNKNOWN
        for n in feature_names
    )


def load_csv(
    path: str | os.PathLike,
    label_column: str = DEFAULT_LABEL_COLUMN,
    *,
    text_labels: bool = False,
    name: str | None = None,
    kinds_path: str | os.PathLike | None = None,
) -> Dataset:
    """Read a headed CSV into a :class:`Dataset`.

    Feature cells that do not parse as finite numbers become NaN. Feature
    kinds come from ``kinds_path`` or, if omitted, the ``<stem>.kinds.json``
    sidecar next to the file when one exists.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not any(h.strip() for h in header):
            raise EmptyFile(f"{path}: no header row")
        header = [h.strip() for h in header]
        if label_column not in header:
            raise MissingLabelColumn(f"{path}: label column {label_column!r} not in header")
        li = header.index(label_column)
        feat_idx = [i for i in range(len(header)) if i != li]
        rows: list[list[float]] = []
        labels: list[int] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise RaggedRow(f"{path}:{lineno}: {len(row)} cells, header has {len(header)}")
            labels.append(_parse_label(row[li], text_labels, lineno))
            rows.append([_parse_cell(row[i]) for i in feat_idx])
    if not rows:
        raise EmptyFile(f"{path}: no data rows")
    names = [header[i] for i in feat_idx]
    X = np.array(rows, dtype=float).reshape(len(rows), len(names))
    n_missing = int(np.isnan(X).sum())
    if n_missing:
        log.info("%s: %d unparseable or missing cells marked NaN", path, n_missing)
    if kinds_path is None and kinds_sidecar_path(path).exists():
        kinds_path = kinds_sidecar_path(path)
    kinds = load_kinds(kinds_path, names) if kinds_path is not None else None
    return Dataset(
        name=name or path.stem,
        features=X,
        feature_names=tuple(names),
        labels=np.array(labels),
        feature_kinds=kinds,
    )


def _format_cell(v: float) -> str:
    if math.isnan(v):
        return ""
    if v == int(v) and abs(v) < 2**53:
        return str(int(v))
    return repr(float(v))


def write_csv(d: Dataset, path: str | os.PathLike, label_column: str = DEFAULT_LABEL_COLUMN) -> None:
    """Write ``d`` in the same wire format :func:`load_csv` reads."""
    if label_column in d.feature_names:
        raise InvalidDataset(f"label column {label_column!r} collides with a feature name")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*d.feature_names, label_column])
        for row, label in zip(d.features, d.labels):
            w.writerow([*(_format_cell(v) for v in row), str(int(label))])


def drop_nan_rows(d: Dataset) -> Dataset:
    keep = ~np.isnan(d.features).any(axis=1)
    if not keep.any():
        raise AllRowsDropped(f"every row of {d.name!r} has a missing cell")
    if keep.all():
        return d
    log.info("%s: dropped %d rows with missing cells", d.name, int((~keep).sum()))
    return d.take_rows(np.flatnonzero(keep))


def dedup_rows(d: Dataset) -> Dataset:
    """Keep the first occurrence of every (feature vector, label) pair."""
    seen: set[bytes] = set()
    keep = []
    # -0.0 and 0.0 must collapse; NaN payloads are normalised by the key too
    X = d.features + 0.0
    for i in range(d.n_rows):
        key = X[i].tobytes() + bytes([int(d.labels[i])])
        if key not in seen:
            seen.add(key)
            keep.append(i)
    if len(keep) == d.n_rows:
        return d
    log.info("%s: dropped %d duplicate rows", d.name, d.n_rows - len(keep))
    return d.take_rows(keep)


def balance_undersample(d: Dataset, seed: int) -> Dataset:
    """Uniformly undersample the majority class down to the minority size."""
    n_benign, n_mal = d.class_counts()
    if n_benign == 0 or n_mal == 0:
        raise SingleClass(f"cannot balance {d.name!r}: only one class present")
    target = min(n_benign, n_mal)
    rng = np.random.default_rng(seed)
    keep = []
    for c in (0, 1):
        idx = np.flatnonzero(d.labels == c)
        if len(idx) > target:
            idx = rng.choice(idx, size=target, replace=False)
        keep.append(idx)
    rows = np.sort(np.concatenate(keep))
    if len(rows) == d.n_rows:
        return d
    log.info("%s: undersampled to %d rows per class", d.name, target)
    return d.take_rows(rows)


def preprocess(d: Dataset, *, balance: bool = False, seed: int = 0) -> Dataset:
    """drop_nan -> dedup -> optional balance, the fixed stage-1 order."""
    log.info("%s: preprocessing order drop_nan -> dedup%s", d.name, " -> balance" if balance else "")
    d = dedup_rows(drop_nan_rows(d))
    if balance:
        d = balance_undersample(d, seed)
    return d


def binarize(X: np.ndarray, name: str = "") -> np.ndarray:
    """Threshold non-binary columns at 0.5; binary input passes through."""
    if np.all((X == 0) | (X == 1)):
        return X
    log.info("%s: non-binary features thresholded at 0.5", name or "dataset")
    return (X > 0.5).astype(float)


def from_arrays(
    X: Iterable, y: Iterable, *, name: str = "data", feature_names: Sequence[str] | None = None,
    feature_kinds: Sequence[FeatureKind | str] | None = None,
) -> Dataset:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if feature_names is None:
        feature_names = [f"f{j + 1}" for j in range(X.shape[1])]
    return Dataset(
        name=name, features=X, feature_names=tuple(feature_names), labels=np.asarray(y),
        feature_kinds=None if feature_kinds is None else tuple(FeatureKind(k) for k in feature_kinds),
    )
