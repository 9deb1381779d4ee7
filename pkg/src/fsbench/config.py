"""Experiment configuration (``RunConfig``) and its JSON form."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from fsbench.data import DEFAULT_LABEL_COLUMN
from fsbench.errors import InvalidConfig
from fsbench.models import canonical_model


@dataclass(frozen=True)
class DatasetSpec:
    path: str
    label_column: str = DEFAULT_LABEL_COLUMN
    text_labels: bool = False
    name: str | None = None

    @property
    def display_name(self) -> str:
        return self.name or Path(self.path).stem


@dataclass(frozen=True)
class RunConfig:
    datasets: tuple[DatasetSpec, ...]
    methods: tuple[str, ...]
    models: tuple[str, ...] = ("knn", "rf", "svm-linear")
    k_folds: int = 5
    balance: bool = False
    seed: int = 42
    threads: int = 1
    no_leakage: bool = False
    output_dir: str = "fsbench-out"
    # "<method>.<key>" -> value; k/alpha/lam are recognised for every method
    method_args: dict[str, str] = field(default_factory=dict)
    # "<model>.<key>" -> value
    model_args: dict[str, str] = field(default_factory=dict)
    plugin_dir: str | None = None
    plugin_timeout: float = 3600.0
    record_timings: bool = False

    def __post_init__(self):
        object.__setattr__(self, "datasets", tuple(
            d if isinstance(d, DatasetSpec) else DatasetSpec(**d) for d in self.datasets))
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "models", tuple(canonical_model(m) for m in self.models))
        if self.k_folds < 2:
            raise InvalidConfig("K must be >= 2")
        if self.threads < 1:
            raise InvalidConfig("threads must be >= 1")
        if not self.datasets:
            raise InvalidConfig("at least one dataset is required")
        if not self.methods:
            raise InvalidConfig("at least one method is required")
        if not self.models:
            raise InvalidConfig("at least one model is required")
        names = [d.display_name for d in self.datasets]
        if len(set(names)) != len(names):
            raise InvalidConfig(f"dataset names must be unique, got {names}")
        if len(set(self.methods)) != len(self.methods) or len(set(self.models)) != len(self.models):
            raise InvalidConfig("methods and models must not repeat")
        for key in [*self.method_args, *self.model_args]:
            if "." not in key:
                raise InvalidConfig(f"override {key!r} must look like <id>.<key>")

    def method_overrides(self, method_id: str) -> dict[str, str]:
        prefix = method_id + "."
        return {k[len(prefix):]: v for k, v in self.method_args.items() if k.startswith(prefix)}

    def model_overrides(self, model: str) -> dict[str, str]:
        prefix = model + "."
        return {k[len(prefix):]: v for k, v in self.model_args.items() if k.startswith(prefix)}

    def to_dict(self) -> dict:
        d = asdict(self)
        d["datasets"] = [asdict(x) for x in self.datasets]
        d["methods"] = list(self.methods)
        d["models"] = list(self.models)
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys {sorted(unknown)}")
        raw = dict(raw)
        raw["datasets"] = tuple(
            DatasetSpec(**d) if isinstance(d, dict) else DatasetSpec(path=str(d)) for d in raw.get("datasets", ())
        )
        try:
            return cls(**raw)
        except TypeError as exc:
            raise InvalidConfig(str(exc)) from None


def load_config_file(path: str | Path) -> dict:
    """Read a JSON config file; a run manifest is accepted too (its ``config`` block)."""
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise InvalidConfig(f"{path}: expected a JSON object")
    if "config" in raw and isinstance(raw["config"], dict):
        raw = raw["config"]
    return raw
