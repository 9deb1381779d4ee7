"""Selector contract, method registry and application of a selection."""

from __future__ import annotations

import enum
import logging
import math
import os
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Callable, Sequence

import numpy as np

from fsbench.data import Dataset
from fsbench.errors import (
    FSBenchError,
    IndexOutOfRange,
    InvalidConfig,
    KTooLarge,
    SelectorFailure,
    UnknownMethod,
)

log = logging.getLogger(__name__)

PLUGIN_DIR_ENV = "FSBENCH_PLUGIN_DIR"
BASELINE_METHOD = "all_features"
SCORE_SENTINEL = float(np.finfo(float).max)


class SelectorKind(str, enum.Enum):
    ORDERING = "Ordering"
    SUBSET = "Subset"


@dataclass(frozen=True, eq=False)
class FeatureScore:
    """Per-feature relevance, position = feature index, higher = more relevant."""

    scores: np.ndarray

    def __post_init__(self):
        s = np.array(self.scores, dtype=float, copy=True).ravel()
        s[np.isnan(s)] = 0.0
        s[np.isposinf(s)] = SCORE_SENTINEL
        s[np.isneginf(s)] = -SCORE_SENTINEL
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)

    def __len__(self):
        return len(self.scores)

    def entries(self) -> list[tuple[int, float]]:
        return [(i, float(v)) for i, v in enumerate(self.scores)]

    def order(self) -> np.ndarray:
        """Feature indices by decreasing score, lower index first on ties."""
        idx = np.arange(len(self.scores))
        return np.lexsort((idx, -self.scores))

    def ranks(self) -> np.ndarray:
        """0-based rank position of every feature under :meth:`order`."""
        r = np.empty(len(self.scores), dtype=np.int64)
        r[self.order()] = np.arange(len(self.scores))
        return r


@dataclass(frozen=True)
class SelectionResult:
    method_id: str
    selected: tuple[int, ...]
    ranking: FeatureScore | None = None
    params: dict[str, str] = field(default_factory=dict)
    selection_seconds: float = 0.0

    def __post_init__(self):
        sel = tuple(int(i) for i in self.selected)
        if not sel:
            raise SelectorFailure(f"{self.method_id}: empty selection")
        if len(set(sel)) != len(sel):
            raise SelectorFailure(f"{self.method_id}: duplicate indices in selection")
        object.__setattr__(self, "selected", sel)


@dataclass(frozen=True)
class SelectorParams:
    k: int | None = None
    alpha: float | None = None
    lam: float | None = None
    seed: int = 0
    extra: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.k is not None and self.k < 1:
            raise InvalidConfig("k must be >= 1")
        if self.alpha is not None and not 0 < self.alpha < 1:
            raise InvalidConfig("alpha must lie in (0, 1)")
        if self.lam is not None and self.lam < 0:
            raise InvalidConfig("lambda must be >= 0")


def top_k(ranking: FeatureScore, k: int) -> list[int]:
    if k > len(ranking):
        raise KTooLarge(f"k={k} exceeds {len(ranking)} ranked features")
    if k < 1:
        raise KTooLarge("k must be >= 1")
    return [int(i) for i in ranking.order()[:k]]


def default_k(n_cols: int) -> int:
    return max(1, math.ceil(n_cols / 2))


def apply_selection(d: Dataset, r: SelectionResult) -> Dataset:
    bad = [i for i in r.selected if not 0 <= i < d.n_cols]
    if bad:
        raise IndexOutOfRange(f"indices {bad} out of range for {d.n_cols} columns")
    return d.take_columns(r.selected)


# ---------------------------------------------------------------------------
# registry

@dataclass(frozen=True)
class Option:
    type: type
    default: Any
    help: str = ""


@dataclass(frozen=True)
class MethodInfo:
    """A selection method known to the registry.

    ``run`` returns a :class:`FeatureScore` for Ordering methods and a
    ``(selected, ranking_or_None)`` pair for Subset methods.
    """

    id: str
    kind: SelectorKind
    run: Callable[..., Any]
    options: dict[str, Option] = field(default_factory=dict)
    description: str = ""
    listed: bool = True
    plugin: Any = None

    def resolve_options(self, p: SelectorParams) -> dict[str, Any]:
        out = {}
        for key, opt in self.options.items():
            out[key] = opt.default
        # the common keys may be given via SelectorParams fields
        if p.alpha is not None and "alpha" in self.options:
            out["alpha"] = p.alpha
        if p.lam is not None and "lam" in self.options:
            out["lam"] = p.lam
        for key, raw in p.extra.items():
            if key not in self.options:
                raise InvalidConfig(f"{self.id}: unknown option {key!r} (known: {sorted(self.options)})")
            out[key] = _coerce(self.options[key].type, raw, f"{self.id}.{key}")
        return out


def _coerce(typ: type, raw: Any, where: str) -> Any:
    if isinstance(raw, typ) and not (typ is int and isinstance(raw, bool)):
        return raw
    try:
        if typ is bool:
            if str(raw).lower() in ("1", "true", "yes", "on"):
                return True
            if str(raw).lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return typ(raw)
    except (TypeError, ValueError):
        raise InvalidConfig(f"{where}: cannot parse {raw!r} as {typ.__name__}") from None


def _read_about(method_id: str) -> str:
    try:
        return resources.files("fsbench.resources").joinpath("about", f"{method_id}.desc").read_text("utf-8").strip()
    except FileNotFoundError:
        return ""


class Registry:
    """Read-only mapping of method id to :class:`MethodInfo`."""

    def __init__(self, methods: Sequence[MethodInfo]):
        self._methods: dict[str, MethodInfo] = {}
        for m in methods:
            if m.id in self._methods:
                raise ValueError(f"duplicate method id {m.id!r}")
            self._methods[m.id] = m

    @classmethod
    def default(cls, plugin_dir: str | os.PathLike | None = None, plugin_timeout: float | None = None) -> "Registry":
        from fsbench.selectors import builtin_methods

        methods = builtin_methods()
        if plugin_dir is None:
            plugin_dir = os.environ.get(PLUGIN_DIR_ENV) or None
        if plugin_dir is not None:
            from fsbench.plugin import DEFAULT_TIMEOUT, discover_plugins, plugin_method

            taken = {m.id for m in methods}
            timeout = plugin_timeout or DEFAULT_TIMEOUT
            methods += [plugin_method(pm, timeout) for pm in discover_plugins(plugin_dir, reserved=taken)]
        return cls(methods)

    def __contains__(self, method_id: str) -> bool:
        return method_id in self._methods

    def get(self, method_id: str) -> MethodInfo:
        try:
            return self._methods[method_id]
        except KeyError:
            raise UnknownMethod(f"unknown method {method_id!r}") from None

    def list_methods(self) -> list[tuple[str, SelectorKind, str]]:
        return [
            (m.id, m.kind, m.description)
            for m in sorted(self._methods.values(), key=lambda m: m.id)
            if m.listed
        ]

    def select(self, method_id: str, d: Dataset, p: SelectorParams | None = None) -> SelectionResult:
        return run_selector(self.get(method_id), d, p)


def run_selector(m: MethodInfo, d: Dataset, p: SelectorParams | None = None) -> SelectionResult:
    """Run one registered method on ``d`` and time it."""
    p = p or SelectorParams()
    d.require_both_classes()
    opts = m.resolve_options(p)
    params = {key: str(v) for key, v in opts.items()}
    params["seed"] = str(p.seed)
    t0 = time.perf_counter()
    try:
        if m.kind is SelectorKind.ORDERING and m.plugin is None:
            ranking = m.run(d, seed=p.seed, **opts)
            if not isinstance(ranking, FeatureScore):
                ranking = FeatureScore(ranking)
            k = p.k if p.k is not None else default_k(d.n_cols)
            k = min(k, d.n_cols)
            params["k"] = str(k)
            selected = top_k(ranking, k)
        else:
            if p.k is not None:
                log.info("%s returns its own subset; k=%d ignored", m.id, p.k)
            selected, ranking = m.run(d, seed=p.seed, **opts)
            if ranking is not None and not isinstance(ranking, FeatureScore):
                ranking = FeatureScore(ranking)
    except FSBenchError:
        raise
    except Exception as exc:  # wrap anything method-internal
        raise SelectorFailure(f"{m.id}: {type(exc).__name__}: {exc}") from exc
    elapsed = time.perf_counter() - t0
    return SelectionResult(
        method_id=m.id,
        selected=tuple(int(i) for i in selected),
        ranking=ranking,
        params=params,
        selection_seconds=elapsed,
    )


_default_registry: Registry | None = None


def default_registry() -> Registry:
    global _default_registry
    if _default_registry is None:
        _default_registry = Registry.default()
    return _default_registry


def reset_default_registry() -> None:
    global _default_registry
    _default_registry = None


def list_methods() -> list[tuple[str, SelectorKind, str]]:
    return default_registry().list_methods()


def select(method_id: str, d: Dataset, p: SelectorParams | None = None) -> SelectionResult:
    return default_registry().select(method_id, d, p)
