"""Directory-based selector plugins run as subprocesses.

Layout::

    <root>/<id>/about.desc    plain-text description
    <root>/<id>/plugin.json   {"kind": "Subset"|"Ordering", "executable": "run.py",
                               "args": [{"name": .., "type": int|real|text|flag, "default": ..}]}
    <root>/<id>/<executable>

The engine writes the dataset as CSV, calls
``<executable> --input IN --output OUT [--<arg> value ...]`` and reads back
the reduced CSV. The label is always the last input column. The output
must keep the label and a subset of the feature columns, with every row
unchanged and in order. ``.py`` executables are started with the current interpreter.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from fsbench.data import DEFAULT_LABEL_COLUMN, Dataset, write_csv
from fsbench.errors import InvalidConfig, PluginCrashed, PluginTimeout, ProtocolViolation
from fsbench.selection import MethodInfo, Option, SelectionResult, SelectorKind

log = logging.getLogger(__name__)

BUNDLED_PLUGIN_DIR = Path(__file__).parent / "plugins"
DEFAULT_TIMEOUT = 3600.0
ARG_TYPES = {"int": int, "real": float, "text": str, "flag": bool}


@dataclass(frozen=True)
class PluginArg:
    name: str
    type: str
    default: Any = None


@dataclass(frozen=True)
class PluginManifest:
    id: str
    kind: SelectorKind
    description: str
    executable: str
    declared_args: tuple[PluginArg, ...] = ()
    directory: str = ""

    @property
    def executable_path(self) -> Path:
        return Path(self.directory) / self.executable


def _load_manifest(sub: Path) -> PluginManifest:
    desc = (sub / "about.desc").read_text(encoding="utf-8").strip()
    raw = json.loads((sub / "plugin.json").read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ValueError("plugin.json must hold an object")
    pid = raw.get("id", sub.name)
    if pid != sub.name:
        raise ValueError(f"id {pid!r} differs from directory name {sub.name!r}")
    kind = SelectorKind(raw.get("kind", "Subset"))
    exe = raw.get("executable")
    if not exe:
        raise ValueError("missing 'executable'")
    exe_path = sub / exe
    if not exe_path.is_file():
        raise ValueError(f"executable {exe!r} not found")
    if exe_path.suffix != ".py" and not os.access(exe_path, os.X_OK):
        raise ValueError(f"executable {exe!r} is not runnable")
    args = []
    for a in raw.get("args", []):
        if a.get("type") not in ARG_TYPES:
            raise ValueError(f"argument {a.get('name')!r}: type must be one of {sorted(ARG_TYPES)}")
        if not a.get("name") or a["name"] in ("input", "output"):
            raise ValueError(f"invalid argument name {a.get('name')!r}")
        args.append(PluginArg(a["name"], a["type"], a.get("default")))
    return PluginManifest(id=pid, kind=kind, description=desc, executable=exe,
                          declared_args=tuple(args), directory=str(sub.resolve()))


def discover_plugins(root: str | os.PathLike, reserved: set[str] | frozenset = frozenset()) -> list[PluginManifest]:
    """One manifest per well-formed plugin directory under ``root``, sorted by id.

    Malformed directories are skipped with a warning; ids already taken by
    built-in methods are skipped with an error.
    """
    root = Path(root)
    if not root.is_dir():
        log.warning("plugin root %s does not exist", root)
        return []
    found = []
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        if not (sub / "about.desc").is_file() or not (sub / "plugin.json").is_file():
            log.warning("skipping plugin directory %s: needs about.desc and plugin.json", sub)
            continue
        try:
            pm = _load_manifest(sub)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            log.warning("skipping plugin directory %s: %s", sub, exc)
            continue
        if pm.id in reserved:
            log.error("plugin %s collides with an existing method id; skipped", pm.id)
            continue
        found.append(pm)
    return found


def _command(pm: PluginManifest, inp: Path, out: Path, args: dict[str, Any], seed: int | None) -> list[str]:
    declared = {a.name: a for a in pm.declared_args}
    unknown = set(args) - set(declared)
    if unknown:
        raise InvalidConfig(f"plugin {pm.id}: undeclared arguments {sorted(unknown)}")
    exe = pm.executable_path
    cmd = [sys.executable, str(exe)] if exe.suffix == ".py" else [str(exe)]
    cmd += ["--input", str(inp), "--output", str(out)]
    for name, a in declared.items():
        if name in args:
            value = args[name]
        elif name == "seed" and seed is not None:
            value = seed
        else:
            value = a.default
        if a.type == "flag":
            if str(value).lower() in ("1", "true", "yes", "on"):
                cmd.append(f"--{name}")
            continue
        if value is None:
            continue
        try:
            value = ARG_TYPES[a.type](value)
        except (TypeError, ValueError):
            raise InvalidConfig(f"plugin {pm.id}: argument {name}={value!r} is not {a.type}") from None
        cmd += [f"--{name}", str(value)]
    return cmd


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _read_reduced(path: Path, d: Dataset, label_column: str) -> list[int]:
    if not path.is_file():
        raise ProtocolViolation("plugin wrote no output file")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ProtocolViolation("output CSV is empty")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    if label_column not in header:
        raise ProtocolViolation(f"output lost the label column {label_column!r}")
    names = [h for h in header if h != label_column]
    position = {n: j for j, n in enumerate(d.feature_names)}
    extra = [n for n in names if n not in position]
    if extra:
        raise ProtocolViolation(f"output adds or renames columns: {extra}")
    if len(set(names)) != len(names):
        raise ProtocolViolation("output repeats a column")
    if not names:
        raise ProtocolViolation("output keeps no feature columns")
    if len(body) != d.n_rows:
        raise ProtocolViolation(f"output has {len(body)} rows, input had {d.n_rows}")
    li = header.index(label_column)
    cols = [position[n] for n in names]
    col_pos = [header.index(n) for n in names]
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise ProtocolViolation(f"output row {i + 1} is ragged")
        try:
            label = float(row[li])
            values = np.array([float(row[p]) for p in col_pos])
        except ValueError:
            raise ProtocolViolation(f"output row {i + 1} has unparseable cells") from None
        if label != d.labels[i] or not np.array_equal(values, d.features[i, cols]):
            raise ProtocolViolation(f"output row {i + 1} differs from input (rows reordered or edited)")
    return cols


def run_plugin(pm: PluginManifest, d: Dataset, args: dict[str, Any] | None = None,
               timeout: float = DEFAULT_TIMEOUT, seed: int | None = None) -> SelectionResult:
    args = dict(args or {})
    label_column = DEFAULT_LABEL_COLUMN
    while label_column in d.feature_names:
        label_column = "_" + label_column
    with tempfile.TemporaryDirectory(prefix=f"fsbench-{pm.id}-") as tmp:
        inp = Path(tmp) / "input.csv"
        out = Path(tmp) / "output.csv"
        write_csv(d, inp, label_column)
        before = _digest(inp)
        cmd = _command(pm, inp, out, args, seed)
        log.info("running plugin %s: %s", pm.id, " ".join(cmd))
        t0 = time.perf_counter()
        try:
            proc = subprocess.run(cmd, cwd=pm.directory, capture_output=True, text=True, timeout=timeout)
        except subprocess.TimeoutExpired:
            raise PluginTimeout(f"plugin {pm.id} exceeded {timeout:g}s") from None
        elapsed = time.perf_counter() - t0
        if proc.returncode != 0:
            tail = (proc.stderr or "").strip().splitlines()[-5:]
            raise PluginCrashed(f"plugin {pm.id} exited with {proc.returncode}: {' | '.join(tail)}")
        if _digest(inp) != before:
            raise ProtocolViolation(f"plugin {pm.id} modified its input file")
        selected = _read_reduced(out, d, label_column)
    params = {k: str(v) for k, v in args.items()}
    return SelectionResult(method_id=pm.id, selected=tuple(selected), params=params, selection_seconds=elapsed)


@dataclass(frozen=True)
class PluginRunner:
    """Callable adapter so a plugin can sit in the registry like a built-in."""

    manifest: PluginManifest
    timeout: float = DEFAULT_TIMEOUT

    def __call__(self, d: Dataset, seed: int = 0, **args):
        args = {k: v for k, v in args.items() if v is not None}
        r = run_plugin(self.manifest, d, args, timeout=self.timeout, seed=seed)
        return list(r.selected), None


def plugin_method(pm: PluginManifest, timeout: float = DEFAULT_TIMEOUT) -> MethodInfo:
    # a declared "seed" is filled from the task seed, not from user options
    options = {a.name: Option(ARG_TYPES[a.type], a.default) for a in pm.declared_args if a.name != "seed"}
    return MethodInfo(id=pm.id, kind=pm.kind, run=PluginRunner(pm, timeout), options=options,
                      description=pm.description, plugin=pm)
