"""Command line: ``fsbench list-methods | describe | run | report``.

Logs go to stderr (and ``run.log`` for runs); machine-readable outputs are
only ever written to files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from fsbench import report
from fsbench.config import RunConfig, load_config_file
from fsbench.errors import FSBenchError, InvalidConfig, UnknownMethod, UnwritableOutputDir
from fsbench.evaluation import _selector_params, evaluate_run, write_store
from fsbench.models import HYPERPARAMS, MODEL_ALIASES, MODEL_DESCRIPTIONS, ModelSpec, canonical_model
from fsbench.resources import demo_path
from fsbench.selection import Registry

log = logging.getLogger("fsbench")

STORE_NAME = "records.jsonl"
FAILURES_NAME = "failures.jsonl"
TIMINGS_NAME = "timings.jsonl"
LOG_NAME = "run.log"
OUTPUT_FILES = (STORE_NAME, FAILURES_NAME, TIMINGS_NAME, report.MANIFEST_NAME, LOG_NAME)

EXIT_OK, EXIT_FAILURES, EXIT_ERROR = 0, 1, 2
_LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _version() -> str:
    try:
        return metadata.version("fsbench")
    except metadata.PackageNotFoundError:
        return "unknown"


def _setup_logging(verbose: bool) -> None:
    root = logging.getLogger()
    h = next((h for h in root.handlers if getattr(h, "_fsbench", False)), None)
    if h is None:
        h = logging.StreamHandler(sys.stderr)
        h.setFormatter(logging.Formatter(_LOG_FORMAT))
        h._fsbench = True
        root.addHandler(h)
    h.setLevel(logging.INFO if verbose else logging.WARNING)
    root.setLevel(logging.INFO)


# ---------------------------------------------------------------------------
# list / describe

def cmd_list(registry: Registry, out=None) -> int:
    out = out or sys.stdout
    rows = registry.list_methods()
    width = max(len(mid) for mid, _, _ in rows)
    print(f"{'method':<{width}}  kind      description", file=out)
    for mid, kind, desc in rows:
        first = desc.split(". ")[0].splitlines()[0].rstrip(".") if desc else ""
        print(f"{mid:<{width}}  {kind.value:<8}  {first}", file=out)
    return EXIT_OK


def cmd_describe(name: str, registry: Registry, out=None) -> int:
    out = out or sys.stdout
    if name.lower() in MODEL_ALIASES:
        kind = canonical_model(name)
        print(f"{kind} (model)", file=out)
        print(MODEL_DESCRIPTIONS[kind], file=out)
        for key, (typ, default) in HYPERPARAMS[kind].items():
            print(f"  --model-arg {kind}.{key}=<{typ.__name__}>  (default {default})", file=out)
        return EXIT_OK
    try:
        info = registry.get(name)
    except UnknownMethod:
        print(f"error: no method or model named {name!r}; see 'fsbench list-methods'", file=sys.stderr)
        return EXIT_ERROR
    print(f"{info.id} ({info.kind.value}{', plugin' if info.plugin else ''})", file=out)
    print(info.description, file=out)
    for key, opt in sorted(info.options.items()):
        extra = f"  {opt.help}" if opt.help else ""
        print(f"  --method-arg {info.id}.{key}=<{opt.type.__name__}>  (default {opt.default}){extra}", file=out)
    if info.kind.value == "Ordering" and info.plugin is None:
        print(f"  --method-arg {info.id}.k=<int>  (default ceil(n_features / 2))", file=out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# run

def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def prepare_output_dir(path: Path, force: bool) -> None:
    if path.exists() and not path.is_dir():
        raise UnwritableOutputDir(f"{path} exists and is not a directory")
    if path.is_dir() and any(path.iterdir()):
        if not force:
            raise UnwritableOutputDir(f"{path} is not empty; pass --force to overwrite its run files")
        for name in OUTPUT_FILES:
            (path / name).unlink(missing_ok=True)
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".fsbench-write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise UnwritableOutputDir(f"cannot write to {path}: {exc}") from None


def validate(cfg: RunConfig, registry: Registry) -> None:
    """Fail fast on anything that would make every task of a method fail."""
    for spec in cfg.datasets:
        if not Path(spec.path).is_file():
            raise InvalidConfig(f"dataset {spec.path} does not exist")
    for m in cfg.methods:
        info = registry.get(m)
        info.resolve_options(_selector_params(cfg, m, 0))
    for key in cfg.method_args:
        if key.split(".", 1)[0] not in cfg.methods:
            raise InvalidConfig(f"--method-arg {key}: method not in this run")
    for key in cfg.model_args:
        if canonical_model(key.split(".", 1)[0]) not in cfg.models:
            raise InvalidConfig(f"--model-arg {key}: model not in this run")
    for model in cfg.models:
        ModelSpec(model, cfg.model_overrides(model))


def _jsonl(path: Path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in rows:
            fh.write(json.dumps(r, sort_keys=True) + "\n")


def cmd_run(cfg: RunConfig, force: bool = False, registry: Registry | None = None) -> int:
    out = Path(cfg.output_dir)
    prepare_output_dir(out, force)
    handler = logging.FileHandler(out / LOG_NAME, mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter(_LOG_FORMAT))
    handler.setLevel(logging.INFO)
    root = logging.getLogger()
    old_level = root.level
    root.addHandler(handler)
    root.setLevel(logging.INFO)
    try:
        registry = registry or Registry.default(cfg.plugin_dir, cfg.plugin_timeout)
        validate(cfg, registry)
        log.info("fsbench %s: %d datasets x %d methods x %d models, K=%d, seed=%d, threads=%d",
                 _version(), len(cfg.datasets), len(cfg.methods), len(cfg.models),
                 cfg.k_folds, cfg.seed, cfg.threads)
        result = evaluate_run(cfg, registry)
        write_store(result.records, out / STORE_NAME)
        _jsonl(out / FAILURES_NAME, [vars(f) for f in result.failures])
        _jsonl(out / TIMINGS_NAME, result.timings)
        manifest = {
            "fsbench_version": _version(),
            "versions": {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__},
            "seed": cfg.seed,
            "config": cfg.to_dict(),
            "datasets": {
                spec.display_name: {"path": str(spec.path), "sha256": _sha256(spec.path),
                                    **result.datasets.get(spec.display_name, {})}
                for spec in cfg.datasets
            },
            "n_records": len(result.records),
            "n_failures": len(result.failures),
            "store_sha256": _sha256(out / STORE_NAME),
        }
        (out / report.MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                                encoding="utf-8")
        log.info("wrote %d records and %d failures to %s", len(result.records), len(result.failures), out)
        if result.failures:
            log.error("%d tasks failed; see %s", len(result.failures), out / FAILURES_NAME)
            return EXIT_FAILURES
        return EXIT_OK
    finally:
        root.removeHandler(handler)
        handler.close()
        root.setLevel(old_level)


# ---------------------------------------------------------------------------
# report

def cmd_report(stores, view: str = "summary", fmt: str = "csv", mode: str = "complete",
               output: str | None = None, width: int = 900, height: int = 500) -> int:
    if fmt not in report.FORMATS:
        raise report.UnknownFormat(f"unknown format {fmt!r} (choose from {', '.join(report.FORMATS)})")
    artifact = report.build(view, stores, mode)
    target = Path(output) if output else Path(stores[0]).parent / f"{view}-{mode}.{fmt}"
    report.emit(artifact, fmt, target, width, height)
    log.info("wrote %s", target)
    print(target)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

def _split_list(values) -> list[str] | None:
    if not values:
        return None
    out = []
    for v in values:
        out.extend(x.strip() for x in v.split(",") if x.strip())
    return out


def _pairs(values, flag: str) -> dict[str, str]:
    out = {}
    for v in values or ():
        key, sep, val = v.partition("=")
        if not sep or "." not in key:
            raise InvalidConfig(f"{flag} expects <id>.<key>=<value>, got {v!r}")
        out[key.strip()] = val.strip()
    return out


def config_from_args(a: argparse.Namespace, registry_factory=Registry.default) -> RunConfig:
    raw = load_config_file(a.config) if a.config else {}
    datasets = list(raw.get("datasets", []))
    if a.dataset or a.demo:
        datasets = [{"path": p, "label_column": a.label_column or "class", "text_labels": a.text_labels}
                    for p in (a.dataset or [])]
        if a.demo:
            datasets.append({"path": str(demo_path()), "name": "demo"})
    raw["datasets"] = datasets
    methods = _split_list(a.methods)
    if methods == ["all"]:
        plugin_dir = a.plugin_dir or raw.get("plugin_dir")
        methods = [mid for mid, _, _ in registry_factory(plugin_dir).list_methods()]
    for key, val in (
        ("methods", methods), ("models", _split_list(a.models)), ("k_folds", a.k_folds), ("seed", a.seed),
        ("threads", a.threads), ("output_dir", a.output_dir), ("plugin_dir", a.plugin_dir),
        ("plugin_timeout", a.plugin_timeout),
    ):
        if val is not None:
            raw[key] = val
    for key in ("balance", "no_leakage", "record_timings"):
        if getattr(a, key):
            raw[key] = True
    if a.method_arg:
        raw["method_args"] = {**raw.get("method_args", {}), **_pairs(a.method_arg, "--method-arg")}
    if a.model_arg:
        raw["model_args"] = {**raw.get("model_args", {}), **_pairs(a.model_arg, "--model-arg")}
    if "methods" not in raw:
        raise InvalidConfig("no methods given (use --methods or a config file)")
    return RunConfig.from_dict(raw)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fsbench", description="Feature selection benchmark for binary malware data.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress at INFO level")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("list-methods", help="list the selection methods")
    p.add_argument("--plugin-dir", help="plugin root (default: $FSBENCH_PLUGIN_DIR)")

    p = sub.add_parser("describe", help="describe a method or model")
    p.add_argument("name")
    p.add_argument("--plugin-dir", help="plugin root (default: $FSBENCH_PLUGIN_DIR)")

    p = sub.add_parser("run", help="run a dataset x method x model grid")
    p.add_argument("--config", help="JSON config file (or a run_manifest.json); flags override it")
    p.add_argument("--dataset", action="append", help="CSV dataset path (repeatable)")
    p.add_argument("--demo", action="store_true", help="add the bundled demo dataset")
    p.add_argument("--label-column", help="label column of --dataset files (default: class)")
    p.add_argument("--text-labels", action="store_true", help="labels are the words benign/malware")
    p.add_argument("--methods", action="append", help="comma-separated method ids, or 'all'")
    p.add_argument("--models", action="append", help="comma-separated models: knn, rf, svm-linear")
    p.add_argument("--k-folds", type=int, help="cross-validation folds (default 5)")
    p.add_argument("--balance", action="store_true", help="undersample the majority class")
    p.add_argument("--seed", type=int, help="base seed (default 42)")
    p.add_argument("--threads", type=int, help="worker processes (default 1)")
    p.add_argument("--no-leakage", action="store_true", help="repeat selection inside every training fold")
    p.add_argument("--output-dir", help="directory for the store, manifest and log")
    p.add_argument("--force", action="store_true", help="overwrite run files in a non-empty output dir")
    p.add_argument("--method-arg", action="append", metavar="ID.KEY=VALUE")
    p.add_argument("--model-arg", action="append", metavar="MODEL.KEY=VALUE")
    p.add_argument("--plugin-dir", help="plugin root (default: $FSBENCH_PLUGIN_DIR)")
    p.add_argument("--plugin-timeout", type=float, help="seconds per plugin call (default 3600)")
    p.add_argument("--record-timings", action="store_true",
                   help="write wall-clock timings into the store (makes it run-dependent)")

    p = sub.add_parser("report", help="summaries, heatmaps and box statistics from record stores")
    p.add_argument("stores", nargs="+", help="records.jsonl files")
    p.add_argument("--view", choices=("summary", "heatmap", "box"), default="summary")
    p.add_argument("--format", default="csv", help="csv, json or svg")
    p.add_argument("--mode", choices=report.MODES, default="complete")
    p.add_argument("--output", help="output file (default: next to the first store)")
    p.add_argument("--width", type=int, default=900)
    p.add_argument("--height", type=int, default=500)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    _setup_logging(a.verbose)
    try:
        if a.command == "list-methods":
            return cmd_list(Registry.default(a.plugin_dir))
        if a.command == "describe":
            return cmd_describe(a.name, Registry.default(a.plugin_dir))
        if a.command == "run":
            return cmd_run(config_from_args(a), force=a.force)
        if a.command == "report":
            return cmd_report(a.stores, a.view, a.format, a.mode, a.output, a.width, a.height)
    except (FSBenchError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
