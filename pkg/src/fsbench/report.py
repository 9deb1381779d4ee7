"""Summaries, heatmaps and box statistics built from record stores.

Every artifact treats malware as the positive class and says so in its
header. Values are computed at full precision and rounded to 2 decimals
only for presentation.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from fsbench.errors import EmptyStore, UnknownFormat
from fsbench.evaluation import EvalRecord, aggregate, read_store

log = logging.getLogger(__name__)

POSITIVE_CLASS = "malware"
MODES = ("complete", "balanced")
FORMATS = ("csv", "json", "svg")
SUMMARY_COLUMNS = ("method", "mode", "f1", "recall", "accuracy", "precision", "roc_auc", "mcc", "n_datasets")
MANIFEST_NAME = "run_manifest.json"

# heatmap colour ramp: -100 -> RAMP_LOW, 0 -> RAMP_MID, +100 -> RAMP_HIGH, linear in RGB
RAMP_LOW = (178, 24, 43)     # #b2182b
RAMP_MID = (247, 247, 247)   # #f7f7f7
RAMP_HIGH = (33, 102, 172)   # #2166ac
MISSING_FILL = "#bdbdbd"


# ---------------------------------------------------------------------------
# loading

def store_mode(store_path) -> str:
    """Balance mode of the run that wrote ``store_path``.

    Read from the run manifest next to the store; a store without one is
    treated as ``complete``.
    """
    manifest = Path(store_path).parent / MANIFEST_NAME
    if not manifest.is_file():
        log.warning("%s has no %s next to it; treating it as mode 'complete'", store_path, MANIFEST_NAME)
        return "complete"
    raw = json.loads(manifest.read_text(encoding="utf-8"))
    return "balanced" if raw.get("config", {}).get("balance") else "complete"


def _as_paths(stores) -> list[Path]:
    if isinstance(stores, (str, Path)):
        stores = [stores]
    return [Path(s) for s in stores]


def load_records(stores, mode: str | None = None) -> list[EvalRecord]:
    """Records of every store whose run mode equals ``mode`` (all if None)."""
    if mode is not None and mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    out = []
    for p in _as_paths(stores):
        if not p.is_file():
            raise FileNotFoundError(f"store {p} does not exist")
        if mode is None or store_mode(p) == mode:
            out.extend(read_store(p))
    if not out:
        raise EmptyStore(f"no records found in {[str(p) for p in _as_paths(stores)]}"
                         + (f" for mode {mode!r}" if mode else ""))
    return out


def _cell_means(records: Sequence[EvalRecord]) -> list[dict]:
    # fold mean per (dataset, method, model)
    return aggregate(records, ("dataset", "method", "model"))


# ---------------------------------------------------------------------------
# summary table

@dataclass(frozen=True)
class SummaryRow:
    method: str
    mode: str
    f1: float
    recall: float
    accuracy: float
    precision: float
    roc_auc: float
    mcc: float
    n_datasets: int


def summary_from_records(records: Sequence[EvalRecord], mode: str, digits: int | None = 2) -> list[SummaryRow]:
    """Fold mean per (dataset, method, model), then the mean over datasets and models."""
    if not records:
        raise EmptyStore("no records to summarize")
    by_method: dict[str, list[dict]] = {}
    for cell in _cell_means(records):
        by_method.setdefault(cell["method"], []).append(cell)
    rows = []
    for method in sorted(by_method):
        cells = by_method[method]
        vals = {}
        for name in SUMMARY_COLUMNS[2:-1]:
            v = float(np.mean([c[name] for c in cells]))
            vals[name] = round(v, digits) if digits is not None else v
        rows.append(SummaryRow(method=method, mode=mode, n_datasets=len({c["dataset"] for c in cells}), **vals))
    return rows


def summarize(stores, mode: str = "complete", digits: int | None = 2) -> list[SummaryRow]:
    return summary_from_records(load_records(stores, mode), mode, digits)


# ---------------------------------------------------------------------------
# heatmap

@dataclass(frozen=True)
class HeatmapData:
    """Mean MCC in percent per (dataset, method); ``None`` where no record exists."""

    datasets: tuple[str, ...]
    methods: tuple[str, ...]
    cells: tuple[tuple[float | None, ...], ...]

    def __post_init__(self):
        if len(self.cells) != len(self.datasets) or any(len(r) != len(self.methods) for r in self.cells):
            raise ValueError("heatmap cells must be datasets x methods")


def heatmap_from_records(records: Sequence[EvalRecord]) -> HeatmapData:
    if not records:
        raise EmptyStore("no records for a heatmap")
    groups: dict[tuple[str, str], list[float]] = {}
    for cell in _cell_means(records):
        groups.setdefault((cell["dataset"], cell["method"]), []).append(cell["mcc"])
    datasets = tuple(sorted({k[0] for k in groups}))
    methods = tuple(sorted({k[1] for k in groups}))
    cells = tuple(
        tuple(round(100.0 * float(np.mean(groups[(ds, m)])), 2) if (ds, m) in groups else None for m in methods)
        for ds in datasets
    )
    return HeatmapData(datasets, methods, cells)


def heatmap(stores, mode: str | None = None) -> HeatmapData:
    return heatmap_from_records(load_records(stores, mode))


# ---------------------------------------------------------------------------
# box statistics

@dataclass(frozen=True)
class BoxStat:
    method: str
    min: float
    q1: float
    median: float
    q3: float
    max: float
    n: int


def five_numbers(values, method: str = "linear") -> tuple[float, float, float, float, float]:
    """min, q1, median, q3, max.

    ``method`` is a numpy quantile method. The default "linear" is the type-7
    rule; "hazen" (type 5) gives the median-of-halves quartiles for even n.
    """
    v = np.asarray(values, dtype=float)
    q = np.quantile(v, [0.0, 0.25, 0.5, 0.75, 1.0], method=method)
    return tuple(float(x) for x in q)


def boxstats_from_records(records: Sequence[EvalRecord], method: str = "linear") -> list[BoxStat]:
    """Five-number summary of the per-(dataset, model) mean F1 of each method."""
    if not records:
        raise EmptyStore("no records for box statistics")
    by_method: dict[str, list[float]] = {}
    for cell in _cell_means(records):
        by_method.setdefault(cell["method"], []).append(cell["f1"])
    return [BoxStat(m, *five_numbers(v, method), n=len(v)) for m, v in sorted(by_method.items())]


def boxstats(stores, mode: str | None = None, method: str = "linear") -> list[BoxStat]:
    return boxstats_from_records(load_records(stores, mode), method)


# ---------------------------------------------------------------------------
# emission

def _kind(artifact) -> str:
    if isinstance(artifact, HeatmapData):
        return "heatmap"
    if isinstance(artifact, (list, tuple)) and artifact and all(isinstance(a, SummaryRow) for a in artifact):
        return "summary"
    if isinstance(artifact, (list, tuple)) and artifact and all(isinstance(a, BoxStat) for a in artifact):
        return "box"
    raise TypeError(f"cannot emit {type(artifact).__name__}")


def to_jsonable(artifact) -> dict:
    kind = _kind(artifact)
    out = {"artifact": kind, "positive_class": POSITIVE_CLASS}
    if kind == "heatmap":
        out.update(datasets=list(artifact.datasets), methods=list(artifact.methods),
                   cells=[list(r) for r in artifact.cells], unit="MCC percent")
    else:
        out["rows"] = [asdict(r) for r in artifact]
    return out


def from_jsonable(raw: dict):
    kind = raw.get("artifact")
    if kind == "heatmap":
        return HeatmapData(tuple(raw["datasets"]), tuple(raw["methods"]), tuple(tuple(r) for r in raw["cells"]))
    if kind == "summary":
        return [SummaryRow(**r) for r in raw["rows"]]
    if kind == "box":
        return [BoxStat(**r) for r in raw["rows"]]
    raise ValueError(f"unknown artifact {kind!r}")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.2f}"
    return str(v)


def render_csv(artifact) -> str:
    kind = _kind(artifact)
    buf = io.StringIO()
    buf.write(f"# positive class: {POSITIVE_CLASS}\n")
    w = csv.writer(buf, lineterminator="\n")
    if kind == "heatmap":
        w.writerow(["dataset", *artifact.methods])
        for ds, row in zip(artifact.datasets, artifact.cells):
            w.writerow([ds, *(_fmt(v) for v in row)])
    elif kind == "summary":
        w.writerow(SUMMARY_COLUMNS)
        for r in artifact:
            w.writerow([_fmt(getattr(r, c)) for c in SUMMARY_COLUMNS])
    else:
        cols = ("method", "min", "q1", "median", "q3", "max", "n")
        w.writerow(cols)
        for r in artifact:
            w.writerow([_fmt(getattr(r, c)) for c in cols])
    return buf.getvalue()


def read_csv(path) -> list[dict]:
    """Rows of an emitted CSV as dicts of strings (header comment skipped)."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def ramp(value: float | None) -> str:
    """Fill colour for an MCC percentage in [-100, 100]."""
    if value is None:
        return MISSING_FILL
    t = max(-1.0, min(1.0, value / 100.0))
    lo, hi = (RAMP_MID, RAMP_HIGH) if t >= 0 else (RAMP_MID, RAMP_LOW)
    t = abs(t)
    rgb = [round(a + (b - a) * t) for a, b in zip(lo, hi)]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def _svg(width: int, height: int, body: list[str], title: str) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif">')
    return "\n".join([head, f"<title>{_esc(title)}</title>",
                      f'<rect width="{width}" height="{height}" fill="#ffffff"/>', *body, "</svg>"]) + "\n"


def render_heatmap_svg(h: HeatmapData, width: int = 900, height: int = 500) -> str:
    left, top, right, bottom = 160, 40, 10, 110
    nr, nc = max(1, len(h.datasets)), max(1, len(h.methods))
    cw = (width - left - right) / nc
    ch = (height - top - bottom) / nr
    fs = max(6.0, min(12.0, cw / 5, ch / 2))
    body = [f'<text x="{left}" y="24" font-size="14">MCC (%) by dataset and method; '
            f'positive class = {POSITIVE_CLASS}</text>']
    for i, ds in enumerate(h.datasets):
        y = top + i * ch
        body.append(f'<text x="{left - 6}" y="{y + ch / 2:.1f}" font-size="{fs:.1f}" text-anchor="end" '
                    f'dominant-baseline="middle">{_esc(ds)}</text>')
        for j, v in enumerate(h.cells[i]):
            x = left + j * cw
            body.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{cw:.1f}" height="{ch:.1f}" '
                        f'fill="{ramp(v)}" stroke="#ffffff"/>')
            label = "n/a" if v is None else f"{v:.2f}"
            colour = "#ffffff" if v is not None and abs(v) > 60 else "#000000"
            body.append(f'<text x="{x + cw / 2:.1f}" y="{y + ch / 2:.1f}" font-size="{fs:.1f}" '
                        f'text-anchor="middle" dominant-baseline="middle" fill="{colour}">{label}</text>')
    base = top + nr * ch + 8
    for j, m in enumerate(h.methods):
        x = left + (j + 0.5) * cw
        body.append(f'<text x="{x:.1f}" y="{base:.1f}" font-size="{fs:.1f}" text-anchor="end" '
                    f'transform="rotate(-45 {x:.1f} {base:.1f})">{_esc(m)}</text>')
    return _svg(width, height, body, "MCC heatmap")


def render_box_svg(stats: Sequence[BoxStat], width: int = 900, height: int = 500) -> str:
    left, top, right, bottom = 50, 40, 10, 110
    n = max(1, len(stats))
    cw = (width - left - right) / n
    ph = height - top - bottom

    def ypos(v):
        return top + (1.0 - v) * ph

    body = [f'<text x="{left}" y="24" font-size="14">F1 distribution by method; '
            f'positive class = {POSITIVE_CLASS}</text>']
    for t in (0.0, 0.25, 0.5, 0.75, 1.0):
        body.append(f'<line x1="{left}" x2="{width - right}" y1="{ypos(t):.1f}" y2="{ypos(t):.1f}" '
                    f'stroke="#e0e0e0"/>')
        body.append(f'<text x="{left - 4}" y="{ypos(t):.1f}" font-size="10" text-anchor="end" '
                    f'dominant-baseline="middle">{t:.2f}</text>')
    for j, s in enumerate(stats):
        cx = left + (j + 0.5) * cw
        half = cw * 0.3
        body.append(f'<line x1="{cx:.1f}" x2="{cx:.1f}" y1="{ypos(s.max):.1f}" y2="{ypos(s.min):.1f}" '
                    f'stroke="#333333"/>')
        body.append(f'<rect x="{cx - half:.1f}" y="{ypos(s.q3):.1f}" width="{2 * half:.1f}" '
                    f'height="{ypos(s.q1) - ypos(s.q3):.1f}" fill="{ramp(100 * s.median)}" stroke="#333333"/>')
        body.append(f'<line x1="{cx - half:.1f}" x2="{cx + half:.1f}" y1="{ypos(s.median):.1f}" '
                    f'y2="{ypos(s.median):.1f}" stroke="#000000" stroke-width="2"/>')
        base = top + ph + 8
        body.append(f'<text x="{cx:.1f}" y="{base:.1f}" font-size="11" text-anchor="end" '
                    f'transform="rotate(-45 {cx:.1f} {base:.1f})">{_esc(s.method)}</text>')
    return _svg(width, height, body, "F1 box plot")


def render(artifact, fmt: str, width: int = 900, height: int = 500) -> str:
    if fmt not in FORMATS:
        raise UnknownFormat(f"unknown format {fmt!r} (choose from {', '.join(FORMATS)})")
    kind = _kind(artifact)
    if fmt == "csv":
        return render_csv(artifact)
    if fmt == "json":
        return json.dumps(to_jsonable(artifact), indent=2, sort_keys=True) + "\n"
    if kind == "heatmap":
        return render_heatmap_svg(artifact, width, height)
    if kind == "box":
        return render_box_svg(artifact, width, height)
    raise UnknownFormat("svg output exists for the heatmap and box views only")


def emit(artifact, fmt: str, path, width: int = 900, height: int = 500) -> Path:
    text = render(artifact, fmt, width, height)
    path = Path(path)
    path.write_text(text, encoding="utf-8", newline="\n")
    return path


def build(view: str, stores: Iterable, mode: str = "complete"):
    """The artifact for a CLI view: summary, heatmap or box."""
    if view == "summary":
        return summarize(stores, mode)
    if view == "heatmap":
        return heatmap(stores, mode)
    if view == "box":
        return boxstats(stores, mode)
    raise ValueError(f"unknown view {view!r}")
