import json
import subprocess
import sys

import numpy as np
import pytest

from fsbench import cli
from fsbench.data import write_csv
from fsbench.evaluation import read_store
from fsbench.report import read_csv
from fsbench.synthetic import make_planted

FAST = ["--model-arg", "rf.n_trees=10", "--model-arg", "svm-linear.epochs=10"]


@pytest.fixture(autouse=True)
def _no_env_plugins(monkeypatch):
    monkeypatch.delenv("FSBENCH_PLUGIN_DIR", raising=False)


@pytest.fixture(scope="module")
def csvs(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    paths = []
    for i, name in enumerate(("alpha", "beta")):
        d, _ = make_planted(n_rows=120, n_informative=3, n_noise=7, seed=i)
        p = root / f"{name}.csv"
        write_csv(d, p)
        paths.append(str(p))
    return paths


def _run(tmp_path, csvs, *extra):
    out = tmp_path / "run"
    argv = ["run", "--dataset", csvs[0], "--dataset", csvs[1], "--methods", "chi_square,mad,pearson",
            "--output-dir", str(out), *FAST, *extra]
    return cli.main(argv), out


def test_list_methods(capsys):
    assert cli.main(["list-methods"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 1 + 17
    assert "Ordering" in lines[1] or "Subset" in lines[1]


def test_list_with_plugin_dir(capsys):
    from fsbench.plugin import BUNDLED_PLUGIN_DIR

    cli.main(["list-methods", "--plugin-dir", str(BUNDLED_PLUGIN_DIR)])
    assert "even_columns" in capsys.readouterr().out


def test_describe(capsys):
    assert cli.main(["describe", "svm"]) == 0
    text = capsys.readouterr().out
    assert "svm-linear" in text and "linear" in text.lower() and "RBF" in text
    assert cli.main(["describe", "relieff"]) == 0
    assert ".k=" in capsys.readouterr().out
    assert cli.main(["describe", "no_such_method"]) != 0
    assert "no method or model" in capsys.readouterr().err


def test_run_grid_and_refuse_rerun(tmp_path, csvs, capsys):
    code, out = _run(tmp_path, csvs)
    assert code == 0
    records = read_store(out / "records.jsonl")
    assert len(records) == 2 * 3 * 3 * 5
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["n_records"] == 90 and manifest["seed"] == 42
    assert set(manifest["versions"]) == {"python", "numpy", "scipy"}
    assert (out / "run.log").read_text().count("f1=") == 90
    assert (out / "failures.jsonl").read_text() == ""

    code, _ = _run(tmp_path, csvs)
    assert code == 2
    assert "--force" in capsys.readouterr().err
    code, _ = _run(tmp_path, csvs, "--force")
    assert code == 0


def test_manifest_reproduces_store(tmp_path, csvs):
    _, out = _run(tmp_path, csvs)
    again = tmp_path / "again"
    assert cli.main(["run", "--config", str(out / "run_manifest.json"), "--output-dir", str(again)]) == 0
    assert (out / "records.jsonl").read_bytes() == (again / "records.jsonl").read_bytes()


def test_config_file_with_flag_override(tmp_path, csvs):
    cfg = {"datasets": [{"path": csvs[0]}], "methods": ["mad"], "models": ["knn"], "k_folds": 3,
           "output_dir": str(tmp_path / "from-file")}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "from-flags"
    assert cli.main(["run", "--config", str(path), "--k-folds", "4", "--output-dir", str(out)]) == 0
    records = read_store(out / "records.jsonl")
    assert len(records) == 4
    assert not (tmp_path / "from-file").exists()


def test_run_errors_and_fallbacks(tmp_path, csvs):
    out = tmp_path / "fail"
    code = cli.main(["run", "--dataset", csvs[0], "--methods", "sigpid,mad", "--models", "knn",
                     "--output-dir", str(out)])
    # no kinds sidecar: sigpid falls back to every column with a warning
    assert code == 0
    assert "feature kinds unknown" in (out / "run.log").read_text()
    bad = tmp_path / "bad"
    assert cli.main(["run", "--dataset", csvs[0], "--methods", "mad", "--models", "knn",
                     "--method-arg", "mad.bogus=1", "--output-dir", str(bad)]) == 2
    assert cli.main(["run", "--dataset", "missing.csv", "--methods", "mad", "--output-dir", str(bad)]) == 2
    assert cli.main(["run", "--dataset", csvs[0], "--methods", "mad", "--k-folds", "1",
                     "--output-dir", str(bad)]) == 2


def test_failed_task_sets_exit_code(tmp_path):
    rng = np.random.default_rng(0)
    from fsbench.data import from_arrays

    d = from_arrays((rng.random((40, 4)) < 0.5).astype(float), [0, 1] * 20, feature_kinds=["A"] * 4)
    path = tmp_path / "apis.csv"
    write_csv(d, path)
    (tmp_path / "apis.kinds.json").write_text(json.dumps({n: "A" for n in d.feature_names}))
    out = tmp_path / "run"
    code = cli.main(["run", "--dataset", str(path), "--methods", "sigpid,mad", "--models", "knn",
                     "--output-dir", str(out)])
    assert code == 1
    (failure,) = [json.loads(x) for x in (out / "failures.jsonl").read_text().splitlines()]
    assert failure["method"] == "sigpid"
    assert len(read_store(out / "records.jsonl")) == 5


def test_report_views(tmp_path, csvs, capsys):
    _, out = _run(tmp_path, csvs)
    store = str(out / "records.jsonl")
    assert cli.main(["report", store]) == 0
    path = capsys.readouterr().out.strip()
    rows = read_csv(path)
    assert [r["method"] for r in rows] == ["chi_square", "mad", "pearson"]
    assert {"f1", "recall"} <= set(rows[0])

    target = tmp_path / "heat.svg"
    assert cli.main(["report", store, "--view", "heatmap", "--format", "svg", "--output", str(target)]) == 0
    assert target.read_text().startswith("<svg")
    assert cli.main(["report", store, "--view", "box", "--format", "json", "--output", str(tmp_path / "b.json")]) == 0
    assert json.loads((tmp_path / "b.json").read_text())["artifact"] == "box"

    assert cli.main(["report", store, "--format", "xlsx"]) == 2
    assert cli.main(["report", store, "--mode", "balanced"]) == 2
    assert cli.main(["report", str(tmp_path / "missing.jsonl")]) == 2


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "fsbench", "describe", "nope"], capture_output=True, text=True)
    assert proc.returncode == 2 and proc.stdout == ""
