import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from fsbench.data import from_arrays
from fsbench.errors import InvalidConfig, PluginCrashed, PluginTimeout, ProtocolViolation
from fsbench.plugin import BUNDLED_PLUGIN_DIR, discover_plugins, plugin_method, run_plugin
from fsbench.selection import Registry, SelectorParams, run_selector

FIXTURES = Path(__file__).parent / "fixtures" / "plugins"


@pytest.fixture
def data():
    rng = np.random.default_rng(0)
    X = (rng.random((12, 5)) < 0.5).astype(float)
    y = np.array([0, 1] * 6)
    return from_arrays(X, y, name="p")


def _fixture(pid):
    return {pm.id: pm for pm in discover_plugins(FIXTURES)}[pid]


def test_discovery_skips_bad_directories(caplog):
    found = discover_plugins(FIXTURES, reserved={"mad"})
    ids = [pm.id for pm in found]
    assert "no_desc" not in ids and "mad" not in ids
    assert ids == sorted(ids)
    assert "needs about.desc" in caplog.text
    assert any(r.levelname == "ERROR" and "collides" in r.message for r in caplog.records)


def test_discovery_of_empty_or_missing_root(tmp_path, caplog):
    assert discover_plugins(tmp_path) == []
    assert discover_plugins(tmp_path / "absent") == []
    assert "does not exist" in caplog.text


def test_discovery_rejects_bad_manifest(tmp_path, caplog):
    sub = tmp_path / "broken"
    shutil.copytree(FIXTURES / "passthrough", sub)
    (sub / "plugin.json").write_text(json.dumps({"id": "broken", "kind": "Sideways", "executable": "run.py"}))
    assert discover_plugins(tmp_path) == []
    assert "skipping plugin directory" in caplog.text


def test_bundled_even_columns(data):
    (pm,) = discover_plugins(BUNDLED_PLUGIN_DIR)
    assert pm.id == "even_columns"
    assert run_plugin(pm, data).selected == (0, 2, 4)
    assert run_plugin(pm, data, {"offset": 1}).selected == (1, 3)
    with pytest.raises(PluginCrashed):
        run_plugin(pm, data, {"offset": 7})


def test_passthrough_selects_everything(data):
    assert run_plugin(_fixture("passthrough"), data).selected == tuple(range(data.n_cols))


@pytest.mark.parametrize("pid", ["extra_column", "reorder_rows", "drop_label", "mutate_input"])
def test_malformed_output(pid, data):
    with pytest.raises(ProtocolViolation):
        run_plugin(_fixture(pid), data)


def test_crash_and_timeout(data):
    with pytest.raises(PluginCrashed, match="boom"):
        run_plugin(_fixture("crash"), data)
    with pytest.raises(PluginTimeout):
        run_plugin(_fixture("sleeper"), data, timeout=0.5)


def test_arguments_and_seed(data, caplog):
    pm = _fixture("first_k")
    assert run_plugin(pm, data, {"k": 3}).selected == (0, 1, 2)
    with pytest.raises(InvalidConfig):
        run_plugin(pm, data, {"colour": "red"})
    with pytest.raises(InvalidConfig):
        run_plugin(pm, data, {"k": "three"})
    r = run_selector(plugin_method(pm), data, SelectorParams(seed=9, extra={"k": "2"}))
    assert r.selected == (0, 1)
    assert r.params["seed"] == "9"


def test_dataset_is_not_mutated(data):
    before = data.features.copy()
    run_plugin(_fixture("passthrough"), data)
    assert np.array_equal(before, data.features)


def test_plugin_through_registry_and_env(monkeypatch, data):
    monkeypatch.setenv("FSBENCH_PLUGIN_DIR", str(BUNDLED_PLUGIN_DIR))
    reg = Registry.default()
    assert "even_columns" in reg
    r = reg.select("even_columns", data)
    assert r.selected == (0, 2, 4) and r.method_id == "even_columns"


def test_label_column_name_clash():
    X = np.eye(4)
    d = from_arrays(X, [0, 1, 0, 1], feature_names=["class", "b", "c", "d"])
    (pm,) = discover_plugins(BUNDLED_PLUGIN_DIR)
    assert run_plugin(pm, d).selected == (0, 2)
