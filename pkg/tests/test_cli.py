import json
import os

import numpy as np
import pytest

from towerlab.cli import DEFAULTS, _coerce, _merge, _set_dotted, load_config, main


def test_defaults_round_trip_through_merge():
    assert _merge(DEFAULTS, {}) == DEFAULTS
    merged = _merge(DEFAULTS, {"tower": {"k": 16}})
    assert merged["tower"]["k"] == 16
    assert merged["domain"] == DEFAULTS["domain"]


def test_coercion_follows_template_types():
    assert _coerce("16", 8) == 16
    assert _coerce("0.25", 1.0) == 0.25
    assert _coerce("true", False) is True
    assert _coerce("0.1,0.2", [1.0]) == [0.1, 0.2]
    with pytest.raises(ValueError):
        _coerce("maybe", True)


def test_dotted_overrides_and_aliases():
    sub, cfg = load_config(["build-tower", "--tower.k", "16", "--n", "4"])
    assert sub == "build-tower"
    assert cfg["tower"]["k"] == 16
    assert cfg["dimension"] == 4


def test_unknown_paths_rejected():
    with pytest.raises(SystemExit):
        load_config(["build-tower", "--tower.spikes", "3"])
    with pytest.raises(SystemExit):
        load_config(["no-such-command"])


def test_env_var_overrides_output_dir(monkeypatch):
    monkeypatch.setenv("TOWERLAB_OUTPUT_DIR", "/tmp/elsewhere")
    _, cfg = load_config(["build-tower", "--output-dir", "ignored"])
    assert cfg["output-dir"] == "/tmp/elsewhere"


def test_config_file_validation(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"towre": {"k": 8}}))
    with pytest.raises(ValueError):
        load_config(["build-tower", "--config", str(bad)])


def test_build_tower_subcommand_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["build-tower", "--n", "4", "--k", "8",
                 "--output-dir", str(out)])
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["build-tower"]["mu"] == pytest.approx(2.0 / 21.0, abs=1e-9)
    assert summary["failures"] == []
    assert (out / "effective-config.json").exists()
    assert (out / "data" / "tower_profile.csv").exists()


def test_failures_produce_nonzero_exit(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["hole-criterion", "--kind", "annulus", "--delta", "0.05",
                 "--sigma", "0.1", "--output-dir", str(out)])
    assert code == 1
    summary = json.loads((out / "summary.json").read_text())
    assert summary["failures"]
    assert not summary["hole-criterion"]["all_negative"]
