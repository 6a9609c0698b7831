import json

import pytest

from laxbalance.config import ConfigError, RunConfig, from_mapping, load, with_overrides


def test_toml_and_json(tmp_path):
    toml = tmp_path / "run.toml"
    toml.write_text('preset = "burgers-riemann"\nseed = 3\n[grids]\ncells = 50\n[checks]\nnames = ["dpp"]\n')
    cfg = load(toml)
    assert cfg.preset == "burgers-riemann" and cfg.grids.cells == 50 and cfg.checks.names == ("dpp",)
    js = tmp_path / "run.json"
    js.write_text(json.dumps({"preset": "zero", "tolerances": {"val_tol": 1e-8}}))
    cfg = load(js)
    assert cfg.tolerances.val_tol == 1e-8
    assert cfg.build_problem().tol.val_tol == 1e-8


def test_custom_problem():
    cfg = from_mapping({"problem": {"t_max": 1.0, "x_max": 2.0, "flux": {"family": "shifted_quadratic", "a": 1, "c": 0},
                                    "alpha": {"kind": "constant", "value": 1.0}, "u0": 1.0, "ub": 1.0}})
    p = cfg.build_problem()
    assert p.t_max == 1.0 and p.x_max == 2.0 and p.source.alpha(0.5) == 1.0


@pytest.mark.parametrize("data", [
    {},
    {"preset": "zero", "problem": {"t_max": 1, "x_max": 1}},
    {"preset": "nope"},
    {"preset": "zero", "grids": {"cells": 0}},
    {"preset": "zero", "grids": {"colour": 1}},
    {"preset": "zero", "checks": {"names": ["bogus"]}},
    {"preset": "zero", "extra": 1},
    {"preset": "zero", "tolerances": {"val_tol": -1}},
    {"preset": "zero", "trace": {"dt": 0}},
])
def test_invalid_configs(data):
    with pytest.raises(ConfigError):
        from_mapping(data)


def test_bad_problem_and_files(tmp_path):
    with pytest.raises(ConfigError):
        from_mapping({"problem": {"x_max": 1.0}}).build_problem()
    with pytest.raises(ConfigError):
        load(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("preset = [")
    with pytest.raises(ConfigError):
        load(bad)


def test_overrides():
    cfg = RunConfig(preset="zero")
    out = with_overrides(cfg, preset="burgers-boundary", cells=10, checks=["weak"], seed=None)
    assert out.preset == "burgers-boundary" and out.grids.cells == 10 and out.checks.names == ("weak",)
    custom = from_mapping({"problem": {"t_max": 1.0, "x_max": 2.0}})
    assert with_overrides(custom, preset="zero").problem is None
    assert cfg.as_dict()["checks"]["names"] == ["bln", "entropy"]
