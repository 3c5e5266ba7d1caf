"""Run configuration: defaults, validation, and the flat config-file format."""

import pytest

from abtopo.config import RunConfig, config_to_text, load_config, parse_config_text


def test_defaults_are_reference_constants():
    cfg = RunConfig()
    assert cfg.candidate_eps == 0.01
    assert cfg.omega_q_cut == 0.05
    assert cfg.omega_r_cut == 0.97
    assert cfg.area_margin == 0.05
    assert cfg.group_gap == 0.01
    assert cfg.plateau_eps == 0.01
    assert cfg.plateau_delta_r == 10.0
    assert cfg.disorder_w == 0.3
    assert cfg.reps == 200
    assert cfg.calibration_reps == 50
    assert cfg.phi == 0.7375
    cfg.validate()


def test_parse_and_override():
    text = """
    # comment line
    r0 = 14.5
    phi = 0.69      # inline comment
    reps = 16
    flux_grid = 0.1, 0.2, 0.3
    """
    cfg = parse_config_text(text)
    assert cfg.r0 == 14.5
    assert cfg.phi == 0.69
    assert cfg.reps == 16
    assert cfg.flux_grid == (0.1, 0.2, 0.3)
    # untouched keys keep their defaults
    assert cfg.disorder_w == 0.3


def test_parse_rejects_unknown_key_and_bad_line():
    with pytest.raises(ValueError, match="unknown config key"):
        parse_config_text("not_a_key = 3")
    with pytest.raises(ValueError, match="key = value"):
        parse_config_text("just some words")


def test_round_trip(tmp_path):
    cfg = RunConfig(r0=11.0, phi=0.5, reps=7, flux_grid=(0.25, 0.5))
    path = tmp_path / "run.cfg"
    path.write_text(config_to_text(cfg))
    assert load_config(path) == cfg


def test_validation_rejects_bad_values():
    for bad in (
        {"r0": -1.0},
        {"candidate_eps": 0.0},
        {"omega_r_cut": -0.5},
        {"reps": 0},
        {"pump_steps": 1},
        {"overlap_floor": 1.5},
        {"disorder_w": -0.1},
        {"flux_grid": (0.1, -0.2)},
    ):
        with pytest.raises(ValueError):
            RunConfig(**bad).validate()


def test_replace_validates():
    cfg = RunConfig()
    assert cfg.replace(phi=0.5).phi == 0.5
    with pytest.raises(ValueError):
        cfg.replace(r0=-3.0)


def test_effective_workers(monkeypatch):
    cfg = RunConfig(workers=3)
    assert cfg.effective_workers() == 3
    cfg = RunConfig(workers=0)
    monkeypatch.setenv("ABTOPO_WORKERS", "5")
    assert cfg.effective_workers() == 5
    monkeypatch.delenv("ABTOPO_WORKERS")
    assert cfg.effective_workers() >= 1


def test_cache_dir_default():
    cfg = RunConfig(out_dir="X")
    assert cfg.effective_cache_dir().startswith("X")
    assert RunConfig(cache_dir="Y").effective_cache_dir() == "Y"
