"""Manifest parsing: defaults, happy path, and field-naming errors."""
from pathlib import Path

import pytest

from stamlab import (
    ValidationError,
    default_config,
    isotropic_spec,
    load_config,
    parse_config,
    scaled_resolution,
)

GOOD = """
resolution = 512
output_dir = "artifacts"
lambda_grid = [0.25, 0.5]
t_grid = [0.1]
checks = ["functionals", "poincare"]
plots = false
pairs = [["g", "wide_gamma"]]

[[distribution]]
name = "g"
family = "gaussian"

[[distribution]]
name = "wide_gamma"
family = "gamma"
shape = 6.0
"""


def test_defaults():
    cfg = default_config()
    assert list(cfg.distributions) == [
        "gaussian", "uniform", "logistic", "gumbel", "smoothed_laplace", "gamma4",
    ]
    assert cfg.pairs == (
        ("uniform", "logistic"),
        ("logistic", "smoothed_laplace"),
        ("gaussian", "gamma4"),
        ("gumbel", "logistic"),
    )
    assert cfg.lambda_grid == (0.1, 0.3, 0.5, 0.7, 0.9)
    assert cfg.t_grid == (0.25, 0.5, 1.0)
    assert cfg.resolution == 4096
    assert cfg.checks == frozenset({"all"})
    assert cfg.plots
    assert cfg.wants("deficits") and cfg.wants("lemmas")
    assert cfg.distributions["gamma4"].params == (("loc", -2.0), ("scale", 0.5), ("shape", 4.0))


def test_happy_path_toml(tmp_path):
    cfg = parse_config(GOOD, base_dir=tmp_path)
    assert list(cfg.distributions) == ["g", "wide_gamma"]
    assert cfg.pairs == (("g", "wide_gamma"),)
    assert cfg.lambda_grid == (0.25, 0.5)
    assert cfg.resolution == 512
    assert cfg.output_dir == tmp_path / "artifacts"
    assert cfg.checks == frozenset({"functionals", "poincare"})
    assert not cfg.plots
    assert cfg.wants("functionals") and not cfg.wants("deficits")


def test_load_config_roundtrip(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text(GOOD)
    assert load_config(p).output_dir == tmp_path / "artifacts"
    with pytest.raises(ValidationError, match="cannot read config"):
        load_config(tmp_path / "missing.toml")


def test_output_dir_env(monkeypatch, tmp_path):
    monkeypatch.setenv("STAMLAB_OUTPUT_DIR", str(tmp_path / "env-out"))
    assert default_config().output_dir == tmp_path / "env-out"
    monkeypatch.delenv("STAMLAB_OUTPUT_DIR")
    assert default_config().output_dir == Path("stamlab-out")


def _err(text):
    with pytest.raises(ValidationError) as ei:
        parse_config(text)
    return str(ei.value)


def test_unknown_top_level_key():
    assert "unknown config key(s) ['resolutoin']" in _err("resolutoin = 512")


def test_bad_family():
    msg = _err('[[distribution]]\nfamily = "cauchy"')
    assert "distribution[0].family = 'cauchy'" in msg


def test_duplicate_name():
    msg = _err(
        '[[distribution]]\nfamily = "gaussian"\n[[distribution]]\nfamily = "gaussian"'
    )
    assert "distribution[1].name = 'gaussian' duplicates" in msg


def test_stray_family_parameter():
    msg = _err('[[distribution]]\nfamily = "gaussian"\nshape = 2.0')
    assert "unknown parameter(s) ['shape']" in msg


def test_bad_family_parameter_value():
    msg = _err('[[distribution]]\nfamily = "gamma"\nshape = 0.5')
    assert "shape must be >= 1" in msg


def test_pair_arity_and_names():
    assert "pairs[0]" in _err('pairs = [["gaussian"]]')
    assert "references unknown distribution 'nope'" in _err('pairs = [["gaussian", "nope"]]')


def test_lambda_grid_range():
    assert "lambda_grid[1] = 1.5 is outside [0, 1]" in _err("lambda_grid = [0.1, 1.5]")


def test_t_grid_range():
    assert "t_grid[0] = -0.5 is outside [0, inf)" in _err("t_grid = [-0.5]")


def test_resolution_gates():
    assert "below the minimum 256" in _err("resolution = 128")
    assert "must be an integer" in _err("resolution = 3.5")


def test_checks_names():
    assert "checks[0] = 'everything'" in _err('checks = ["everything"]')


def test_plots_type():
    assert "must be a boolean" in _err('plots = "yes"')


def test_output_dir_type():
    assert "must be a nonempty string" in _err('output_dir = ""')


def test_toml_syntax_error():
    assert "config parse error" in _err("pairs = [[")


def test_scaled_resolution():
    g = isotropic_spec("gaussian")
    gamma = isotropic_spec("gamma", shape=4.0)
    lap = isotropic_spec("laplace")
    assert scaled_resolution(g, 4096) == 4096
    assert scaled_resolution(gamma, 4096) == 32769
    assert scaled_resolution(lap, 4096) == 262145
    assert scaled_resolution(gamma, 2048) == 16384
    assert scaled_resolution(g, 2048) == 2048
    assert scaled_resolution(g, 300) == 300
    # never below the validation floor even for tiny requests
    assert scaled_resolution(g, 100) == 256
