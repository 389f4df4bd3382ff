"""End-to-end command line runs: artifacts, exit codes, determinism."""
import csv
import math

import pytest

from stamlab import DeficitReport
from stamlab.cli import _asserted_ok, main

SMALL = """
resolution = 512
lambda_grid = [0.3, 0.7]
t_grid = [0.25]
checks = ["functionals", "deficits"]
pairs = [["gaussian", "logistic"]]

[[distribution]]
family = "gaussian"

[[distribution]]
family = "logistic"

[[distribution]]
family = "uniform"
"""


@pytest.fixture()
def config_path(tmp_path):
    p = tmp_path / "small.toml"
    p.write_text(SMALL)
    return p


def _run(*argv):
    return main(list(argv))


def _read_csv(path):
    with path.open() as fh:
        return list(csv.reader(fh))


def test_functionals_command(config_path, tmp_path, capsys):
    out = tmp_path / "out"
    code = _run("functionals", "--config", str(config_path), "--output-dir", str(out))
    assert code == 0
    assert "wrote" in capsys.readouterr().out
    rows = _read_csv(out / "functionals.csv")
    assert rows[0][:2] == ["name", "family"]
    assert rows[0][2:9] == [
        "ent_L", "fisher_L", "rel_entropy", "rel_fisher", "k_L", "k_gauss", "m_gauss",
    ]
    by_name = {r[0]: r for r in rows[1:]}
    assert set(by_name) == {"gaussian", "logistic", "uniform"}
    # uniform has no Fisher capability: value printed as nan, flagged False
    urow = by_name["uniform"]
    assert urow[3] == "nan"
    assert urow[rows[0].index("fisher_L_finite")] == "False"
    assert float(by_name["gaussian"][2]) == pytest.approx(
        0.5 * math.log(2 * math.pi * math.e), abs=1e-5
    )


def test_deficit_command(config_path, tmp_path, capsys):
    out = tmp_path / "out"
    code = _run(
        "deficit", "gaussian", "logistic", "0.3",
        "--config", str(config_path), "--output-dir", str(out),
    )
    assert code == 0
    text = capsys.readouterr().out
    assert "entropy" in text and "fisher" in text
    rows = _read_csv(out / "deficits.csv")
    assert rows[0] == [
        "pair", "lambda", "type", "deficit", "bound", "margin",
        "c0", "c1", "err", "bound_valid", "presmooth_t",
    ]
    assert len(rows) == 3
    assert rows[1][0] == "(gaussian, logistic)"
    assert rows[1][9] == "True"


def test_deficit_rejects_unknown_name(config_path, tmp_path, capsys):
    code = _run(
        "deficit", "gaussian", "nope", "0.3",
        "--config", str(config_path), "--output-dir", str(tmp_path / "o"),
    )
    assert code == 2
    assert "unknown distribution 'nope'" in capsys.readouterr().err


def test_deficit_rejects_bad_lambda(config_path, tmp_path, capsys):
    code = _run(
        "deficit", "gaussian", "logistic", "1.5",
        "--config", str(config_path), "--output-dir", str(tmp_path / "o"),
    )
    assert code == 2
    assert "outside [0, 1]" in capsys.readouterr().err


def test_bad_config_exits_2(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text("pairs = [[")
    assert _run("sweep", "--config", str(p)) == 2
    assert "config error:" in capsys.readouterr().err
    p.write_text("resolution = 64")
    assert _run("sweep", "--config", str(p)) == 2


def test_resolution_flag_floor(config_path, capsys):
    assert _run("sweep", "--config", str(config_path), "--resolution", "128") == 2
    assert "below the minimum" in capsys.readouterr().err


def test_sweep_and_determinism(config_path, tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    for out in (out_a, out_b):
        code = _run("sweep", "--config", str(config_path), "--output-dir", str(out))
        assert code == 0
    for name in ("deficits.csv", "deficit_gaussian_logistic.svg"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()
    rows = _read_csv(out_a / "deficits.csv")
    # 1 pair x 2 lambdas x 2 deficit kinds
    assert len(rows) == 5


def test_sweep_no_plots(config_path, tmp_path):
    out = tmp_path / "out"
    code = _run(
        "sweep", "--config", str(config_path), "--output-dir", str(out), "--no-plots"
    )
    assert code == 0
    assert not list(out.glob("*.svg"))


def test_poincare_command(config_path, tmp_path, capsys):
    out = tmp_path / "out"
    code = _run(
        "poincare", "--config", str(config_path), "--output-dir", str(out),
        "--resolution", "4096",
    )
    assert code == 0
    rows = _read_csv(out / "poincare.csv")
    assert rows[0] == ["name", "family", "c", "gap", "residual", "refinement_ratio"]
    vals = {r[0]: float(r[2]) for r in rows[1:]}
    assert vals["gaussian"] == pytest.approx(1.0, abs=1e-3)
    assert vals["uniform"] == pytest.approx(12.0 / math.pi**2, abs=2e-3)
    capsys.readouterr()
    # at the manifest's low resolution the logistic gap has not converged;
    # the refinement gate must catch that honestly
    code = _run("poincare", "--config", str(config_path), "--output-dir", str(out))
    assert code == 1
    assert "refinement ratio out of band" in capsys.readouterr().out


def test_plot_command(config_path, tmp_path):
    out = tmp_path / "out"
    code = _run("plot", "--config", str(config_path), "--output-dir", str(out))
    assert code == 0
    made = {p.name for p in out.glob("*.svg")}
    assert made == {
        "deficit_gaussian_logistic.svg",
        "flow_gaussian.svg",
        "flow_logistic.svg",
        "flow_uniform.svg",
    }


def test_verify_command(config_path, tmp_path, capsys):
    out = tmp_path / "out"
    # the identity tolerances are reporting-grade claims; 512 nodes is below
    # what the uniform's jump discontinuity needs to meet them
    code = _run(
        "verify", "--config", str(config_path), "--output-dir", str(out),
        "--resolution", "1024",
    )
    text = capsys.readouterr().out
    assert code == 0, text
    assert "PASS:" in text
    rows = _read_csv(out / "lemmas.csv")
    assert rows[0] == [
        "group", "check", "subject", "passed", "asserted", "margin", "err", "detail",
    ]
    groups = {r[0] for r in rows[1:]}
    assert groups == {"functionals", "deficits"}


def test_output_dir_env(config_path, tmp_path, monkeypatch):
    env_dir = tmp_path / "from-env"
    monkeypatch.setenv("STAMLAB_OUTPUT_DIR", str(env_dir))
    assert _run("functionals", "--config", str(config_path)) == 0
    assert (env_dir / "functionals.csv").exists()


def _fake(deficit, margin, bound_valid=True):
    return DeficitReport(
        kind="entropy", lam=0.5, deficit=deficit, bound=0.0, margin=margin,
        c0=1.0, c1=1.0, err=1e-6, bound_valid=bound_valid,
    )


def test_asserted_ok_logic():
    assert _asserted_ok([("p", _fake(0.1, 0.1))])
    assert not _asserted_ok([("p", _fake(-1.0, -1.0))])
    assert not _asserted_ok([("p", _fake(0.1, -1e-3))])
    # an invalid bound asserts nothing about the margin
    assert _asserted_ok([("p", _fake(0.1, float("nan"), bound_valid=False))])
