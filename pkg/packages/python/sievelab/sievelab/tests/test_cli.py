import json
import math

import pandas as pd
import pytest
from typer.testing import CliRunner

from sievelab import logging_config as logging_config
from sievelab.cli import app
from sievelab.correlated_noise import load_spectrum
from sievelab.errors import IntegrationQualityError
from sievelab.master_equation import ResidualPoint

runner = CliRunner()

QUADRATIC_MODEL = {"quadratic": {"D_qq": 0.01, "D_pp": 0.01, "D_pq": 0.0, "lambda": 0.0, "mu": 0.0}}
VACUUM = {"alpha": 0, "s": 0.0, "theta": 0.0}


@pytest.fixture
def write_config(tmp_path):
    def write(config: dict, name: str = "run.json"):
        path = tmp_path / name
        path.write_text(json.dumps(config))
        return path

    return write


def invoke(*args):
    return runner.invoke(app, [str(arg) for arg in args])


def read_report(path):
    return pd.read_csv(path, comment="#")


def test_entropy_quadratic(write_config, tmp_path):
    config = write_config(
        {"model": QUADRATIC_MODEL, "state": VACUUM, "time": {"t_final": 1.0, "samples": 3}}
    )
    out = tmp_path / "quadratic.csv"
    result = invoke("entropy-quadratic", "--config", config, "--out", out)
    assert result.exit_code == 0

    report = read_report(out)
    assert list(report.columns) == [
        "t [time]",
        "f1 [1/energy]",
        "f2 [1/energy]",
        "f3 [1/energy]",
        "delta_sigma [1]",
    ]
    assert report["t [time]"].tolist() == [0.0, 0.5, 1.0]
    assert report["delta_sigma [1]"].tolist() == pytest.approx([0.0, 0.02, 0.04])
    assert "# config_sha256: " in out.read_text()


def test_output_from_config(write_config, tmp_path):
    out = tmp_path / "configured.csv"
    config = write_config(
        {"model": QUADRATIC_MODEL, "state": VACUUM, "time": {"t_final": 1.0}, "output": str(out)}
    )
    result = invoke("--loglevel", "DEBUG", "entropy-quadratic", "--config", config)
    assert result.exit_code == 0
    assert read_report(out)["delta_sigma [1]"].tolist() == pytest.approx([0.04])


def test_cross_diffusion_is_rejected(write_config, tmp_path):
    model = {"quadratic": {**QUADRATIC_MODEL["quadratic"], "D_pq": 0.001}}
    config = write_config({"model": model, "state": VACUUM, "time": {"t_final": 1.0}})
    out = tmp_path / "rejected.csv"
    result = invoke("entropy-quadratic", "--config", config, "--out", out)
    assert result.exit_code == 2
    assert not out.exists()


def test_bad_configurations(write_config, tmp_path):
    assert invoke("sieve", "--config", tmp_path / "missing.json").exit_code == 1

    config = write_config({"model": QUADRATIC_MODEL, "state": VACUUM, "extra": True})
    assert invoke("sieve", "--config", config).exit_code == 1

    # A quadratic command against a kernel model
    config = write_config({"model": {"kernel": {"gaussian": {"c0": 1.0, "sigma": 2.0}}}})
    assert invoke("entropy-quadratic", "--config", config).exit_code == 1


def test_sieve(write_config, tmp_path):
    model = {"quadratic": {**QUADRATIC_MODEL["quadratic"], "D_qq": 0.02, "D_pp": 0.005}}
    config = write_config(
        {
            "model": model,
            "time": {"times": [0.6 * 2 * math.pi, 20 * math.pi]},
        }
    )
    out = tmp_path / "sieve.csv"
    result = invoke("sieve", "--config", config, "--out", out, "--threads", 2)
    assert result.exit_code == 0

    report = read_report(out)
    assert report["s_star [1]"].tolist()[0] == pytest.approx(0.0469, abs=1e-3)
    assert report["s_star [1]"].tolist()[1] == 0.0
    assert report["flat_flag [flag]"].tolist() == [0, 0]
    assert "condition_degenerate" in out.read_text()


def test_entropy_exact(write_config, tmp_path):
    config = write_config(
        {
            "model": {"channels": {"list": [{"a": 0.1, "b": 0}], "mu": 0.0}},
            "state": {"fock": 0},
            "time": {"t_final": 0.5, "samples": 6},
            "truncation": {"N": 10},
        }
    )
    out = tmp_path / "exact.csv"
    result = invoke("entropy-exact", "--config", config, "--out", out)
    assert result.exit_code == 0

    report = read_report(out)
    assert report["t [time]"].iloc[0] == 0.0
    assert report["linear_entropy [1]"].iloc[0] == pytest.approx(0.0, abs=1e-15)
    assert (report["linear_entropy [1]"].diff().dropna() > 0).all()
    assert "max_trace_drift" in out.read_text()


def test_entropy_correlated(write_config, tmp_path):
    config = write_config(
        {
            "model": {"kernel": {"gaussian": {"c0": 1.0, "sigma": 10.0}}},
            "state": VACUUM,
            "time": {"times": [0.5, 1.0]},
        }
    )
    out = tmp_path / "correlated.csv"
    result = invoke("entropy-correlated", "--config", config, "--out", out, "--threads", 2)
    assert result.exit_code == 0

    report = read_report(out)
    assert report["t [time]"].tolist() == [0.5, 1.0]
    assert report["converged [flag]"].tolist() == [1, 1]
    assert report["short_limit [1]"].tolist() == pytest.approx([1.0, 2.0])
    assert (report["delta_sigma [1]"] > 0).all()
    assert (report["delta_sigma [1]"] <= report["short_limit [1]"]).all()
    assert "# long_limit_D_pp: 0.01" in out.read_text()


def test_zero_spectrum(write_config, tmp_path):
    spectrum = tmp_path / "zero.txt"
    spectrum.write_text("# k weight\n-2 0\n-1 0\n0 0\n1 0\n2 0\n")
    model = {"kernel": {"spectrum_file": str(spectrum)}}

    config = write_config({"model": model, "state": VACUUM, "time": {"times": [1.0]}})
    out = tmp_path / "correlated.csv"
    assert invoke("entropy-correlated", "--config", config, "--out", out).exit_code == 0
    report = read_report(out)
    assert report["delta_sigma [1]"].tolist() == [0.0]
    assert report["short_limit [1]"].tolist() == [0.0]
    assert "# regime: n/a" in out.read_text()

    config = write_config({"model": model, "kernel_table": {"n_r": 5}}, name="table.json")
    out = tmp_path / "table.csv"
    assert invoke("kernel-table", "--config", config, "--out", out).exit_code == 0
    report = read_report(out)
    assert report["c_of_r [energy^2 time]"].tolist() == [0.0] * 5
    assert report["r [length]"].iloc[-1] == pytest.approx(5.0 * math.sqrt(2.0) / 2.0)
    assert "delta_k" not in out.read_text()
    assert (tmp_path / "table.spectrum.txt").exists()


def test_consistency_writes_partial_rows(write_config, tmp_path, mocker):
    def failing_residuals(state, base, t, epsilons, threads):
        yield ResidualPoint(0.02, 1.1e-3, 1.0e-3, 1.0e-4)
        raise IntegrationQualityError("Trace drifted by 1e-5")

    mocker.patch("sievelab.commands.iter_residuals", side_effect=failing_residuals)
    config = write_config(
        {
            "model": {"channels": {"list": [{"a": 1, "b": 0}], "mu": 0.0}},
            "state": {"alpha": 0.5, "s": 0.0, "theta": 0.0},
            "time": {"t_final": 1.0},
            "truncation": {"N": 20},
            "consistency": {"epsilons": [0.02, 0.01]},
        }
    )
    out = tmp_path / "consistency.csv"
    result = invoke("consistency", "--config", config, "--out", out)
    assert result.exit_code == 3

    report = read_report(out)
    assert report["epsilon [1]"].tolist() == [0.02]
    assert report["residual [1]"].tolist() == pytest.approx([1.0e-4])
    assert "# aborted: Trace drifted" in out.read_text()


def test_consistency_requires_epsilons(write_config):
    config = write_config(
        {
            "model": {"channels": {"list": [{"a": 1, "b": 0}], "mu": 0.0}},
            "state": VACUUM,
            "time": {"t_final": 1.0},
        }
    )
    assert invoke("consistency", "--config", config).exit_code == 1


def test_kernel_table(write_config, tmp_path):
    config = write_config(
        {
            "model": {"kernel": {"gaussian": {"c0": 1.0, "sigma": 2.0}}},
            "kernel_table": {"n_r": 11},
        }
    )
    out = tmp_path / "table.csv"
    result = invoke("kernel-table", "--config", config, "--out", out)
    assert result.exit_code == 0

    report = read_report(out)
    assert list(report.columns) == ["r [length]", "c_of_r [energy^2 time]", "g_of_r [1/time]"]
    assert len(report) == 11
    assert report["c_of_r [energy^2 time]"].iloc[0] == pytest.approx(1.0)
    assert report["g_of_r [1/time]"].iloc[0] == pytest.approx(0.0, abs=1e-15)
    # Default range: five correlation lengths
    assert report["r [length]"].iloc[-1] == pytest.approx(10.0)

    spectrum = load_spectrum(tmp_path / "table.spectrum.txt")
    assert spectrum.k_grid[0] == -spectrum.k_grid[-1]
