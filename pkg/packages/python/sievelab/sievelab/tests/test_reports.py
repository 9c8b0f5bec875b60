import pathlib
from datetime import datetime

import pytest

from sievelab import logging_config as logging_config
from sievelab.correlated_noise import GaussianKernel, kernel_to_spectrum, load_spectrum
from sievelab.errors import ReportIOError
from sievelab.reports import CsvReport, spectrum_path, write_reports

GENERATED_AT = datetime(2024, 5, 17, 9, 30, 0)


def sample_report():
    report = CsvReport.from_rows(
        {"t": "time", "delta_sigma": "1"},
        [{"t": 0.0, "delta_sigma": 0.0}, {"t": 1.0, "delta_sigma": 0.04}],
    )
    report.footer.append("regime: long")
    return report


def test_render():
    rendered = sample_report().render("abc123", GENERATED_AT)
    assert rendered.splitlines() == [
        "t [time],delta_sigma [1]",
        "0,0",
        "1,0.040000000000000001",
        "# config_sha256: abc123",
        "# regime: long",
        "# generated_at: 2024-05-17 09:30:00",
    ]


def test_render_leaves_missing_values_empty():
    report = CsvReport.from_rows(
        {"t": "time", "s_star": "1"}, [{"t": 2.0, "s_star": None}]
    )
    assert report.render("h", GENERATED_AT).splitlines()[1] == "2,"


def test_write_to_file(tmp_path, caplog):
    path = tmp_path / "report.csv"
    sample_report().write(path, "abc123")
    lines = path.read_text().splitlines()
    assert lines[0] == "t [time],delta_sigma [1]"
    assert lines[-1].startswith("# generated_at: ")
    assert "Wrote 2 rows" in caplog.text


def test_write_to_stdout(capsys):
    sample_report().write(None, "abc123")
    assert "# config_sha256: abc123" in capsys.readouterr().out


def test_write_to_missing_directory(tmp_path):
    with pytest.raises(ReportIOError) as excinfo:
        sample_report().write(tmp_path / "missing" / "report.csv", "abc123")
    assert excinfo.value.exit_code == 4


def test_spectrum_path():
    assert spectrum_path(pathlib.Path("runs/table.csv"), None) == pathlib.Path("runs/table.spectrum.txt")
    assert spectrum_path(pathlib.Path("runs/table.csv"), pathlib.Path("k.txt")) == pathlib.Path("k.txt")
    assert spectrum_path(None, None) is None


def test_write_reports_with_spectrum(tmp_path):
    report = sample_report()
    spectrum = kernel_to_spectrum(GaussianKernel(1.0, 2.0), n_k=51)
    report.spectrum = spectrum
    path = tmp_path / "table.csv"
    write_reports(report, path, "abc123")

    assert path.exists()
    loaded = load_spectrum(tmp_path / "table.spectrum.txt")
    assert loaded.k_grid.tolist() == spectrum.k_grid.tolist()
    assert loaded.weights.tolist() == spectrum.weights.tolist()

    explicit = tmp_path / "weights.txt"
    write_reports(report, path, "abc123", explicit)
    assert explicit.exists()


def test_write_reports_without_spectrum_path(capsys, caplog):
    report = sample_report()
    report.spectrum = kernel_to_spectrum(GaussianKernel(1.0, 2.0), n_k=51)
    write_reports(report, None, "abc123")
    assert "t [time]" in capsys.readouterr().out
    assert "skipping" in caplog.text
