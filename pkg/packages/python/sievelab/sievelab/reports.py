import logging
import pathlib
import sys
from dataclasses import dataclass, field
from datetime import datetime

import pandas as pd

from sievelab import logging_config as logging_config
from sievelab.correlated_noise import TabulatedSpectrum, save_spectrum
from sievelab.errors import ReportIOError

logger = logging.getLogger(__name__)


@dataclass
class CsvReport:
    """A table plus '#' footer lines; headers carry units as `name [unit]`."""

    frame: pd.DataFrame
    units: dict[str, str] = field(default_factory=dict)
    footer: list[str] = field(default_factory=list)
    spectrum: TabulatedSpectrum | None = None

    @classmethod
    def from_rows(cls, columns: dict[str, str], rows: list[dict]) -> "CsvReport":
        """`columns` maps each column name to its unit, in output order."""
        return cls(pd.DataFrame(rows, columns=list(columns)), dict(columns))

    def render(self, config_hash: str, generated_at: datetime | None = None) -> str:
        frame = self.frame.rename(
            columns={name: f"{name} [{unit}]" for name, unit in self.units.items()}
        )
        body = frame.to_csv(index=False, float_format="%.17g", na_rep="", lineterminator="\n")
        stamp = (generated_at or datetime.now()).strftime("%Y-%m-%d %H:%M:%S")
        lines = [f"# config_sha256: {config_hash}"]
        lines += [f"# {line}" for line in self.footer]
        lines.append(f"# generated_at: {stamp}")
        return body + "\n".join(lines) + "\n"

    def write(self, path: pathlib.Path | None, config_hash: str):
        content = self.render(config_hash)
        if path is None:
            sys.stdout.write(content)
            return
        try:
            with open(path, "w") as f:
                f.write(content)
        except OSError as e:
            raise ReportIOError(f"Cannot write report {path}: {e}") from e
        logger.info(f"Wrote {len(self.frame)} rows to `{path}`.")


def spectrum_path(report_path: pathlib.Path | None, requested: pathlib.Path | None) -> pathlib.Path | None:
    """Where the second (k, weight) file goes: explicit path, else next to the report."""
    if requested is not None:
        return requested
    if report_path is None:
        return None
    return report_path.with_name(f"{report_path.stem}.spectrum.txt")


def write_reports(
    report: CsvReport,
    path: pathlib.Path | None,
    config_hash: str,
    spectrum_out: pathlib.Path | None = None,
):
    report.write(path, config_hash)
    if report.spectrum is None:
        return
    target = spectrum_path(path, spectrum_out)
    if target is None:
        logger.info("No path for the spectrum table, skipping it.")
        return
    save_spectrum(report.spectrum, target)
    logger.info(f"Wrote {report.spectrum.k_grid.size} spectrum samples to `{target}`.")
