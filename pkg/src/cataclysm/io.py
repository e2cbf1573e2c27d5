"""CSV emission and run manifests.

Floats are written with ``repr`` so files are exact and byte-stable across
runs and platforms with IEEE doubles.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from cataclysm import __version__


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_rows(path: str | Path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def quarter_label(year: int, quarter: int) -> str:
    return f"{int(year)}Q{int(quarter)}"


def write_quarterly(path, runs) -> Path:
    """National accounts per run and quarter.

    ``runs`` is an iterable of ``(run_id, TimeSeries)``.
    """
    runs = list(runs)
    S = runs[0][1].gva.shape[1] if runs else 0
    header = ["run_id", "quarter", "gdp_prod", "gdp_exp", "unemployment", "debt_to_gdp", "price_index"]
    header += [f"gva_s{k + 1}" for k in range(S)]

    def rows():
        for run_id, ts in runs:
            for i in range(len(ts.year)):
                yield [run_id, quarter_label(ts.year[i], ts.quarter[i]), ts.gdp_production[i],
                       ts.gdp_expenditure[i], ts.unemployment[i], ts.debt_to_gdp[i],
                       ts.price_index[i], *ts.gva[i]]

    return write_rows(path, header, rows())


def write_diff_metrics(path, metrics) -> Path:
    """Ensemble mean and standard deviation of every difference series, per year."""
    S = metrics.gva_mean.shape[1]
    header = ["year", "years_since_shock", "gdp_mean", "gdp_std", "unemployment_mean", "unemployment_std",
              "debt_to_gdp_mean", "debt_to_gdp_std"]
    for k in range(S):
        header += [f"gva_s{k + 1}_mean", f"gva_s{k + 1}_std"]
    rows = []
    for i, y in enumerate(metrics.years):
        row = [int(y), int(y) - metrics.shock_year + 1, metrics.gdp_mean[i], metrics.gdp_std[i],
               metrics.unemployment_mean[i], metrics.unemployment_std[i],
               metrics.debt_mean[i], metrics.debt_std[i]]
        for k in range(S):
            row += [metrics.gva_mean[i, k], metrics.gva_std[i, k]]
        rows.append(row)
    return write_rows(path, header, rows)


def write_sweep(path, sweep, shock_year: int) -> Path:
    """One row per gridpoint; mean and std of the cumulative GDP difference per year."""
    post = [i for i, y in enumerate(sweep.years) if y >= shock_year]
    header = ["gridpoint", "loss_fraction_capital", "loss_share_gdp"]
    for i in post:
        k = int(sweep.years[i]) - shock_year + 1
        header += [f"mean_y{k}", f"std_y{k}"]
    rows = []
    for g in range(len(sweep.grid)):
        row = [g, sweep.grid[g], sweep.loss_share_of_gdp[g]]
        for i in post:
            row += [sweep.mean_by_year[g, i], sweep.std_by_year[g, i]]
        rows.append(row)
    return write_rows(path, header, rows)


def write_summary(path, sweep) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        f"year: {sweep.year}",
        f"gridpoints: {len(sweep.grid)}",
        f"inflection_point: {_fmt(sweep.inflection_point) or 'absent'}",
        f"argmax: {_fmt(sweep.argmax) or 'absent'}",
    ]
    path.write_text("\n".join(lines) + "\n")
    return path


def emit_plot_data(path, x, mean, std) -> Path:
    """Band data ``x, mean, mean_minus_sd, mean_plus_sd`` for one series."""
    x = np.asarray(x)
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    rows = ([x[i], mean[i], mean[i] - std[i], mean[i] + std[i]] for i in range(len(x)))
    return write_rows(path, ["x", "mean", "mean_minus_sd", "mean_plus_sd"], rows)


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    config_hash: str
    seeds: list
    version: str = __version__
    wall_clock_seconds: float = 0.0
    outputs: dict = field(default_factory=dict)  # file name -> sha256
    parameters: dict = field(default_factory=dict)

    def record(self, *paths) -> None:
        for p in paths:
            p = Path(p)
            self.outputs[p.name] = sha256_file(p)

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def read(cls, path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text()))
