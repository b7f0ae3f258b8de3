"""Report files written after a run.

Floats go through fixed formats so two runs with the same scenario and seed
produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path

from irs_nlos.simkit.metrics import MetricRow, MetricsReport

logger = logging.getLogger(__name__)

METRIC_COLUMNS = (
    "section",
    "distance_m",
    "angle_deg",
    "samples",
    "median_dx_cm",
    "median_dy_cm",
    "median_error_cm",
    "bits",
    "bit_errors",
    "ber",
)


def _fmt(value: float | int | str | None, spec: str = "%.3f") -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return spec % value
    return str(value)


def _metric_cells(row: MetricRow) -> dict[str, str]:
    return {
        "section": row.section,
        "distance_m": _fmt(row.distance_m),
        "angle_deg": _fmt(row.angle_deg),
        "samples": _fmt(row.samples),
        "median_dx_cm": _fmt(row.median_dx_cm),
        "median_dy_cm": _fmt(row.median_dy_cm),
        "median_error_cm": _fmt(row.median_error_cm),
        "bits": _fmt(row.bits),
        "bit_errors": _fmt(row.bit_errors),
        "ber": _fmt(row.ber, "%.6f"),
    }


def summary_lines(report: MetricsReport) -> list[str]:
    """Key/value lines for ``summary.txt``."""
    return [
        f"scenario: {report.name}",
        f"seed: {report.seed}",
        f"mode: {report.mode}",
        f"epochs: {len(report.epochs)}",
        f"estimates: {len(report.estimates)}",
        f"scan_time_avg_s: {_fmt(report.scan_avg, '%.4f')}",
        f"scan_time_p95_s: {_fmt(report.scan_p95, '%.4f')}",
        f"power_avg_uw: {_fmt(report.power_uw, '%.2f')}",
        f"lifetime_days: {_fmt(report.lifetime_days, '%.2f')}",
        f"simulated_power_avg_uw: {_fmt(report.simulated_power_uw, '%.2f')}",
    ]


def emit_reports(report: MetricsReport, out_dir: str | Path) -> list[Path]:
    """Write metrics.csv, cdf.csv, epochs.jsonl and summary.txt into ``out_dir``.

    Args:
        report: The aggregated run.
        out_dir: Target directory, created when missing.

    Returns:
        Paths of the files written, in the order above.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    metrics_path = out / "metrics.csv"
    with metrics_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRIC_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in report.rows:
            writer.writerow(_metric_cells(row))

    cdf_path = out / "cdf.csv"
    with cdf_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["percentile", "error_cm"])
        for percentile, error_cm in report.cdf:
            writer.writerow([percentile, _fmt(error_cm)])

    epochs_path = out / "epochs.jsonl"
    with epochs_path.open("w", encoding="utf-8") as fh:
        for record in report.epochs:
            fh.write(json.dumps(record.to_json_dict(), sort_keys=True) + "\n")

    summary_path = out / "summary.txt"
    summary_path.write_text("\n".join(summary_lines(report)) + "\n", encoding="utf-8")

    written = [metrics_path, cdf_path, epochs_path, summary_path]
    logger.info(f"Wrote {len(written)} report files to {out}")
    return written
