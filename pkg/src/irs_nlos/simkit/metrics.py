"""Per-epoch records and the aggregate metrics built from them."""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from irs_nlos.irs import PowerProfile, power_budget
from irs_nlos.simkit.scenario import CheckSpec, ReportSpec

logger = logging.getLogger(__name__)

CDF_PERCENTILES: tuple[int, ...] = tuple(range(0, 101, 5))


@dataclass(frozen=True)
class Estimate:
    """A located target paired with the ground truth at the capture midpoint."""

    radar_id: str
    angle: int
    t: float
    x: float
    y: float
    target_id: str
    true_x: float
    true_y: float
    distance: float

    @property
    def dx(self) -> float:
        return self.x - self.true_x

    @property
    def dy(self) -> float:
        return self.y - self.true_y

    @property
    def error(self) -> float:
        return math.hypot(self.dx, self.dy)


@dataclass(frozen=True)
class EpochRecord:
    """One superframe (or one discovery slot) of the run."""

    epoch: int
    timestamp: float
    mode: str
    phases: dict[str, str]
    angles: tuple[int, ...] = ()
    packets: tuple[str, ...] = ()
    detections: int = 0
    estimates: tuple[Estimate, ...] = ()
    scan_slots: int = 0
    scan_seconds: float | None = None

    def to_json_dict(self) -> dict[str, Any]:
        """Plain-dict view with floats rounded so reruns serialise identically."""
        data = asdict(self)
        data["estimates"] = [
            {k: round(v, 6) if isinstance(v, float) else v for k, v in est.items()}
            for est in data["estimates"]
        ]
        data["timestamp"] = round(self.timestamp, 6)
        if self.scan_seconds is not None:
            data["scan_seconds"] = round(self.scan_seconds, 6)
        data["angles"] = list(self.angles)
        data["packets"] = list(self.packets)
        return data


@dataclass(frozen=True)
class LinkCell:
    """Bit counts for one link, keyed by radar distance and angle cells."""

    section: str
    distance: float
    angle_deg: float
    bits: int
    errors: int

    @property
    def ber(self) -> float:
        return self.errors / self.bits if self.bits else 0.0


@dataclass(frozen=True)
class MetricRow:
    section: str
    distance_m: float
    angle_deg: float | None = None
    samples: int = 0
    median_dx_cm: float | None = None
    median_dy_cm: float | None = None
    median_error_cm: float | None = None
    bits: int | None = None
    bit_errors: int | None = None
    ber: float | None = None


@dataclass(frozen=True)
class MetricsReport:
    name: str = "scenario"
    seed: int = 0
    mode: str = "adaptive"
    rows: tuple[MetricRow, ...] = ()
    cdf: tuple[tuple[int, float], ...] = ()
    scan_avg: float | None = None
    scan_p95: float | None = None
    power_uw: float | None = None
    lifetime_days: float | None = None
    simulated_power_uw: float | None = None
    epochs: tuple[EpochRecord, ...] = field(default=())

    @property
    def estimates(self) -> list[Estimate]:
        return [e for rec in self.epochs for e in rec.estimates]


def _cell(value: float, width: float) -> float:
    return round(round(value / width) * width, 6)


def localization_rows(
    estimates: Iterable[Estimate], cell_width: float, min_samples: int
) -> list[MetricRow]:
    """Median |dx|, |dy| and Euclidean error per total-distance cell, in cm."""
    cells: dict[float, list[Estimate]] = defaultdict(list)
    for est in estimates:
        cells[_cell(est.distance, cell_width)].append(est)
    rows = []
    for distance in sorted(cells):
        group = cells[distance]
        if len(group) < min_samples:
            logger.info(
                f"Distance cell {distance:.2f} m has {len(group)} samples (< {min_samples}); skipped"
            )
            continue
        rows.append(
            MetricRow(
                section="localization",
                distance_m=distance,
                samples=len(group),
                median_dx_cm=100.0 * float(np.median([abs(e.dx) for e in group])),
                median_dy_cm=100.0 * float(np.median([abs(e.dy) for e in group])),
                median_error_cm=100.0 * float(np.median([e.error for e in group])),
            )
        )
    return rows


def link_rows(cells: Iterable[LinkCell], cell_width: float, angle_cell: float) -> list[MetricRow]:
    """BER rows per (section, distance cell, angle cell)."""
    merged: dict[tuple[str, float, float], list[int]] = defaultdict(lambda: [0, 0])
    for c in cells:
        key = (c.section, _cell(c.distance, cell_width), _cell(c.angle_deg, angle_cell))
        merged[key][0] += c.bits
        merged[key][1] += c.errors
    return [
        MetricRow(
            section=section,
            distance_m=distance,
            angle_deg=angle,
            samples=bits,
            bits=bits,
            bit_errors=errors,
            ber=errors / bits if bits else 0.0,
        )
        for (section, distance, angle), (bits, errors) in sorted(merged.items())
    ]


def error_cdf(errors_m: Sequence[float]) -> tuple[tuple[int, float], ...]:
    """Localization error percentiles in cm, 0 to 100 in steps of 5."""
    if not errors_m:
        return ()
    values = np.percentile(np.asarray(errors_m) * 100.0, CDF_PERCENTILES)
    return tuple((p, float(v)) for p, v in zip(CDF_PERCENTILES, values, strict=True))


def scan_statistics(scan_seconds: Sequence[float]) -> tuple[float | None, float | None]:
    """Average and 95th-percentile scanning time."""
    if not scan_seconds:
        return None, None
    arr = np.asarray(scan_seconds)
    return float(arr.mean()), float(np.percentile(arr, 95))


def simulated_profile(comm_slots: int, sensing_slots: int, idle_slots: int) -> PowerProfile | None:
    """Mode mix observed on the slot clock, at the measured per-mode powers."""
    total = comm_slots + sensing_slots + idle_slots
    if total == 0:
        return None
    base = PowerProfile.measured_mix()
    return PowerProfile(
        base.sleep_uw,
        base.comm_uw,
        base.reflect_uw,
        idle_slots / total,
        comm_slots / total,
        sensing_slots / total,
    )


def build_report(
    name: str,
    seed: int,
    mode: str,
    epochs: Sequence[EpochRecord],
    links: Iterable[LinkCell],
    spec: ReportSpec,
    slot_counts: tuple[int, int, int] = (0, 0, 0),
) -> MetricsReport:
    """Aggregate epoch records and link counters into a report."""
    estimates = [e for rec in epochs for e in rec.estimates]
    rows = localization_rows(estimates, spec.cell_width_m, spec.min_cell_samples)
    rows += link_rows(links, spec.cell_width_m, spec.angle_cell_deg)
    scans = [rec.scan_seconds for rec in epochs if rec.scan_seconds is not None]
    avg, p95 = scan_statistics(scans)
    power_uw, days = power_budget(PowerProfile.measured_mix(), spec.battery_mwh)
    observed = simulated_profile(*slot_counts)
    sim_uw = power_budget(observed, spec.battery_mwh)[0] if observed is not None else None
    return MetricsReport(
        name=name,
        seed=seed,
        mode=mode,
        rows=tuple(rows),
        cdf=error_cdf([e.error for e in estimates]),
        scan_avg=avg,
        scan_p95=p95,
        power_uw=power_uw,
        lifetime_days=days,
        simulated_power_uw=sim_uw,
        epochs=tuple(epochs),
    )


def evaluate_checks(
    report: MetricsReport, checks: CheckSpec, naive: MetricsReport | None = None
) -> list[str]:
    """Threshold failures, one message each; empty means every check passed."""
    failures = []
    if checks.max_median_error_cm is not None:
        for row in report.rows:
            if row.section == "localization" and row.median_error_cm is not None:
                if row.median_error_cm > checks.max_median_error_cm:
                    failures.append(
                        f"median error {row.median_error_cm:.2f} cm at {row.distance_m:.2f} m "
                        f"exceeds {checks.max_median_error_cm:.2f} cm"
                    )
    if checks.max_ber is not None:
        for row in report.rows:
            if row.ber is not None and row.ber > checks.max_ber:
                failures.append(
                    f"{row.section} BER {row.ber:.4f} at {row.distance_m:.2f} m exceeds {checks.max_ber}"
                )
    if checks.adaptive_not_slower and naive is not None:
        if report.scan_avg is None or naive.scan_avg is None:
            failures.append("scanning time unavailable for the adaptive/naive comparison")
        elif report.scan_avg > naive.scan_avg:
            failures.append(
                f"adaptive scan {report.scan_avg:.3f} s slower than naive {naive.scan_avg:.3f} s"
            )
    for failure in failures:
        logger.warning(f"Check failed: {failure}")
    return failures
