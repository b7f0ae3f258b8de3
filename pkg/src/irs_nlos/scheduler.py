"""Slot frames and the angle-of-interest schedule.

Slots are the time unit here; seconds appear only through ``slot_seconds``
at the boundary.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass

from irs_nlos.errors import InfeasibleScheduleError
from irs_nlos.irs import SUPPORTED_ANGLES, switch_config_for

logger = logging.getLogger(__name__)

# ceil() slack for ratios that should be integral but carry rounding error
_CEIL_SLACK = 1e-9


@dataclass(frozen=True)
class TargetDetection:
    """A target seen during one angle's sensing slots.

    ``range`` is the one-way-equivalent relay range (D_RS + D_ST) measured
    at the radar.
    """

    angle: int
    range: float
    energy: float
    velocity: float = 0.0

    def __post_init__(self) -> None:
        switch_config_for(self.angle)
        if self.energy < 0:
            raise ValueError("energy must be non-negative")
        if self.range <= 0:
            raise ValueError("range must be positive")


@dataclass(frozen=True)
class AngleDurationSet:
    """Ordered (angle, sensing slots) schedule."""

    entries: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        angles = [a for a, _ in self.entries]
        if len(set(angles)) != len(angles):
            raise ValueError(f"angles must be unique, got {angles}")
        for angle, slots in self.entries:
            switch_config_for(angle)
            if slots < 1:
                raise ValueError(f"angle {angle}: duration must be at least 1 slot")

    @classmethod
    def full(cls, angles: Sequence[int] = SUPPORTED_ANGLES, slots: int = 10) -> AngleDurationSet:
        return cls(tuple((a, slots) for a in angles))

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def angles(self) -> tuple[int, ...]:
        return tuple(a for a, _ in self.entries)

    @property
    def d_scan(self) -> int:
        return sum(d for _, d in self.entries)

    def duration(self, angle: int) -> int:
        for a, d in self.entries:
            if a == angle:
                return d
        raise KeyError(angle)

    def merge(self, other: AngleDurationSet) -> AngleDurationSet:
        """Union of angles, keeping the longer duration, in supported order."""
        merged = dict(self.entries)
        for a, d in other.entries:
            merged[a] = max(d, merged.get(a, 0))
        return AngleDurationSet(tuple(sorted(merged.items())))


@dataclass(frozen=True)
class SubFrame:
    angle: int
    sensing_slots: int
    comm_slots: int = 1

    @property
    def total_slots(self) -> int:
        return self.comm_slots + self.sensing_slots


@dataclass(frozen=True)
class SuperFrame:
    subframes: tuple[SubFrame, ...] = ()
    leading_comm_slots: int = 0

    @property
    def total_slots(self) -> int:
        return self.leading_comm_slots + sum(sf.total_slots for sf in self.subframes)

    @property
    def is_adaptive(self) -> bool:
        return self.leading_comm_slots > 0


def naive_superframe(angles: Sequence[int], slots_per_subframe: int) -> SuperFrame:
    """Every angle in the given order, one comm slot plus equal sensing slots each."""
    if not angles:
        raise ValueError("naive superframe needs at least one angle")
    if slots_per_subframe < 1:
        raise ValueError("slots_per_subframe must be at least 1")
    return SuperFrame(tuple(SubFrame(a, slots_per_subframe) for a in angles))


def adaptive_superframe(aoi: AngleDurationSet, radar_comm_slots: int = 1) -> SuperFrame:
    """A leading radar-to-IRS slot, then one subframe per scheduled angle."""
    return SuperFrame(tuple(SubFrame(a, d) for a, d in aoi), leading_comm_slots=radar_comm_slots)


def scanning_time(sf: SuperFrame, slot_seconds: float) -> float:
    if slot_seconds <= 0:
        raise ValueError("slot_seconds must be positive")
    return sf.total_slots * slot_seconds


def snap_to_supported(
    angle_deg: float, supported: Sequence[int] = SUPPORTED_ANGLES
) -> tuple[int, float]:
    """Nearest supported beam and the absolute residual in degrees."""
    best = min(supported, key=lambda a: (abs(a - angle_deg), a))
    return best, abs(best - angle_deg)


def max_feasible_scan(v_max: float, r_max_speed: float, delta_alpha: float, slot_seconds: float) -> int:
    """Largest D_scan with ``v_max * D_scan * slot_seconds`` strictly under the arc bound."""
    if v_max <= 0:
        raise ValueError("v_max must be positive for a speed bound")
    bound = delta_alpha / 180.0 * math.pi * r_max_speed
    return max(math.ceil(bound / (v_max * slot_seconds)) - 1, 0)


def _required_slots(r_i: float, r_ref: float, d_max_energy: int, strict_formula: bool) -> int:
    ratio = (r_ref / r_i) if strict_formula else (r_i / r_ref)
    return max(1, math.ceil(ratio**4 * d_max_energy - _CEIL_SLACK))


def minimum_durations(
    detections: Sequence[TargetDetection], d_max_energy: int, *, strict_formula: bool = False
) -> AngleDurationSet:
    """Per-angle slot counts before the speed bound is applied.

    The strongest target (lowest range on ties) gets ``d_max_energy`` slots
    and every other target ``ceil((r_i/r_ref)^4 * d_max_energy)``, making up
    the radar-equation SNR loss. ``strict_formula`` flips the ratio to
    ``(r_ref/r_i)^4``.
    """
    if d_max_energy < 1:
        raise ValueError("D_max_energy must be at least 1")
    if not detections:
        raise ValueError("no detections to schedule")
    reference = min(detections, key=lambda d: (-d.energy, d.range))
    per_angle: dict[int, int] = {}
    for det in detections:
        slots = _required_slots(det.range, reference.range, d_max_energy, strict_formula)
        if det.angle in per_angle:
            logger.warning(f"Several targets at {det.angle} deg; keeping the longest duration")
            slots = max(slots, per_angle[det.angle])
        per_angle[det.angle] = slots
    return AngleDurationSet(tuple(sorted(per_angle.items())))


def check_speed(
    aoi: AngleDurationSet,
    detections: Sequence[TargetDetection],
    delta_alpha: float,
    slot_seconds: float,
) -> None:
    """Raise if the fastest target can leave its beam during one scan."""
    if delta_alpha <= 0:
        raise ValueError("delta_alpha must be positive")
    if not detections:
        return
    fastest = min(detections, key=lambda d: (-abs(d.velocity), d.range))
    v_max = abs(fastest.velocity)
    if v_max == 0:
        return
    bound = delta_alpha / 180.0 * math.pi * fastest.range
    if not v_max * aoi.d_scan * slot_seconds < bound:
        limit = max_feasible_scan(v_max, fastest.range, delta_alpha, slot_seconds)
        logger.warning(
            f"Schedule D_scan={aoi.d_scan} breaks the speed bound "
            f"(v_max={v_max:.2f} m/s, r={fastest.range:.2f} m); at most {limit} slots"
        )
        raise InfeasibleScheduleError(aoi.d_scan, limit)


def build_aoi(
    detections: Iterable[TargetDetection],
    prev: AngleDurationSet,
    delta_alpha: float,
    d_max_energy: int,
    *,
    slot_seconds: float = 0.1,
    strict_formula: bool = False,
) -> AngleDurationSet:
    """Next angle-duration set from this superframe's detections.

    No detections leaves ``prev`` untouched.

    Raises:
        InfeasibleScheduleError: the minimum durations already break the
            target-speed bound ``v_max * D_scan * slot_seconds < (da/180) pi r``.
    """
    if delta_alpha <= 0:
        raise ValueError("delta_alpha must be positive")
    if d_max_energy < 1:
        raise ValueError("D_max_energy must be at least 1")
    found = list(detections)
    if not found:
        return prev
    aoi = minimum_durations(found, d_max_energy, strict_formula=strict_formula)
    check_speed(aoi, found, delta_alpha, slot_seconds)
    logger.debug(f"AoI set {aoi.entries} (D_scan={aoi.d_scan})")
    return aoi


def cap_durations(aoi: AngleDurationSet, max_slots: int) -> AngleDurationSet:
    """Limit every entry to ``max_slots`` sensing slots."""
    if all(d <= max_slots for _, d in aoi):
        return aoi
    logger.warning(f"Capping AoI durations at {max_slots} slots: {aoi.entries}")
    return AngleDurationSet(tuple((a, min(d, max_slots)) for a, d in aoi))


def clamp_aoi(aoi: AngleDurationSet, max_scan_slots: int) -> AngleDurationSet:
    """Scale durations down proportionally so D_scan fits ``max_scan_slots``."""
    if aoi.d_scan <= max_scan_slots:
        return aoi
    if max_scan_slots < len(aoi):
        raise InfeasibleScheduleError(aoi.d_scan, max_scan_slots)
    scale = max_scan_slots / aoi.d_scan
    slots = {a: max(1, math.floor(d * scale)) for a, d in aoi}
    while sum(slots.values()) > max_scan_slots:
        longest = max(slots, key=lambda a: (slots[a], -a))
        slots[longest] -= 1
    return AngleDurationSet(tuple((a, slots[a]) for a in aoi.angles))


def _adjacent(a: int, b: int) -> bool:
    return abs(SUPPORTED_ANGLES.index(a) - SUPPORTED_ANGLES.index(b)) == 1


def strongest_per_range(
    detections: Iterable[TargetDetection],
    range_tolerance: float = 0.1,
    leak_ratio: float = 0.5,
) -> list[TargetDetection]:
    """Keep one detection per target.

    Detections on the same beam within ``range_tolerance`` of a stronger one
    are duplicates. A target near a beam also leaks into the neighbouring
    beam at the same relay range, but only well below its main response:
    a neighbour-beam detection is dropped only when its energy is under
    ``leak_ratio`` times the stronger one. Comparable energies on adjacent
    beams are separate targets, and beams further apart never merge.
    """
    kept: list[TargetDetection] = []
    for det in sorted(detections, key=lambda d: (-d.energy, d.range, d.angle)):
        if not any(_shadowed_by(det, k, range_tolerance, leak_ratio) for k in kept):
            kept.append(det)
    return sorted(kept, key=lambda d: (d.angle, d.range))


def _shadowed_by(
    det: TargetDetection, stronger: TargetDetection, range_tolerance: float, leak_ratio: float
) -> bool:
    if abs(det.range - stronger.range) > range_tolerance:
        return False
    if det.angle == stronger.angle:
        return True
    return _adjacent(det.angle, stronger.angle) and det.energy < leak_ratio * stronger.energy
