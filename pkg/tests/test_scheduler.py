"""Tests for slot frames and the angle-of-interest schedule."""

from __future__ import annotations

import pytest

from irs_nlos.errors import InfeasibleScheduleError, UnsupportedAngleError
from irs_nlos.scheduler import (
    AngleDurationSet,
    SuperFrame,
    TargetDetection,
    adaptive_superframe,
    build_aoi,
    cap_durations,
    check_speed,
    clamp_aoi,
    max_feasible_scan,
    minimum_durations,
    naive_superframe,
    scanning_time,
    snap_to_supported,
    strongest_per_range,
)


def _det(angle: int, rng: float, energy: float = 1.0, velocity: float = 0.0) -> TargetDetection:
    return TargetDetection(angle, rng, energy, velocity)


# =============================================================================
# Frames
# =============================================================================


class TestSuperFrames:
    """Tests for naive and adaptive superframes."""

    def test_naive_four_angles(self):
        sf = naive_superframe((30, 45, 60, 75), 10)
        assert len(sf.subframes) == 4
        assert sf.total_slots == 44
        assert not sf.is_adaptive

    def test_naive_single_slot(self):
        sf = naive_superframe((45,), 1)
        assert sf.total_slots == 2

    def test_naive_needs_angles(self):
        with pytest.raises(ValueError, match="at least one angle"):
            naive_superframe((), 10)

    def test_adaptive_leads_with_radar_slot(self):
        sf = adaptive_superframe(AngleDurationSet(((45, 8),)))
        assert sf.is_adaptive
        assert sf.total_slots == 10

    def test_empty_superframe_takes_no_time(self):
        assert scanning_time(SuperFrame(), 0.1) == 0.0

    def test_adaptive_beats_naive(self):
        naive = naive_superframe((30, 45, 60, 75), 10)
        adaptive = adaptive_superframe(AngleDurationSet(((45, 10),)))
        assert scanning_time(adaptive, 0.1625) < scanning_time(naive, 0.1625)

    def test_scanning_time_needs_positive_slot(self):
        with pytest.raises(ValueError):
            scanning_time(SuperFrame(), 0.0)


class TestAngleDurationSet:
    """Tests for AngleDurationSet."""

    def test_full(self):
        aoi = AngleDurationSet.full()
        assert aoi.angles == (30, 45, 60, 75)
        assert aoi.d_scan == 40

    def test_duplicate_angle(self):
        with pytest.raises(ValueError, match="unique"):
            AngleDurationSet(((30, 2), (30, 3)))

    def test_zero_duration(self):
        with pytest.raises(ValueError, match="at least 1 slot"):
            AngleDurationSet(((30, 0),))

    def test_unsupported_angle(self):
        with pytest.raises(UnsupportedAngleError):
            AngleDurationSet(((50, 2),))

    def test_merge_keeps_longer(self):
        merged = AngleDurationSet(((30, 4),)).merge(AngleDurationSet(((30, 2), (45, 3))))
        assert merged.entries == ((30, 4), (45, 3))

    def test_duration_lookup(self):
        aoi = AngleDurationSet(((30, 4), (60, 7)))
        assert aoi.duration(60) == 7
        with pytest.raises(KeyError):
            aoi.duration(45)


# =============================================================================
# AoI construction
# =============================================================================


class TestBuildAoi:
    """Tests for build_aoi and its helpers."""

    def test_no_detections_keeps_previous(self):
        prev = AngleDurationSet(((30, 10),))
        assert build_aoi([], prev, 15.0, 4) is prev

    def test_reference_target_gets_max(self):
        aoi = build_aoi([_det(45, 2.0)], AngleDurationSet.full(), 15.0, 4)
        assert aoi.entries == ((45, 4),)

    def test_far_target_compensated(self):
        """Test ceil((2.83/2)^4 * 4) = 17 for the weaker, farther target."""
        aoi = build_aoi([_det(30, 2.0, 1.0), _det(60, 2.83, 0.25)], AngleDurationSet.full(), 15.0, 4)
        assert aoi.entries == ((30, 4), (60, 17))

    def test_strict_formula_flips_ratio(self):
        aoi = minimum_durations([_det(30, 2.0, 1.0), _det(60, 2.83, 0.25)], 4, strict_formula=True)
        assert aoi.entries == ((30, 4), (60, 1))

    def test_strongest_is_reference_not_nearest(self):
        aoi = minimum_durations([_det(30, 2.0, 0.1), _det(60, 4.0, 1.0)], 8)
        assert aoi.duration(60) == 8
        assert aoi.duration(30) == 1

    def test_shared_angle_keeps_longest(self):
        aoi = minimum_durations([_det(45, 2.0, 1.0), _det(45, 3.0, 0.2)], 2)
        assert aoi.entries == ((45, 11),)

    def test_result_holds_detected_angles_only(self):
        aoi = build_aoi([_det(60, 2.5)], AngleDurationSet.full(), 15.0, 6)
        assert aoi.angles == (60,)

    def test_infeasible(self):
        """Test that a 1 m/s target at 3 m caps D_scan at 7 slots of 0.1 s."""
        with pytest.raises(InfeasibleScheduleError, match="at most 7") as info:
            build_aoi([_det(45, 3.0, velocity=1.0)], AngleDurationSet.full(), 15.0, 10, slot_seconds=0.1)
        assert info.value.max_scan_slots == 7
        assert info.value.d_scan == 10

    def test_feasible_just_inside_bound(self):
        aoi = build_aoi([_det(45, 3.0, velocity=1.0)], AngleDurationSet.full(), 15.0, 7, slot_seconds=0.1)
        assert aoi.d_scan == 7

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            build_aoi([_det(45, 2.0)], AngleDurationSet.full(), 0.0, 4)
        with pytest.raises(ValueError):
            build_aoi([_det(45, 2.0)], AngleDurationSet.full(), 15.0, 0)


class TestSpeedBound:
    """Tests for the target-speed constraint."""

    def test_max_feasible_scan(self):
        assert max_feasible_scan(1.0, 3.0, 15.0, 0.1) == 7

    def test_stationary_targets_always_pass(self):
        check_speed(AngleDurationSet(((45, 1000),)), [_det(45, 1.0)], 15.0, 0.1)

    def test_fastest_target_is_checked(self):
        aoi = AngleDurationSet(((30, 5), (60, 5)))
        with pytest.raises(InfeasibleScheduleError):
            check_speed(aoi, [_det(30, 3.0, velocity=0.1), _det(60, 1.0, velocity=-2.0)], 15.0, 0.1)


class TestClampAndCap:
    """Tests for clamp_aoi and cap_durations."""

    def test_clamp_scales_proportionally(self):
        clamped = clamp_aoi(AngleDurationSet(((30, 4), (60, 17))), 7)
        assert clamped.entries == ((30, 1), (60, 5))
        assert clamped.d_scan <= 7

    def test_clamp_noop_when_feasible(self):
        aoi = AngleDurationSet(((30, 2),))
        assert clamp_aoi(aoi, 7) is aoi

    def test_clamp_cannot_go_below_one_slot_per_angle(self):
        with pytest.raises(InfeasibleScheduleError):
            clamp_aoi(AngleDurationSet(((30, 4), (45, 4), (60, 4))), 2)

    def test_cap(self):
        capped = cap_durations(AngleDurationSet(((30, 4), (60, 17))), 10)
        assert capped.entries == ((30, 4), (60, 10))


# =============================================================================
# Helpers
# =============================================================================


class TestSnapAndDedup:
    """Tests for snap_to_supported and strongest_per_range."""

    def test_snap(self):
        assert snap_to_supported(50.0) == (45, pytest.approx(5.0))
        assert snap_to_supported(80.0) == (75, pytest.approx(5.0))

    def test_snap_tie_goes_low(self):
        assert snap_to_supported(37.5)[0] == 30

    def test_strongest_per_range(self):
        kept = strongest_per_range(
            [_det(30, 2.0, 1.0), _det(45, 2.05, 0.2), _det(60, 3.0, 0.3)], range_tolerance=0.1
        )
        assert [(d.angle, d.range) for d in kept] == [(30, 2.0), (60, 3.0)]

    def test_adjacent_beams_with_comparable_energy_both_kept(self):
        kept = strongest_per_range([_det(45, 2.50, 1.0), _det(60, 2.55, 0.9)], range_tolerance=0.1)
        assert [d.angle for d in kept] == [45, 60]

    def test_distant_beams_at_equal_range_never_merge(self):
        kept = strongest_per_range([_det(30, 2.5, 1.0), _det(60, 2.5, 0.01)], range_tolerance=0.1)
        assert [d.angle for d in kept] == [30, 60]

    def test_same_beam_duplicates_merge(self):
        kept = strongest_per_range([_det(45, 2.50, 0.4), _det(45, 2.53, 1.0)], range_tolerance=0.1)
        assert [(d.angle, d.range) for d in kept] == [(45, 2.53)]

    def test_leak_ratio_threshold(self):
        detections = [_det(45, 2.5, 1.0), _det(60, 2.5, 0.4)]
        assert len(strongest_per_range(detections, leak_ratio=0.5)) == 1
        assert len(strongest_per_range(detections, leak_ratio=0.3)) == 2

    def test_detection_validation(self):
        with pytest.raises(ValueError, match="range must be positive"):
            _det(45, 0.0)
        with pytest.raises(UnsupportedAngleError):
            _det(50, 1.0)
