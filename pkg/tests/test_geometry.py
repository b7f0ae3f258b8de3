"""Tests for the scene model and the relay localization equations."""

from __future__ import annotations

import math

import numpy as np
import pytest

from irs_nlos.errors import DegenerateGeometryError
from irs_nlos.geometry import (
    IrsSite,
    Point2,
    Radar,
    Scene,
    Target,
    angular_mismatch_error,
    beam_bearing,
    irs_position,
    segment_hits_polygon,
    solve_forward_path,
    target_position,
    wrap_angle,
)


def _scene(radar: Point2, irs: Point2, target: Point2) -> Scene:
    return Scene(
        radars=(Radar.with_spacing("r1", radar, 0.0125),),
        irs=IrsSite(irs, math.pi),
        targets=(Target("t1", target),),
    )


# =============================================================================
# Closed-form equations
# =============================================================================


class TestIrsPosition:
    """Tests for irs_position."""

    def test_axis_aligned(self):
        p = irs_position(Point2(0, 0), 1.0, 0.0)
        assert (p.x, p.y) == pytest.approx((1.0, 0.0))

    def test_quarter_turn(self):
        p = irs_position(Point2(0, 0), 1.0, math.pi / 2)
        assert (p.x, p.y) == pytest.approx((0.0, 1.0), abs=1e-12)

    def test_offset_radar(self):
        p = irs_position(Point2(1, 1), 2.0, math.pi / 4)
        assert (p.x, p.y) == pytest.approx((1 + math.sqrt(2), 1 + math.sqrt(2)))

    def test_rejects_zero_range(self):
        with pytest.raises(ValueError):
            irs_position(Point2(0, 0), 0.0, 0.0)


class TestTargetPosition:
    """Tests for target_position."""

    def test_zero_range(self):
        p = target_position(Point2(1, 0), 0.0, 0.3, 0.1)
        assert (p.x, p.y) == (1.0, 0.0)

    def test_hand_example(self):
        p = target_position(Point2(1, 0), math.sqrt(2), math.pi / 2, math.pi / 4)
        assert (p.x, p.y) == pytest.approx((0.0, 1.0), abs=1e-12)

    def test_alpha_equals_phi(self):
        p = target_position(Point2(0, 0), 1.0, 0.4, 0.4)
        assert (p.x, p.y) == pytest.approx((-1.0, 0.0))

    def test_translation_equivariance(self):
        a = target_position(Point2(0, 0), 1.3, 0.7, 0.2)
        b = target_position(Point2(5, -2), 1.3, 0.7, 0.2)
        assert (b.x - a.x, b.y - a.y) == pytest.approx((5.0, -2.0))

    def test_beam_bearing_matches(self):
        """Test that the beam bearing points from the IRS at the located target."""
        irs, d, alpha, phi = Point2(2, 0.35), 1.5, math.radians(45), 0.17
        p = target_position(irs, d, alpha, phi)
        q = irs.offset(d, beam_bearing(phi, alpha))
        assert (p.x, p.y) == pytest.approx((q.x, q.y))


class TestSolveForwardPath:
    """Tests for solve_forward_path."""

    def test_hand_example(self):
        sol = solve_forward_path(_scene(Point2(0, 0), Point2(1, 0), Point2(0, 1)), "t1")
        assert sol.d_rs == pytest.approx(1.0)
        assert sol.d_st == pytest.approx(math.sqrt(2))
        assert sol.phi == pytest.approx(0.0)
        assert sol.alpha_required == pytest.approx(math.pi / 4)
        p = target_position(Point2(1, 0), sol.d_st, sol.alpha_required, sol.phi)
        assert (p.x, p.y) == pytest.approx((0.0, 1.0), abs=1e-12)

    def test_target_on_irs(self):
        sol = solve_forward_path(_scene(Point2(0, 0), Point2(1, 0), Point2(1, 0)), "t1")
        assert sol.d_st == 0.0
        assert sol.alpha_required == 0.0
        assert sol.alpha_defined is False

    def test_coincident_radar_and_irs(self):
        with pytest.raises(DegenerateGeometryError, match="degenerate geometry"):
            solve_forward_path(_scene(Point2(0, 0), Point2(0, 0), Point2(1, 1)), "t1")

    @pytest.mark.slow
    def test_round_trip_random_scenes(self):
        """Test that the inversion reproduces 1000 random targets to 1e-9 m."""
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            radar, irs, target = (Point2(*rng.uniform(-5, 5, 2)) for _ in range(3))
            if radar.distance_to(irs) < 1e-3 or irs.distance_to(target) < 1e-3:
                continue
            sol = solve_forward_path(_scene(radar, irs, target), "t1")
            back = target_position(irs, sol.d_st, sol.alpha_required, sol.phi)
            assert back.distance_to(target) < 1e-9


class TestAngularMismatch:
    """Tests for angular_mismatch_error."""

    def test_zero_delta(self):
        assert angular_mismatch_error(3.0, 0.0) == 0.0

    def test_half_beam_step(self):
        assert angular_mismatch_error(0.8, 7.5) == pytest.approx(0.1047, abs=5e-4)

    def test_monotone(self):
        assert angular_mismatch_error(1.0, 10) < angular_mismatch_error(1.0, 20)
        assert angular_mismatch_error(1.0, 10) < angular_mismatch_error(2.0, 10)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            angular_mismatch_error(1.0, 181.0)


# =============================================================================
# Scene checks
# =============================================================================


class TestScene:
    """Tests for Scene helpers."""

    def test_wrap_angle(self):
        assert wrap_angle(2 * math.pi + 0.5) == pytest.approx(0.5)
        assert wrap_angle(-math.pi) == pytest.approx(math.pi)
        assert wrap_angle(0.5) == pytest.approx(0.5)

    def test_tx_spacing_is_half_wavelength(self, corner_scene):
        corner_scene().check_tx_spacing(0.0125)

    def test_tx_spacing_violation(self, corner_scene):
        with pytest.raises(ValueError, match="lambda/2"):
            corner_scene(wavelength=0.02).check_tx_spacing(0.0125)

    def test_corner_targets_hidden(self, corner_scene):
        """Test that every beam of the reference corner ends behind the wall."""
        for alpha in (30, 45, 60, 75):
            scene = corner_scene(alpha_deg=alpha, d_st=1.5)
            scene.check_nlos()
            target = scene.targets[0].position
            assert scene.line_of_sight(scene.irs.position, target)
            assert scene.line_of_sight(scene.radars[0].position, scene.irs.position)

    def test_visible_target_fails_nlos(self):
        scene = Scene(
            radars=(Radar.with_spacing("r1", Point2(0, 0), 0.0125),),
            irs=None,
            targets=(Target("t1", Point2(3, 0)),),
            obstacle=(Point2(0, 1), Point2(1, 1), Point2(1, 2)),
            nlos=True,
        )
        with pytest.raises(ValueError, match="visible"):
            scene.check_nlos()

    def test_segment_through_polygon(self):
        square = (Point2(1, -1), Point2(2, -1), Point2(2, 1), Point2(1, 1))
        assert segment_hits_polygon(Point2(0, 0), Point2(3, 0), square)
        assert not segment_hits_polygon(Point2(0, 2), Point2(3, 2), square)
