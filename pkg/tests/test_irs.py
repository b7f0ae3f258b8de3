"""Tests for the reflector model."""

from __future__ import annotations

import math

import numpy as np
import pytest

from irs_nlos.errors import UnsupportedAngleError
from irs_nlos.irs import (
    SUPPORTED_ANGLES,
    IrsMode,
    IrsState,
    PowerProfile,
    VaaPairing,
    envelope_detect,
    far_field_pattern,
    power_budget,
    reflect_gain,
    steered_pairing,
    steering_angle_from_pairing,
    switch_config_for,
)


class TestSwitchTable:
    """Tests for the reflection angle to switch mapping."""

    def test_thirty_degrees(self):
        cfg = switch_config_for(30)
        assert cfg.lines == {"L3", "L5"}
        assert cfg.switches == {"S1_3", "S2_2", "S3_1", "S4_4"}

    def test_seventy_five_degrees(self):
        cfg = switch_config_for(75)
        assert cfg.lines == {"L4", "L6"}
        assert cfg.switches == {"S1_4", "S2_1", "S3_2", "S4_3"}

    def test_unsupported_angle(self):
        with pytest.raises(UnsupportedAngleError, match="angle not supported"):
            switch_config_for(50)

    def test_rows_are_disjoint(self):
        """Test that no line or switch position is shared between two angles."""
        configs = [switch_config_for(a) for a in SUPPORTED_ANGLES]
        lines = [line for c in configs for line in c.lines]
        switches = [s for c in configs for s in c.switches]
        assert len(set(lines)) == len(lines)
        assert len(set(switches)) == len(switches)

    def test_state_validation(self):
        with pytest.raises(ValueError, match="needs an angle"):
            IrsState(IrsMode.REFLECT)
        with pytest.raises(ValueError, match="ook_bit"):
            IrsState(IrsMode.OFF, ook_bit=1)
        assert IrsState(IrsMode.OFF).switch_config.is_off


class TestReflectGain:
    """Tests for reflect_gain."""

    def test_retro_peak(self):
        assert reflect_gain(IrsState(IrsMode.RETRO), 0.3, 0.3) == pytest.approx(1.0)

    def test_reflect_peak(self):
        state = IrsState(IrsMode.REFLECT, angle=45)
        assert reflect_gain(state, 0.0, math.radians(45)) == pytest.approx(1.0)

    def test_reflect_first_null(self):
        """Test that the first array-factor null of the six-element array reads zero."""
        state = IrsState(IrsMode.REFLECT, angle=45)
        null = math.asin(math.sin(math.radians(45)) - 1.0 / 3.0)
        assert reflect_gain(state, 0.0, null) == pytest.approx(0.0, abs=1e-9)

    def test_off_mode_is_dark(self):
        assert reflect_gain(IrsState(IrsMode.OFF), 0.0, 0.0) == 0.0

    def test_reciprocity(self):
        rng = np.random.default_rng(3)
        for mode, angle in ((IrsMode.RETRO, None), (IrsMode.REFLECT, 60)):
            state = IrsState(mode, angle=angle)
            for a, b in rng.uniform(-1.2, 1.2, (20, 2)):
                assert reflect_gain(state, a, b) == pytest.approx(reflect_gain(state, b, a))


class TestSteering:
    """Tests for Van Atta pairing and steering."""

    def test_mirror_is_retro(self):
        out = steering_angle_from_pairing(VaaPairing.mirror(), math.radians(20))
        assert math.degrees(out) == pytest.approx(20.0, abs=1e-9)

    def test_mirror_retro_for_all_incidence(self):
        for deg in range(-80, 81, 10):
            out = steering_angle_from_pairing(VaaPairing.mirror(), math.radians(deg))
            assert math.degrees(out) == pytest.approx(deg, abs=1e-6)

    def test_gradient_steers_broadside_to_45(self):
        """Test the steered beam against a brute-force far-field scan."""
        pairing = steered_pairing(math.radians(45))
        bearings = np.radians(np.arange(-89.0, 89.0, 0.1))
        pattern = far_field_pattern(pairing, 0.0, bearings)
        peak = math.degrees(bearings[int(np.argmax(pattern))])
        assert peak == pytest.approx(45.0, abs=0.5)
        assert math.degrees(steering_angle_from_pairing(pairing, 0.0)) == pytest.approx(45.0)

    def test_gradient_matches_sine_law(self):
        incident = math.radians(10)
        delta = 0.8
        pairing = VaaPairing.with_gradient(delta)
        expected = math.asin(math.sin(incident) + delta / math.pi)
        assert steering_angle_from_pairing(pairing, incident) == pytest.approx(expected)

    def test_pairing_must_be_involution(self):
        with pytest.raises(ValueError, match="involution"):
            VaaPairing((1, 2, 0, 3, 4, 5), (0.0,) * 6)


class TestEnvelopeDetect:
    """Tests for the diode detector."""

    def test_drop_without_filter(self):
        out = envelope_detect([0.0, 1.0], [1.0, 1.0], 0.3)
        assert out.volts == pytest.approx([0.7, 0.7])

    def test_output_is_time_tagged(self):
        times, volts = envelope_detect([0.5, 0.75, 1.0], [1.0, 0.2, 0.9], 0.3)
        assert times == pytest.approx([0.5, 0.75, 1.0])
        assert volts == pytest.approx([0.7, 0.0, 0.6])

    def test_cutoff(self):
        assert np.all(envelope_detect([0.0, 1.0], [0.2, 0.1], 0.3).volts == 0.0)

    def test_rc_step_response(self):
        """Test that a step reaches 63.2% of its final value after one time constant."""
        rc, dt = 0.01, 1e-5
        t = np.arange(3001) * dt
        out = envelope_detect(t, np.ones_like(t), 0.0, rc)
        assert out.times[1000] == pytest.approx(rc)
        assert out.volts[1000] == pytest.approx(1 - math.exp(-1), abs=1e-6)

    def test_monotone_in_input(self):
        t = np.arange(200) * 1e-3
        rng = np.random.default_rng(0)
        low = rng.uniform(0, 1, t.size)
        high = low + rng.uniform(0, 0.5, t.size)
        high_out = envelope_detect(t, high, 0.1, 0.02).volts
        assert np.all(high_out >= envelope_detect(t, low, 0.1, 0.02).volts)

    def test_mismatched_shapes(self):
        with pytest.raises(ValueError, match="same shape"):
            envelope_detect([0.0, 1.0], [1.0], 0.3)


class TestPowerBudget:
    """Tests for the power budget arithmetic."""

    def test_measured_mix(self):
        avg, days = power_budget(PowerProfile.measured_mix(), 2500.0)
        assert avg == pytest.approx(183.9, abs=0.05)
        assert days == pytest.approx(566.4, abs=0.1)

    def test_all_sleep(self):
        profile = PowerProfile(46.5, 2763.0, 50.0, 1.0, 0.0, 0.0)
        assert power_budget(profile)[0] == pytest.approx(46.5)

    def test_duties_must_sum_to_one(self):
        with pytest.raises(ValueError, match="sum to 1"):
            PowerProfile(46.5, 2763.0, 50.0, 0.5, 0.5, 0.5)
