"""Tests for the channel glue between the radar, the IRS and the codecs."""

from __future__ import annotations

import numpy as np
import pytest

from irs_nlos.comms import frame_packet, ook_modulate
from irs_nlos.irs import IrsMode
from irs_nlos.signal import ChirpConfig
from irs_nlos.simkit import links
from irs_nlos.simkit.codebook import AngleAnnounce, IdAnnounce, encode_message
from irs_nlos.simkit.links import ook_uplink
from irs_nlos.simkit.scenario import ChannelSpec


class TestOokUplink:
    """Tests for ook_uplink."""

    def test_noiseless_packet_decodes(
        self, corner_scene, chirp: ChirpConfig, rng: np.random.Generator
    ):
        scene = corner_scene()
        message = AngleAnnounce(45, 1)
        rx = ook_uplink(scene, scene.radars[0], message, 1, chirp, ChannelSpec(), 0.0, 0.0, rng)
        assert rx.sent == frame_packet(encode_message(message))
        assert rx.received == rx.sent
        assert rx.message == message
        assert rx.ook_range == pytest.approx(2.0304, abs=0.1)

    def test_surface_keyed_by_ook_modulate(
        self,
        corner_scene,
        chirp: ChirpConfig,
        rng: np.random.Generator,
        monkeypatch: pytest.MonkeyPatch,
    ):
        calls = []

        def recording_modulate(bits, irs_id=0):
            calls.append((tuple(bits), irs_id))
            return ook_modulate(bits, irs_id)

        monkeypatch.setattr(links, "ook_modulate", recording_modulate)
        scene = corner_scene()
        rx = ook_uplink(scene, scene.radars[0], IdAnnounce(3), 3, chirp, ChannelSpec(), 0.0, 0.0, rng)
        assert calls == [(rx.sent, 3)]

    def test_ones_reflect_and_zeros_switch_off(
        self,
        corner_scene,
        chirp: ChirpConfig,
        rng: np.random.Generator,
        monkeypatch: pytest.MonkeyPatch,
    ):
        states = []
        sensing_echoes = links.sensing_echoes

        def recording_echoes(scene, radar, state, irs_reflectivity=1.0):
            states.append(state)
            return sensing_echoes(scene, radar, state, irs_reflectivity)

        monkeypatch.setattr(links, "sensing_echoes", recording_echoes)
        scene = corner_scene()
        ook_uplink(scene, scene.radars[0], IdAnnounce(2), 2, chirp, ChannelSpec(), 0.0, 0.0, rng)
        assert {s.mode for s in states} == {IrsMode.RETRO, IrsMode.OFF}
        assert all(s.irs_id == 2 for s in states)
        assert all(s.ook_bit == 1 for s in states if s.mode is IrsMode.RETRO)
