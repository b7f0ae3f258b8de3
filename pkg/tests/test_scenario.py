"""Tests for scenario loading, validation and target motion."""

from __future__ import annotations

from pathlib import Path
from typing import Any

import numpy as np
import pytest
from pydantic import ValidationError

from irs_nlos.simkit.scenario import (
    ScenarioConfig,
    TargetSpec,
    TargetTrack,
    build_scene,
    build_tracks,
    load_scenario,
)

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "scenarios"


class TestLoadScenario:
    """Tests for load_scenario."""

    @pytest.mark.parametrize("name", ["single_target", "multi_target", "two_radars"])
    def test_bundled_scenarios_validate(self, name: str):
        cfg = load_scenario(SCENARIO_DIR / f"{name}.toml")
        assert cfg.name == name
        assert cfg.irs is not None

    def test_bundled_scenes_are_nlos(self):
        for path in sorted(SCENARIO_DIR.glob("*.toml")):
            cfg = load_scenario(path)
            scene = build_scene(cfg)
            scene.check_nlos()
            scene.check_tx_spacing(cfg.chirp.to_chirp_config().wavelength)

    def test_missing_file(self, tmp_path: Path):
        with pytest.raises(OSError):
            load_scenario(tmp_path / "absent.toml")


class TestValidation:
    """Tests for ScenarioConfig validation."""

    def test_defaults(self, scenario_factory):
        cfg = scenario_factory()
        assert cfg.mode == "adaptive"
        assert cfg.scheduler.slot_seconds == pytest.approx(0.1625)
        assert cfg.locator.range_step == pytest.approx(0.02)

    def test_schema_version(self, scenario_factory):
        with pytest.raises(ValidationError, match="schema_version"):
            scenario_factory(schema_version=2)

    def test_unknown_field(self, scenario_factory):
        with pytest.raises(ValidationError, match="extra"):
            scenario_factory(colour="blue")

    def test_duplicate_radar_ids(self, scenario_factory, scenario_data: dict[str, Any]):
        radar = scenario_data["radars"][0]
        with pytest.raises(ValidationError, match="radar ids must be unique"):
            scenario_factory(radars=[radar, {**radar, "f_switch": 5.0}])

    def test_shared_switching_frequency(self, scenario_factory, scenario_data: dict[str, Any]):
        radar = scenario_data["radars"][0]
        with pytest.raises(ValidationError, match="distinct switching frequencies"):
            scenario_factory(radars=[radar, {**radar, "id": "r2"}])

    def test_switching_ceiling(self, scenario_factory):
        with pytest.raises(ValidationError, match="f_switch"):
            scenario_factory(radars=[{"id": "r1", "position": [0.0, 0.0], "f_switch": 25.0}])

    def test_unsupported_scheduler_angle(self, scenario_factory):
        with pytest.raises(ValidationError, match="non-empty subset"):
            scenario_factory(scheduler={"angles": [30, 50]})

    def test_bad_speed_range(self):
        with pytest.raises(ValidationError, match="speed_range"):
            TargetSpec(id="t", waypoints=[(0.0, 0.0)], speed_range=(1.0, 0.5))

    def test_with_overrides(self, scenario_factory):
        naive = scenario_factory().with_overrides(mode="naive")
        assert naive.mode == "naive"
        assert isinstance(naive, ScenarioConfig)


class TestTargetTrack:
    """Tests for back-and-forth waypoint motion."""

    def _track(self, speed: float = 0.5) -> TargetTrack:
        return TargetTrack(TargetSpec(id="t", waypoints=[(0.0, 0.0), (1.0, 0.0)]), speed)

    def test_outbound(self):
        track = self._track()
        p = track.position_at(1.0)
        assert (p.x, p.y) == pytest.approx((0.5, 0.0))
        assert track.velocity_at(1.0) == pytest.approx((0.5, 0.0))

    def test_return_leg(self):
        track = self._track()
        p = track.position_at(3.0)
        assert (p.x, p.y) == pytest.approx((0.5, 0.0))
        assert track.velocity_at(3.0) == pytest.approx((-0.5, 0.0))

    def test_end_of_leg(self):
        p = self._track().position_at(2.0)
        assert (p.x, p.y) == pytest.approx((1.0, 0.0))

    def test_static_target(self):
        track = TargetTrack(TargetSpec(id="t", waypoints=[(2.0, 1.0)]), 0.7)
        p = track.position_at(5.0)
        assert (p.x, p.y) == (2.0, 1.0)
        assert track.velocity_at(5.0) == (0.0, 0.0)

    def test_speeds_drawn_from_range(self, scenario_factory):
        cfg = scenario_factory()
        tracks = build_tracks(cfg, np.random.default_rng(0))
        assert 0.2 <= tracks[0].speed <= 0.3
        again = build_tracks(cfg, np.random.default_rng(0))
        assert tracks[0].speed == again[0].speed
