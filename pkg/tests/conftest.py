"""Pytest fixtures for irs-nlos tests.

This module provides fixtures for:
- Configuration setup
- Chirp configs and scenes
- Scenario configs for end-to-end runs
"""

from __future__ import annotations

import math
from typing import TYPE_CHECKING, Any

import numpy as np
import pytest

if TYPE_CHECKING:
    from irs_nlos.config import Settings
    from irs_nlos.geometry import Scene
    from irs_nlos.signal import ChirpConfig
    from irs_nlos.simkit.scenario import ScenarioConfig


# =============================================================================
# Configuration Fixtures
# =============================================================================


@pytest.fixture(scope="session")
def test_env() -> dict[str, str]:
    """Provide test environment variables."""
    return {
        "ENABLE_TRACING": "false",  # Disable tracing in tests for speed
        "SWEEP_WORKERS": "1",
        "IRS_NLOS_OUTPUT_DIR": "out-test",
        "DEPLOYMENT_ENVIRONMENT": "test",
    }


@pytest.fixture
def settings(test_env: dict[str, str], monkeypatch: pytest.MonkeyPatch) -> Settings:
    """Provide configured Settings instance.

    Uses monkeypatch to set environment variables for the test.
    """
    monkeypatch.delenv("IRS_NLOS_SEED", raising=False)
    for key, value in test_env.items():
        monkeypatch.setenv(key, value)

    # Clear the cached settings to pick up test config
    from irs_nlos.config import get_settings

    get_settings.cache_clear()

    return get_settings()


# =============================================================================
# Signal / Geometry Fixtures
# =============================================================================


@pytest.fixture
def chirp() -> ChirpConfig:
    """Default 24 GHz / 250 MHz / 256 us chirp."""
    from irs_nlos.signal import ChirpConfig

    return ChirpConfig()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def corner_scene():
    """Factory for the reference corner: radar at the origin, IRS 2 m away behind a wall."""
    from irs_nlos.geometry import IrsSite, Point2, Radar, Scene, Target, beam_bearing

    def _create(
        alpha_deg: float = 45.0,
        d_st: float = 1.5,
        velocity: tuple[float, float] = (0.0, 0.0),
        wavelength: float = 0.0125,
    ) -> Scene:
        radar = Radar.with_spacing("r1", Point2(0.0, 0.0), wavelength)
        irs = IrsSite(Point2(2.0, 0.35), math.radians(160.0))
        phi = radar.position.bearing_to(irs.position)
        target = irs.position.offset(d_st, beam_bearing(phi, math.radians(alpha_deg)))
        return Scene(
            radars=(radar,),
            irs=irs,
            targets=(Target("t1", target, velocity, 0.5),),
            obstacle=(Point2(-1.0, 0.5), Point2(1.0, 0.5), Point2(1.0, 0.6), Point2(-1.0, 0.6)),
            nlos=True,
        )

    return _create


# =============================================================================
# Scenario Fixtures
# =============================================================================


@pytest.fixture
def scenario_data() -> dict[str, Any]:
    """Raw scenario document for the corner layout with one walker on the 45 deg beam."""
    return {
        "schema_version": 1,
        "name": "test_corner",
        "seed": 5,
        "epochs": 6,
        "nlos": True,
        "obstacle": [[-1.0, 0.5], [1.0, 0.5], [1.0, 0.6], [-1.0, 0.6]],
        "radars": [{"id": "r1", "position": [0.0, 0.0], "f_switch": 10.0}],
        "irs": {"position": [2.0, 0.35], "normal_deg": 160.0, "irs_id": 1},
        "targets": [
            {
                "id": "walker",
                "waypoints": [[1.1816, 0.9246], [0.3632, 1.4993]],
                "speed_range": [0.2, 0.3],
            }
        ],
        "reports": {"min_cell_samples": 1},
    }


@pytest.fixture
def scenario_factory(scenario_data: dict[str, Any]):
    """Factory fixture to build validated scenarios with top-level overrides."""
    from irs_nlos.simkit.scenario import ScenarioConfig

    def _create(**overrides: Any) -> ScenarioConfig:
        data = {**scenario_data, **overrides}
        return ScenarioConfig.model_validate(data)

    return _create


# =============================================================================
# Test Markers
# =============================================================================


def pytest_configure(config: pytest.Config) -> None:
    """Register custom markers."""
    config.addinivalue_line("markers", "slow: marks tests as slow")
    config.addinivalue_line("markers", "integration: marks tests running full scenarios")
    config.addinivalue_line("markers", "acceptance: marks end-to-end acceptance checks")
