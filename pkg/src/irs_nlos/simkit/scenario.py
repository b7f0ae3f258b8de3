"""Scenario files: TOML documents validated into pydantic models.

Every numeric knob of a run lives here; a scenario plus a seed fully
determines the output.
"""

from __future__ import annotations

import logging
import math
import tomllib
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from irs_nlos.geometry import IrsSite, Point2, Radar, Scene, Target
from irs_nlos.irs import SUPPORTED_ANGLES
from irs_nlos.signal import SPEED_OF_LIGHT, ChirpConfig

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

XY = tuple[float, float]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ChirpSpec(_Section):
    f0: float = Field(default=24.0e9, gt=0)
    bandwidth: float = Field(default=250.0e6, gt=0)
    t_chirp: float = Field(default=256.0e-6, gt=0)
    fs: float = Field(default=250.0e3, gt=0)
    n_chirps_per_slot: int = Field(default=64, ge=1)
    amplitude: float = Field(default=1.0, ge=0)
    max_range: float = Field(default=15.0, gt=0)
    speed_of_light: float = Field(default=SPEED_OF_LIGHT, gt=0)

    def to_chirp_config(self) -> ChirpConfig:
        return ChirpConfig(**self.model_dump())


class RadarSpec(_Section):
    id: str
    position: XY
    boresight_deg: float = 0.0
    f_switch: float = Field(default=10.0, gt=0, le=20.0)
    n_r: int = Field(default=1, ge=1)


class IrsSpec(_Section):
    position: XY
    normal_deg: float = 180.0
    irs_id: int = Field(default=1, ge=0, le=3)
    reflectivity: float = Field(default=1.0, ge=0)
    v_diode: float = Field(default=0.1, ge=0)
    rc: float = Field(default=0.005, ge=0)


class TargetSpec(_Section):
    id: str
    waypoints: list[XY] = Field(min_length=1)
    speed_range: XY = (0.5, 1.0)
    reflectivity: float = Field(default=0.5, ge=0)

    @model_validator(mode="after")
    def check_speed_range(self) -> TargetSpec:
        lo, hi = self.speed_range
        if lo < 0 or hi < lo:
            raise ValueError(f"speed_range must satisfy 0 <= low <= high, got {self.speed_range}")
        return self


class ClutterSpec(_Section):
    position: XY
    reflectivity: float = Field(default=0.3, ge=0)


class ChannelSpec(_Section):
    snr_db: float = 30.0
    envelope_noise_std: float = Field(default=0.01, ge=0)
    tx_amplitude: float = Field(default=2000.0, gt=0)
    a0_ratio: float = Field(default=0.3, gt=0, lt=1)
    chirps_per_symbol: int = Field(default=8, ge=1)
    lead_in_seconds: float = Field(default=0.5, ge=0)
    beacon_seconds: float = Field(default=32.0, gt=0)
    sync_confidence: float = Field(default=0.8, gt=0, le=1)


class SchedulerSpec(_Section):
    slot_seconds: float = Field(default=0.1625, gt=0)
    delta_alpha_deg: float = Field(default=15.0, gt=0)
    d_max_energy: int = Field(default=8, ge=1)
    naive_slots: int = Field(default=10, ge=1)
    strict_formula: bool = False
    infeasible_policy: Literal["clamp", "naive"] = "clamp"
    lost_timeout_slots: int = Field(default=64, ge=1)
    radar_comm_slots: int = Field(default=1, ge=1)
    max_slots_per_angle: int = Field(default=16, ge=1, le=16)
    angles: list[int] = Field(default_factory=lambda: list(SUPPORTED_ANGLES))

    @model_validator(mode="after")
    def check_angles(self) -> SchedulerSpec:
        unknown = [a for a in self.angles if a not in SUPPORTED_ANGLES]
        if unknown or not self.angles:
            raise ValueError(f"angles must be a non-empty subset of {SUPPORTED_ANGLES}")
        return self


class LocatorSpec(_Section):
    range_step: float = Field(default=0.02, gt=0)
    angle_step_deg: float = Field(default=0.5, gt=0)
    max_angle_deg: float = Field(default=60.0, gt=0, le=90)
    max_range: float = Field(default=8.0, gt=0)
    subarray: tuple[int, int] = (3, 16)
    threshold_db: float = Field(default=13.0, gt=0)
    relay_threshold_db: float = Field(default=35.0, gt=0)
    dynamic_range_db: float = Field(default=35.0, gt=0)
    max_chirps_per_capture: int = Field(default=256, ge=2)
    refine_peaks: bool = False


class ReportSpec(_Section):
    min_cell_samples: int = Field(default=30, ge=1)
    cell_width_m: float = Field(default=0.5, gt=0)
    angle_cell_deg: float = Field(default=20.0, gt=0)
    battery_mwh: float = Field(default=2500.0, gt=0)
    ber_sweep: bool = False
    ber_packets: int = Field(default=50, ge=1)


class CheckSpec(_Section):
    max_median_error_cm: float | None = None
    max_ber: float | None = None
    adaptive_not_slower: bool = False


class ScenarioConfig(BaseModel):
    """A complete, validated scenario."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    schema_version: Literal[1]
    name: str = "scenario"
    seed: int = 7
    epochs: int = Field(default=20, ge=1)
    mode: Literal["adaptive", "naive"] = "adaptive"
    nlos: bool = True
    chirp: ChirpSpec = ChirpSpec()
    radars: list[RadarSpec] = Field(min_length=1, max_length=2)
    irs: IrsSpec | None = None
    targets: list[TargetSpec] = Field(default_factory=list)
    obstacle: list[XY] = Field(default_factory=list)
    clutter: list[ClutterSpec] = Field(default_factory=list)
    channel: ChannelSpec = ChannelSpec()
    scheduler: SchedulerSpec = SchedulerSpec()
    locator: LocatorSpec = LocatorSpec()
    reports: ReportSpec = ReportSpec()
    checks: CheckSpec = CheckSpec()

    @model_validator(mode="after")
    def check_identities(self) -> ScenarioConfig:
        ids = [r.id for r in self.radars]
        if len(set(ids)) != len(ids):
            raise ValueError(f"radar ids must be unique, got {ids}")
        freqs = [r.f_switch for r in self.radars]
        if len(set(freqs)) != len(freqs):
            raise ValueError("radars sharing one IRS need distinct switching frequencies")
        tids = [t.id for t in self.targets]
        if len(set(tids)) != len(tids):
            raise ValueError(f"target ids must be unique, got {tids}")
        return self

    def with_overrides(self, **changes: object) -> ScenarioConfig:
        """Copy with top-level fields replaced, re-validated."""
        data = self.model_dump()
        data.update(changes)
        return ScenarioConfig.model_validate(data)


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Parse and validate a scenario file.

    Raises:
        pydantic.ValidationError: a field is missing, mistyped or out of range.
        tomllib.TOMLDecodeError: the file is not valid TOML.
    """
    path = Path(path)
    with path.open("rb") as fh:
        raw = tomllib.load(fh)
    cfg = ScenarioConfig.model_validate(raw)
    logger.info(f"Loaded scenario {cfg.name!r} from {path}")
    logger.debug(f"Effective scenario config: {cfg.model_dump_json()}")
    return cfg


class TargetTrack:
    """Back-and-forth motion along a polyline at constant speed."""

    def __init__(self, spec: TargetSpec, speed: float) -> None:
        self.spec = spec
        self.speed = speed
        self._points = np.asarray(spec.waypoints, dtype=np.float64)
        legs = np.diff(self._points, axis=0)
        self._lengths = np.hypot(legs[:, 0], legs[:, 1]) if len(legs) else np.zeros(0)
        self._cumulative = np.concatenate(([0.0], np.cumsum(self._lengths)))
        self.length = float(self._cumulative[-1])

    def _arc(self, t: float) -> tuple[float, float]:
        if self.length == 0.0 or self.speed == 0.0:
            return 0.0, 0.0
        s = math.fmod(self.speed * t, 2.0 * self.length)
        if s > self.length:
            return 2.0 * self.length - s, -1.0
        return s, 1.0

    def position_at(self, t: float) -> Point2:
        s, _ = self._arc(t)
        if self.length == 0.0:
            return Point2(*self._points[0])
        leg = min(int(np.searchsorted(self._cumulative, s, side="right")) - 1, len(self._lengths) - 1)
        frac = (s - self._cumulative[leg]) / self._lengths[leg] if self._lengths[leg] else 0.0
        p = self._points[leg] + frac * (self._points[leg + 1] - self._points[leg])
        return Point2(float(p[0]), float(p[1]))

    def velocity_at(self, t: float) -> tuple[float, float]:
        s, direction = self._arc(t)
        if direction == 0.0:
            return 0.0, 0.0
        leg = min(int(np.searchsorted(self._cumulative, s, side="right")) - 1, len(self._lengths) - 1)
        step = self._points[leg + 1] - self._points[leg]
        unit = step / self._lengths[leg]
        return float(direction * self.speed * unit[0]), float(direction * self.speed * unit[1])


def build_tracks(cfg: ScenarioConfig, rng: np.random.Generator) -> list[TargetTrack]:
    """Draw each target's speed from its range, in declaration order."""
    return [TargetTrack(spec, float(rng.uniform(*spec.speed_range))) for spec in cfg.targets]


def build_scene(cfg: ScenarioConfig, tracks: list[TargetTrack] | None = None, t: float = 0.0) -> Scene:
    """Snapshot of the scenario geometry at time ``t``."""
    chirp = cfg.chirp.to_chirp_config()
    radars = tuple(
        Radar.with_spacing(r.id, Point2(*r.position), chirp.wavelength, math.radians(r.boresight_deg))
        for r in cfg.radars
    )
    irs = (
        IrsSite(Point2(*cfg.irs.position), math.radians(cfg.irs.normal_deg))
        if cfg.irs is not None
        else None
    )
    if tracks is None:
        targets = tuple(
            Target(t_spec.id, Point2(*t_spec.waypoints[0]), (0.0, 0.0), t_spec.reflectivity)
            for t_spec in cfg.targets
        )
    else:
        targets = tuple(
            Target(tr.spec.id, tr.position_at(t), tr.velocity_at(t), tr.spec.reflectivity)
            for tr in tracks
        )
    return Scene(
        radars=radars,
        irs=irs,
        targets=targets,
        obstacle=tuple(Point2(*p) for p in cfg.obstacle),
        nlos=cfg.nlos,
        clutter=tuple((Point2(*c.position), c.reflectivity) for c in cfg.clutter),
    )
