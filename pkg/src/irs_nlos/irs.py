"""Behavioural model of the switchable Van Atta reflector.

The surface has six patch elements at half-wavelength spacing. In retro
mode the switches are open and paired elements re-radiate back toward the
source. In reflect mode one of four transmission-line pairs is switched in
and the beam leaves at a fixed angle from the retro direction.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import StrEnum
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import signal as sps
from scipy import special

from irs_nlos.errors import UnsupportedAngleError

logger = logging.getLogger(__name__)

ELEMENT_COUNT = 6
SUPPORTED_ANGLES: tuple[int, ...] = (30, 45, 60, 75)


@dataclass(frozen=True)
class SwitchConfig:
    lines: frozenset[str] = frozenset()
    switches: frozenset[str] = frozenset()

    @property
    def is_off(self) -> bool:
        return not self.lines and not self.switches


_SWITCH_TABLE: dict[int, SwitchConfig] = {
    30: SwitchConfig(frozenset({"L3", "L5"}), frozenset({"S1_3", "S2_2", "S3_1", "S4_4"})),
    45: SwitchConfig(frozenset({"L2", "L8"}), frozenset({"S1_2", "S2_3", "S3_4", "S4_1"})),
    60: SwitchConfig(frozenset({"L1", "L7"}), frozenset({"S1_1", "S2_4", "S3_3", "S4_2"})),
    75: SwitchConfig(frozenset({"L4", "L6"}), frozenset({"S1_4", "S2_1", "S3_2", "S4_3"})),
}


def switch_config_for(angle: float) -> SwitchConfig:
    """Transmission lines and switch positions for a reflection angle in degrees."""
    key = int(round(angle))
    if not math.isclose(angle, key, abs_tol=1e-9) or key not in _SWITCH_TABLE:
        raise UnsupportedAngleError(angle)
    return _SWITCH_TABLE[key]


class IrsMode(StrEnum):
    OFF = "off"
    RETRO = "retro"
    REFLECT = "reflect"


@dataclass(frozen=True)
class IrsState:
    mode: IrsMode = IrsMode.RETRO
    angle: int | None = None
    ook_bit: int | None = None
    irs_id: int = 0

    def __post_init__(self) -> None:
        if self.mode is IrsMode.REFLECT:
            if self.angle is None:
                raise ValueError("reflect mode needs an angle")
            switch_config_for(self.angle)
        elif self.angle is not None:
            raise ValueError(f"angle is only meaningful in reflect mode, got {self.angle}")
        if self.ook_bit is not None:
            if self.mode is not IrsMode.RETRO:
                raise ValueError("ook_bit is only meaningful in retro mode")
            if self.ook_bit not in (0, 1):
                raise ValueError("ook_bit must be 0 or 1")

    @property
    def switch_config(self) -> SwitchConfig:
        if self.mode is IrsMode.REFLECT and self.angle is not None:
            return switch_config_for(self.angle)
        return SwitchConfig()


def array_factor(psi: ArrayLike, n: int = ELEMENT_COUNT) -> NDArray[np.float64]:
    """Normalised uniform-array factor ``|sin(n psi/2) / (n sin(psi/2))|``."""
    return np.abs(special.diric(np.asarray(psi, dtype=np.float64), n))


def reflect_gain(state: IrsState, incident_bearing: float, outgoing_bearing: float) -> float:
    """Beam gain between two bearings measured from the IRS normal.

    The offset from the retro direction is ``outgoing - incident``. Retro
    mode peaks at zero offset; reflect mode peaks at ``state.angle``
    degrees off the retro direction, on either side.
    """
    if state.mode is IrsMode.OFF:
        return 0.0
    delta = math.remainder(outgoing_bearing - incident_bearing, 2.0 * math.pi)
    if state.mode is IrsMode.RETRO:
        psi = math.pi * math.sin(delta)
    else:
        assert state.angle is not None
        psi = math.pi * (math.sin(abs(delta)) - math.sin(math.radians(state.angle)))
    return float(array_factor(psi))


def element_pattern(theta: float) -> float:
    """Cosine patch pattern, zero behind the ground plane."""
    return max(math.cos(theta), 0.0)


@dataclass(frozen=True)
class VaaPairing:
    """Which element re-radiates what each element receives, plus line delays.

    ``pairing[m]`` is the partner of element ``m``; ``line_delays[m]`` is the
    extra phase (radians) added on the path that feeds element ``m``.
    """

    pairing: tuple[int, ...]
    line_delays: tuple[float, ...]

    def __post_init__(self) -> None:
        n = len(self.pairing)
        if n != ELEMENT_COUNT or len(self.line_delays) != n:
            raise ValueError(f"pairing needs {ELEMENT_COUNT} elements and delays")
        if sorted(self.pairing) != list(range(n)):
            raise ValueError("pairing must be a permutation")
        if any(self.pairing[self.pairing[m]] != m for m in range(n)):
            raise ValueError("pairing must be an involution")

    @property
    def element_count(self) -> int:
        return len(self.pairing)

    @classmethod
    def mirror(cls, n: int = ELEMENT_COUNT) -> VaaPairing:
        """Classical Van Atta wiring: element m to element n-1-m, equal lines."""
        return cls(tuple(n - 1 - m for m in range(n)), (0.0,) * n)

    @classmethod
    def with_gradient(cls, delta: float, n: int = ELEMENT_COUNT) -> VaaPairing:
        """Mirror wiring with a linear line-delay gradient of ``delta`` per element."""
        return cls(tuple(n - 1 - m for m in range(n)), tuple(m * delta for m in range(n)))


def _element_offsets(n: int) -> NDArray[np.float64]:
    # positions in half-wavelengths, centred on the array
    return np.arange(n) - (n - 1) / 2.0


def _aperture_phase(pairing: VaaPairing, incident: float) -> NDArray[np.float64]:
    u = _element_offsets(pairing.element_count)
    partner = np.asarray(pairing.pairing)
    return np.pi * u[partner] * math.sin(incident) - np.asarray(pairing.line_delays)


def steering_angle_from_pairing(pairing: VaaPairing, incident: float) -> float:
    """Outgoing beam direction from the phase gradient across the aperture."""
    phase = _aperture_phase(pairing, incident)
    step = np.angle(np.sum(np.exp(1j * np.diff(phase))))
    return float(np.arcsin(np.clip(-step / np.pi, -1.0, 1.0)))


def far_field_pattern(
    pairing: VaaPairing, incident: float, bearings: ArrayLike
) -> NDArray[np.float64]:
    """Brute-force normalised far-field magnitude over ``bearings``."""
    theta = np.atleast_1d(np.asarray(bearings, dtype=np.float64))
    u = _element_offsets(pairing.element_count)
    phase = _aperture_phase(pairing, incident)
    field = np.exp(1j * (phase[None, :] + np.pi * np.outer(np.sin(theta), u))).sum(axis=1)
    return np.abs(field) / pairing.element_count


def steered_pairing(angle: float, incident: float = 0.0) -> VaaPairing:
    """Line-delay gradient that sends a wave from ``incident`` out at ``angle``."""
    return VaaPairing.with_gradient(math.pi * (math.sin(angle) - math.sin(incident)))


class DetectorOutput(NamedTuple):
    """Detector voltage tagged with the sample times it was computed at."""

    times: NDArray[np.float64]
    volts: NDArray[np.float64]


def envelope_detect(
    times: ArrayLike,
    amplitudes: ArrayLike,
    v_diode: float,
    rc: float = 0.0,
) -> DetectorOutput:
    """Diode detector output for a uniformly sampled amplitude series.

    Each sample is rectified to ``max(A - v_diode, 0)`` and then passed
    through a first-order RC low-pass that starts discharged at the first
    sample, held constant between samples.
    """
    t = np.asarray(times, dtype=np.float64)
    a = np.asarray(amplitudes, dtype=np.float64)
    if t.shape != a.shape:
        raise ValueError("times and amplitudes must have the same shape")
    if np.any(a < 0):
        raise ValueError("amplitudes must be non-negative")
    rectified = np.maximum(a - v_diode, 0.0)
    if rc <= 0.0 or len(a) < 2:
        return DetectorOutput(t, rectified)

    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-6):
        raise ValueError("envelope_detect needs uniform sampling")
    k = 1.0 - math.exp(-float(dt[0]) / rc)
    out = np.empty_like(rectified)
    out[0] = 0.0
    out[1:] = sps.lfilter([k], [1.0, -(1.0 - k)], rectified[1:])
    return DetectorOutput(t, out)


@dataclass(frozen=True)
class PowerProfile:
    """Average power per operating mode in microwatts, with duty fractions."""

    sleep_uw: float
    comm_uw: float
    reflect_uw: float
    duty_sleep: float
    duty_comm: float
    duty_reflect: float

    def __post_init__(self) -> None:
        duties = (self.duty_sleep, self.duty_comm, self.duty_reflect)
        if any(d < 0 for d in duties) or not math.isclose(sum(duties), 1.0, abs_tol=1e-9):
            raise ValueError(f"duty fractions must be non-negative and sum to 1, got {duties}")

    @classmethod
    def measured_mix(cls) -> PowerProfile:
        """Sleep 46.5 uW, communicate 2763 uW, reflect 50 uW at 50/5/45 % duty."""
        return cls(46.5, 2763.0, 50.0, 0.50, 0.05, 0.45)


def power_budget(profile: PowerProfile, battery_energy_mwh: float = 2500.0) -> tuple[float, float]:
    """Return ``(average_uW, lifetime_days)``."""
    if battery_energy_mwh <= 0:
        raise ValueError("battery energy must be positive")
    avg_uw = (
        profile.duty_sleep * profile.sleep_uw
        + profile.duty_comm * profile.comm_uw
        + profile.duty_reflect * profile.reflect_uw
    )
    hours = battery_energy_mwh * 1000.0 / avg_uw
    return avg_uw, hours / 24.0
