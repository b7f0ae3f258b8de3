"""Range-angle MUSIC over the 4-RX array and relay-path localization.

``MusicPeak.range`` follows the range-FFT convention: half the round-trip
path. For an echo relayed through the IRS that is ``D_RS + D_ST``.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import StrEnum

import numpy as np
from numpy.typing import NDArray
from scipy import linalg, ndimage

from irs_nlos.errors import InsufficientDataError, IrsNotFoundError, NegativeLegError
from irs_nlos.geometry import Point2, irs_position, target_position
from irs_nlos.signal import (
    ChirpConfig,
    ComplexArray,
    PathEcho,
    frames_from_cube,
    range_doppler,
    synthesize_beat_cube,
)

logger = logging.getLogger(__name__)

RX_COUNT = 4


@dataclass(frozen=True, eq=False)
class RxCube:
    """Samples indexed ``[rx_element, chirp, fast_time]``; elements at lambda/2."""

    data: ComplexArray
    t0: float = 0.0
    pri: float = 0.0

    def __post_init__(self) -> None:
        if self.data.ndim != 3:
            raise ValueError(f"RxCube needs 3 axes, got shape {self.data.shape}")

    @property
    def n_rx(self) -> int:
        return int(self.data.shape[0])

    @property
    def n_chirps(self) -> int:
        return int(self.data.shape[1])


def synthesize_rx_cube(
    cfg: ChirpConfig,
    echoes: Sequence[PathEcho],
    noise_power: float = 0.0,
    *,
    n_rx: int = RX_COUNT,
    n_chirps: int | None = None,
    t0: float = 0.0,
    rng: np.random.Generator | None = None,
) -> RxCube:
    n_chirps = cfg.n_chirps_per_slot if n_chirps is None else n_chirps
    data = synthesize_beat_cube(
        cfg, echoes, noise_power, n_rx=n_rx, n_chirps=n_chirps, t0=t0, pri=cfg.t_chirp, rng=rng
    )
    return RxCube(data, t0, cfg.t_chirp)


@dataclass(frozen=True, eq=False)
class MusicGrid:
    ranges: NDArray[np.float64]
    angles: NDArray[np.float64]

    @classmethod
    def default(
        cls,
        max_range: float,
        *,
        min_range: float = 0.1,
        range_step: float = 0.02,
        angle_step_deg: float = 0.5,
        max_angle_deg: float = 60.0,
    ) -> MusicGrid:
        n_r = int(math.floor((max_range - min_range) / range_step + 1e-9)) + 1
        n_a = int(round(2 * max_angle_deg / angle_step_deg)) + 1
        ranges = np.round(min_range + range_step * np.arange(n_r), 9)
        angles = np.radians(np.round(-max_angle_deg + angle_step_deg * np.arange(n_a), 9))
        return cls(ranges, angles)

    @property
    def range_step(self) -> float:
        return float(self.ranges[1] - self.ranges[0]) if len(self.ranges) > 1 else 0.0

    @property
    def angle_step(self) -> float:
        return float(self.angles[1] - self.angles[0]) if len(self.angles) > 1 else 0.0


@dataclass(frozen=True)
class MusicPeak:
    range: float
    aoa: float
    power: float
    pseudo_db: float = 0.0


def forward_backward_avg(r: ComplexArray) -> ComplexArray:
    """Average a covariance with its exchanged conjugate."""
    return 0.5 * (r + np.flip(r.conj(), axis=(0, 1)))


def smoothed_covariance(cube: RxCube, subarray: tuple[int, int]) -> tuple[ComplexArray, int]:
    """Covariance over all (angle, range) subarrays and chirps."""
    la, lr = subarray
    m, _, n = cube.data.shape
    if not (1 <= la <= m and 1 <= lr <= n):
        raise ValueError(f"subarray {subarray} does not fit cube shape {cube.data.shape}")
    views = np.lib.stride_tricks.sliding_window_view(cube.data, (la, lr), axis=(0, 2))
    snapshots = views.reshape(-1, la * lr)
    k = snapshots.shape[0]
    if k < la * lr:
        raise InsufficientDataError(f"insufficient snapshots: {k} for dimension {la * lr}")
    r = snapshots.T @ snapshots.conj() / k
    return forward_backward_avg(r), k


def estimate_source_count(eigenvalues: NDArray[np.float64], dynamic_range_db: float = 35.0) -> int:
    """Eigenvalues within ``dynamic_range_db`` of the largest count as sources."""
    top = float(np.max(eigenvalues))
    if top <= 0:
        return 0
    return int(np.sum(eigenvalues > top * 10.0 ** (-dynamic_range_db / 10.0)))


def _steering(cfg: ChirpConfig, grid: MusicGrid, la: int, lr: int) -> tuple[ComplexArray, ComplexArray]:
    a_theta = np.exp(1j * np.pi * np.outer(np.arange(la), np.sin(grid.angles)))
    beat = cfg.slope * 2.0 * grid.ranges / cfg.speed_of_light
    a_range = np.exp(1j * 2.0 * np.pi * np.outer(np.arange(lr), beat / cfg.fs))
    return a_theta, a_range


def _vertex_offset(values: NDArray[np.float64], i: int) -> float:
    """Parabolic vertex around ``values[i]`` in grid steps, within half a step."""
    if i <= 0 or i >= len(values) - 1:
        return 0.0
    lower, centre, upper = float(values[i - 1]), float(values[i]), float(values[i + 1])
    curvature = lower - 2.0 * centre + upper
    if curvature >= 0.0:
        return 0.0
    return float(np.clip(0.5 * (lower - upper) / curvature, -0.5, 0.5))


def music_2d(
    cube: RxCube,
    cfg: ChirpConfig,
    grid: MusicGrid,
    n_sources: int = 1,
    *,
    subarray: tuple[int, int] = (3, 16),
    auto_sources: bool = False,
    dynamic_range_db: float = 35.0,
    refine: bool = False,
) -> list[MusicPeak]:
    """Joint range-angle MUSIC.

    The covariance is smoothed over sliding (element, sample) subarrays and
    forward-backward averaged so coherent echoes separate. With
    ``auto_sources`` the signal subspace grows to cover every eigenvalue
    within ``dynamic_range_db`` of the largest. With ``refine`` each peak
    moves to the vertex of a parabola through its dB neighbours along both
    axes, so estimates are no longer tied to the grid.

    Returns:
        Up to ``n_sources`` (or the estimated count) peaks, strongest
        Bartlett power first.

    Raises:
        InsufficientDataError: the covariance carries no energy.
    """
    la, lr = subarray
    dim = la * lr
    if not 1 <= n_sources < dim:
        raise ValueError(f"n_sources must lie in [1, {dim})")
    r, _ = smoothed_covariance(cube, subarray)
    power = float(np.real(np.trace(r)))
    if not math.isfinite(power) or power <= 1e-30:
        raise InsufficientDataError("insufficient snapshots: covariance is degenerate")

    eigenvalues, eigenvectors = linalg.eigh(r)
    d = n_sources
    if auto_sources:
        d = max(d, estimate_source_count(eigenvalues, dynamic_range_db))
    d = min(d, dim - 1)
    signal = eigenvectors[:, -d:].reshape(la, lr, d)

    a_theta, a_range = _steering(cfg, grid, la, lr)
    partial = np.einsum("ink,nr->ikr", signal.conj(), a_range)
    proj = np.einsum("ikr,it->trk", partial, a_theta)
    captured = np.sum(np.abs(proj) ** 2, axis=2) / dim
    pseudo = 1.0 / np.maximum(1.0 - captured, 1e-12)

    pseudo_db = 10.0 * np.log10(pseudo)
    local = ndimage.maximum_filter(pseudo, size=3, mode="nearest") == pseudo
    ti, ri = np.nonzero(local)
    order = np.argsort(-pseudo[ti, ri], kind="stable")[:d]

    peaks = []
    for k in order:
        t, rr = ti[k], ri[k]
        a = np.kron(a_theta[:, t], a_range[:, rr])
        bartlett = float(np.real(a.conj() @ r @ a)) / dim**2
        rng_est, aoa_est = float(grid.ranges[rr]), float(grid.angles[t])
        if refine:
            rng_est += _vertex_offset(pseudo_db[t, :], rr) * grid.range_step
            aoa_est += _vertex_offset(pseudo_db[:, rr], t) * grid.angle_step
        peaks.append(
            MusicPeak(
                range=rng_est,
                aoa=aoa_est,
                power=10.0 * math.log10(max(bartlett, 1e-300)),
                pseudo_db=float(pseudo_db[t, rr]),
            )
        )
    peaks.sort(key=lambda p: -p.power)
    logger.debug(f"MUSIC found {len(peaks)} peaks with signal dimension {d}")
    return peaks


def localize_irs(retro_echo_peak: MusicPeak | None, radar: Point2, boresight: float = 0.0) -> Point2:
    """IRS position from its retro-reflected peak."""
    if retro_echo_peak is None:
        raise IrsNotFoundError()
    return irs_position(radar, retro_echo_peak.range, boresight + retro_echo_peak.aoa)


def select_ook_peak(peaks: Sequence[MusicPeak], ook_range: float, tolerance: float = 0.3) -> MusicPeak:
    """The peak nearest the range bin that carried the IRS on/off keying."""
    near = [p for p in peaks if abs(p.range - ook_range) <= tolerance]
    if not near:
        raise IrsNotFoundError()
    return min(near, key=lambda p: (abs(p.range - ook_range), -p.power))


def select_relay_peak(
    peaks: Sequence[MusicPeak],
    d_rs: float,
    irs_aoa: float,
    *,
    min_extra: float = 0.15,
    angle_tolerance: float = math.radians(3.0),
) -> MusicPeak | None:
    """Strongest peak arriving from the IRS direction from beyond the IRS."""
    relayed = [
        p
        for p in peaks
        if p.range > d_rs + min_extra and abs(p.aoa - irs_aoa) <= angle_tolerance
    ]
    return max(relayed, key=lambda p: p.power, default=None)


def localize_target(
    total_path: float, d_rs: float, alpha: float, phi: float, irs: Point2
) -> Point2:
    """Target position from the relay path length and the IRS beam angle."""
    if total_path < d_rs:
        raise NegativeLegError(total_path, d_rs)
    return target_position(irs, total_path - d_rs, alpha, phi)


class PeakLabel(StrEnum):
    LOS = "LoS"
    NLOS_VIA_IRS = "NLoS-via-IRS"


@dataclass(frozen=True)
class ClassifiedPeak:
    peak: MusicPeak
    label: PeakLabel


def classify_nlos(
    irs_on_peaks: Sequence[MusicPeak],
    irs_off_peaks: Sequence[MusicPeak],
    *,
    threshold_db: float = 13.0,
    range_tolerance: float = 0.06,
    angle_tolerance: float = math.radians(2.0),
) -> list[ClassifiedPeak]:
    """Label IRS-on peaks by whether they survive with the IRS switched off.

    Only peaks strictly within ``threshold_db`` of the strongest IRS-on
    peak are reported.
    """
    if not irs_on_peaks:
        return []
    strongest = max(p.power for p in irs_on_peaks)

    def persists(peak: MusicPeak) -> bool:
        return any(
            abs(peak.range - q.range) <= range_tolerance and abs(peak.aoa - q.aoa) <= angle_tolerance
            for q in irs_off_peaks
        )

    return [
        ClassifiedPeak(p, PeakLabel.LOS if persists(p) else PeakLabel.NLOS_VIA_IRS)
        for p in irs_on_peaks
        if p.power > strongest - threshold_db
    ]


def estimate_velocity(cube: RxCube, cfg: ChirpConfig, range_hint: float) -> float:
    """Radial velocity at the range-Doppler column nearest ``range_hint``."""
    rd = range_doppler(frames_from_cube(cube.data, cube.t0, cube.pri or cfg.t_chirp), cfg)
    column = int(np.argmin(np.abs(rd.ranges - range_hint)))
    return float(rd.velocities[int(np.argmax(rd.magnitude[:, column]))])
