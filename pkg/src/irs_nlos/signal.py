"""FMCW beat-signal synthesis and range / range-Doppler processing.

Everything here works on complex baseband after the mixer: a round-trip
path of length L shows up as a tone at ``slope * L / c`` plus a Doppler
offset, carrying the carrier phase ``2*pi*f0*L/c``.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy import ndimage
from scipy.signal import windows

from irs_nlos.errors import DegenerateGeometryError, InsufficientDataError

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = 3.0e8

ComplexArray = NDArray[np.complex128]
FloatArray = NDArray[np.float64]


@dataclass(frozen=True)
class ChirpConfig:
    """FMCW waveform parameters.

    Defaults describe a 24 GHz radar sweeping 250 MHz in 256 us, sampled at
    250 kHz (64 fast-time samples per chirp).
    """

    f0: float = 24.0e9
    bandwidth: float = 250.0e6
    t_chirp: float = 256.0e-6
    fs: float = 250.0e3
    n_chirps_per_slot: int = 64
    amplitude: float = 1.0
    max_range: float = 15.0
    speed_of_light: float = SPEED_OF_LIGHT

    def __post_init__(self) -> None:
        for name in ("f0", "bandwidth", "t_chirp", "fs", "max_range", "speed_of_light"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be finite and positive, got {value}")
        if self.n_chirps_per_slot < 1:
            raise ValueError("n_chirps_per_slot must be at least 1")
        if self.amplitude < 0 or not math.isfinite(self.amplitude):
            raise ValueError("amplitude must be finite and non-negative")
        max_beat = self.slope * 2.0 * self.max_range / self.speed_of_light
        if self.fs < 2.0 * max_beat:
            raise ValueError(
                f"fs={self.fs:g} Hz under-samples the {max_beat:g} Hz beat at "
                f"max_range={self.max_range:g} m"
            )
        if self.n_samples < 2:
            raise ValueError("fs * t_chirp must give at least two samples per chirp")

    @property
    def slope(self) -> float:
        """Sweep slope in Hz/s."""
        return self.bandwidth / self.t_chirp

    @property
    def wavelength(self) -> float:
        return self.speed_of_light / self.f0

    @property
    def n_samples(self) -> int:
        return int(round(self.fs * self.t_chirp))

    @property
    def range_resolution(self) -> float:
        """One-way range per FFT bin without zero padding, c/(2B)."""
        return self.speed_of_light / (2.0 * self.bandwidth)

    @property
    def fast_time(self) -> FloatArray:
        return np.arange(self.n_samples, dtype=np.float64) / self.fs


@dataclass(frozen=True)
class PathEcho:
    """One propagation path as seen by the radar.

    ``total_path_length`` is the full out-and-back distance at the frame's
    reference epoch. ``aoa`` is the arrival angle relative to the radar
    boresight and only matters for multi-element synthesis.
    """

    total_path_length: float
    gain: float
    doppler_velocity: float = 0.0
    aoa: float = 0.0

    def __post_init__(self) -> None:
        values = (self.total_path_length, self.gain, self.doppler_velocity, self.aoa)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"echo parameters must be finite: {self}")
        if self.total_path_length < 0:
            raise ValueError("total_path_length must be non-negative")
        if self.gain < 0:
            raise ValueError("gain must be non-negative")


@dataclass(frozen=True, eq=False)
class IqFrame:
    """Dechirped samples of a single chirp."""

    samples: ComplexArray
    t0: float = 0.0
    chirp_index: int = 0

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("IqFrame samples must be finite")


@dataclass(frozen=True, eq=False)
class RangeSpectrum:
    """Windowed range-FFT magnitudes with their one-way range axis."""

    magnitudes: FloatArray
    ranges: FloatArray
    bin_width: float

    @property
    def peak_bin(self) -> int:
        return int(np.argmax(self.magnitudes))

    @property
    def peak_range(self) -> float:
        return float(self.ranges[self.peak_bin])

    def bin_for(self, distance: float) -> int:
        """Nearest bin to a one-way range."""
        return int(np.clip(round(distance / self.bin_width), 0, len(self.ranges) - 1))


@dataclass(frozen=True, eq=False)
class RangeDopplerMap:
    """Magnitude over (velocity, range) with both axes attached."""

    magnitude: FloatArray
    ranges: FloatArray
    velocities: FloatArray
    velocity_resolution: float = field(default=0.0)

    def peak(self) -> tuple[float, float]:
        """Return ``(range, velocity)`` of the global maximum."""
        iv, ir = np.unravel_index(int(np.argmax(self.magnitude)), self.magnitude.shape)
        return float(self.ranges[ir]), float(self.velocities[iv])

    def peaks(self, max_peaks: int = 8, rel_threshold_db: float = 20.0) -> list[tuple[float, float]]:
        """Local maxima within ``rel_threshold_db`` of the strongest, strongest first."""
        mag = self.magnitude
        top = float(mag.max()) if mag.size else 0.0
        if top <= 0.0:
            return []
        local = ndimage.maximum_filter(mag, size=3, mode="nearest") == mag
        strong = mag >= top * 10.0 ** (-rel_threshold_db / 20.0)
        iv, ir = np.nonzero(local & strong)
        order = np.argsort(-mag[iv, ir], kind="stable")[:max_peaks]
        return [(float(self.ranges[ir[k]]), float(self.velocities[iv[k]])) for k in order]

    def fastest_peak(self, rel_threshold_db: float = 20.0) -> tuple[float, float]:
        """Among the significant peaks, the one with the largest speed."""
        found = self.peaks(rel_threshold_db=rel_threshold_db)
        if not found:
            return self.peak()
        return max(found, key=lambda rv: abs(rv[1]))


def beat_frequency(cfg: ChirpConfig, path_length_round_trip: float) -> float:
    """Beat tone for a round-trip path, ``slope * L / c``."""
    if path_length_round_trip < 0:
        raise ValueError("path length must be non-negative")
    return cfg.slope * path_length_round_trip / cfg.speed_of_light


def doppler_shift(cfg: ChirpConfig, v: float) -> float:
    """Doppler offset ``2v/lambda``; closing velocities are positive."""
    if abs(v) >= 0.01 * cfg.speed_of_light:
        raise ValueError(f"velocity {v} m/s outside the narrowband model")
    return 2.0 * v / cfg.wavelength


def noise_power_for_snr(reference_gain: float, snr_db: float, amplitude: float = 1.0) -> float:
    """Complex noise power giving ``snr_db`` against an echo of ``reference_gain``."""
    return (reference_gain * amplitude) ** 2 / 10.0 ** (snr_db / 10.0)


def radar_echo_gain(leg_lengths: Sequence[float], reflectivity: float = 1.0) -> float:
    """Amplitude of an echo that crosses each one-way leg twice.

    Amplitude falls as ``1/d^2`` per leg, normalised to 1 m, which is the
    amplitude form of the radar equation's ``1/R^4`` power law.
    """
    gain = reflectivity
    for d in leg_lengths:
        if d <= 0:
            raise DegenerateGeometryError(f"leg length {d}")
        gain /= d * d
    return gain


def free_space_amplitude(distance: float, wavelength: float, tx_amplitude: float = 1.0) -> float:
    """One-way Friis amplitude, ``a * lambda / (4 pi d)``."""
    if distance <= 0:
        raise DegenerateGeometryError(f"distance {distance}")
    return tx_amplitude * wavelength / (4.0 * math.pi * distance)


def synthesize_beat_cube(
    cfg: ChirpConfig,
    echoes: Sequence[PathEcho],
    noise_power: float = 0.0,
    *,
    n_rx: int = 1,
    n_chirps: int = 1,
    t0: float = 0.0,
    pri: float | None = None,
    rng: np.random.Generator | None = None,
) -> ComplexArray:
    """Synthesize ``(n_rx, n_chirps, n_samples)`` beat samples.

    RX elements sit at half-wavelength spacing; an echo arriving at ``aoa``
    advances by ``pi * sin(aoa)`` per element. Chirp ``c`` starts at
    ``t0 + c * pri``.
    """
    if noise_power < 0 or not math.isfinite(noise_power):
        raise ValueError("noise_power must be finite and non-negative")
    if n_rx < 1 or n_chirps < 1:
        raise ValueError("n_rx and n_chirps must be positive")
    pri = cfg.t_chirp if pri is None else pri

    t = cfg.fast_time
    starts = t0 + pri * np.arange(n_chirps)
    elements = np.arange(n_rx)
    cube = np.zeros((n_rx, n_chirps, cfg.n_samples), dtype=np.complex128)
    for echo in echoes:
        if echo.gain == 0.0:
            continue
        f_b = beat_frequency(cfg, echo.total_path_length)
        f_d = doppler_shift(cfg, echo.doppler_velocity)
        theta = math.fmod(2.0 * math.pi * cfg.f0 * echo.total_path_length / cfg.speed_of_light, 2.0 * math.pi)
        fast = np.exp(1j * 2.0 * np.pi * (f_b + f_d) * t)
        slow = np.exp(1j * (2.0 * np.pi * f_d * starts + theta))
        spatial = np.exp(1j * np.pi * elements * math.sin(echo.aoa))
        cube += echo.gain * cfg.amplitude * np.einsum("m,c,n->mcn", spatial, slow, fast)

    if noise_power > 0:
        if rng is None:
            raise ValueError("noise requires an explicit random generator")
        scale = math.sqrt(noise_power / 2.0)
        cube += scale * (rng.standard_normal(cube.shape) + 1j * rng.standard_normal(cube.shape))
    return cube


def synthesize_beat_frame(
    cfg: ChirpConfig,
    echoes: Sequence[PathEcho],
    noise_power: float = 0.0,
    *,
    t0: float = 0.0,
    chirp_index: int = 0,
    rng: np.random.Generator | None = None,
) -> IqFrame:
    """Dechirped samples of one chirp on one RX element."""
    cube = synthesize_beat_cube(cfg, echoes, noise_power, t0=t0, rng=rng)
    return IqFrame(samples=cube[0, 0], t0=t0, chirp_index=chirp_index)


def _range_axis(cfg: ChirpConfig, n_fft: int) -> tuple[FloatArray, float]:
    bin_width = cfg.range_resolution * cfg.n_samples / n_fft
    return np.arange(n_fft // 2) * bin_width, bin_width


def range_fft(frame: IqFrame, cfg: ChirpConfig, n_fft: int | None = None) -> RangeSpectrum:
    """Hann-windowed range FFT of one chirp.

    Bin ``k`` maps to one-way range ``k * c/(2B) * N / n_fft``. Magnitudes are
    divided by the window sum so a noiseless on-bin echo reads its gain.
    """
    n = len(frame.samples)
    if n == 0:
        raise InsufficientDataError("insufficient samples: empty frame")
    n_fft = n if n_fft is None else n_fft
    if n_fft < n:
        raise ValueError("n_fft must not truncate the frame")
    window = windows.hann(n, sym=False)
    spectrum = np.fft.fft(frame.samples * window, n_fft)[: n_fft // 2]
    ranges, bin_width = _range_axis(cfg, n_fft)
    return RangeSpectrum(np.abs(spectrum) / window.sum(), ranges, bin_width)


def range_doppler(frames: Sequence[IqFrame], cfg: ChirpConfig) -> RangeDopplerMap:
    """Two-dimensional FFT across fast time and slow time.

    The chirp repetition interval is read from the frame start times, which
    must be uniformly spaced.
    """
    if len(frames) < 2:
        raise InsufficientDataError("insufficient slow-time: need at least 2 chirps")
    starts = np.array([f.t0 for f in frames])
    gaps = np.diff(starts)
    pri = float(gaps[0])
    if pri <= 0 or not np.allclose(gaps, pri, rtol=1e-6, atol=1e-12):
        raise ValueError("chirps must be uniformly spaced in time")

    data = np.stack([f.samples for f in frames])
    n_chirps, n = data.shape
    fast_win = windows.hann(n, sym=False)
    slow_win = windows.hann(n_chirps, sym=False)
    rng_fft = np.fft.fft(data * fast_win[None, :], axis=1)[:, : n // 2]
    rd = np.fft.fftshift(np.fft.fft(rng_fft * slow_win[:, None], axis=0), axes=0)
    magnitude = np.abs(rd) / (fast_win.sum() * slow_win.sum())

    ranges, _ = _range_axis(cfg, n)
    doppler = np.fft.fftshift(np.fft.fftfreq(n_chirps, d=pri))
    velocities = doppler * cfg.wavelength / 2.0
    resolution = cfg.wavelength / (2.0 * n_chirps * pri)
    logger.debug(f"Range-Doppler map {magnitude.shape}, velocity bin {resolution:.3f} m/s")
    return RangeDopplerMap(magnitude, ranges, velocities, resolution)


def frames_from_cube(cube: ComplexArray, t0: float, pri: float, element: int = 0) -> list[IqFrame]:
    """Split one RX element of a cube into per-chirp frames."""
    return [
        IqFrame(samples=cube[element, c], t0=t0 + c * pri, chirp_index=c)
        for c in range(cube.shape[1])
    ]
