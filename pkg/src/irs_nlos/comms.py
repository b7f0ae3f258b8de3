"""Radar-to-IRS amplitude keying, IRS-to-radar OOK and packet framing.

Downlink (radar to IRS): each bit lasts ``2*N_r/F`` seconds; TX1 and TX2
take turns every ``1/F`` seconds at amplitude A1 for a one and A0 for a zero.
The IRS sees the envelope through a diode detector sampled at 64 Hz.

Uplink (IRS to radar): the IRS toggles between retro-reflection (1) and
off (0) once per symbol; the radar thresholds the echo magnitude at the
IRS range bin.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import StrEnum
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import signal as sps

from irs_nlos.errors import (
    CalibrationRequiredError,
    InsufficientDataError,
    MalformedPacketError,
    PacketNotFoundError,
)
from irs_nlos.irs import IrsMode, IrsState, envelope_detect

logger = logging.getLogger(__name__)

MCU_SAMPLE_RATE = 64.0
HEADER: tuple[int, ...] = (1, 0)
PREAMBLE: tuple[int, ...] = (1, 0, 1)
PAYLOAD_BITS = 6
BIT_ONE_RATIO = 0.6
MAX_SWITCHING_HZ = 20.0

# Boundary samples land on the later half-bit.
_EDGE = 1e-9

# Edge-quantization spurs and roundoff stay below this share of the strongest line.
_MIN_LINE_FRACTION = 0.25

Bits = tuple[int, ...]


def _check_bits(bits: Sequence[int]) -> Bits:
    out = tuple(int(b) for b in bits)
    if any(b not in (0, 1) for b in out):
        raise ValueError(f"bits must be 0 or 1, got {list(bits)}")
    return out


# =============================================================================
# Radar -> IRS encoding
# =============================================================================


class Antenna(StrEnum):
    TX1 = "TX1"
    TX2 = "TX2"


class TxSegment(NamedTuple):
    t_start: float
    t_end: float
    antenna: Antenna
    amplitude: float


@dataclass(frozen=True)
class RadarTxPlan:
    """What one radar keys onto its two transmit antennas."""

    f_switch: float
    bits: Bits
    a1: float = 1.0
    a0: float = 0.3
    n_r: int = 1
    max_switching_hz: float = MAX_SWITCHING_HZ

    def __post_init__(self) -> None:
        object.__setattr__(self, "bits", _check_bits(self.bits))
        if not 0.0 < self.f_switch <= self.max_switching_hz:
            raise ValueError(
                f"switching frequency {self.f_switch} Hz outside (0, {self.max_switching_hz}]"
            )
        if not 0.0 < self.a0 < self.a1:
            raise ValueError(f"need 0 < A0 < A1, got A0={self.a0}, A1={self.a1}")
        if self.n_r < 1:
            raise ValueError("N_r must be at least 1")

    @property
    def bit_duration(self) -> float:
        return 2.0 * self.n_r / self.f_switch

    @property
    def duration(self) -> float:
        return len(self.bits) * self.bit_duration


def data_rate(f_switch: float, n_r: int = 1) -> float:
    """Downlink throughput in bits per second."""
    if f_switch <= 0 or n_r < 1:
        raise ValueError("need F > 0 and N_r >= 1")
    return f_switch / (2.0 * n_r)


def encode_radar_bits(plan: RadarTxPlan) -> list[TxSegment]:
    """Amplitude-versus-time schedule, TX1 then TX2 in every half-bit pair."""
    half = 1.0 / plan.f_switch
    segments: list[TxSegment] = []
    t = 0.0
    for bit in plan.bits:
        amplitude = plan.a1 if bit else plan.a0
        for _ in range(plan.n_r):
            segments.append(TxSegment(t, t + half, Antenna.TX1, amplitude))
            segments.append(TxSegment(t + half, t + 2 * half, Antenna.TX2, amplitude))
            t += 2 * half
    return segments


def beacon_bits(n_bits: int) -> Bits:
    """Alternating 1010... identification pattern."""
    return tuple((k + 1) % 2 for k in range(n_bits))


def beacon_line(f_switch: float, n_r: int = 1) -> float:
    """Spectral line of a 1010 beacon keyed at ``f_switch``: one period is two bits."""
    return f_switch / (4.0 * n_r)


# =============================================================================
# Packets
# =============================================================================


@dataclass(frozen=True)
class Packet:
    payload: Bits
    header: Bits = HEADER
    preamble: Bits = PREAMBLE

    def __post_init__(self) -> None:
        object.__setattr__(self, "payload", _check_bits(self.payload))
        if len(self.payload) != PAYLOAD_BITS:
            raise ValueError(f"payload must be {PAYLOAD_BITS} bits, got {len(self.payload)}")

    @property
    def bits(self) -> Bits:
        return self.header + self.preamble + self.payload


def frame_packet(payload: Sequence[int], header: Bits = HEADER, preamble: Bits = PREAMBLE) -> Bits:
    """Header, preamble and payload as one bit tuple."""
    return Packet(tuple(payload), header, preamble).bits


def deframe_packet(bits: Sequence[int], header: Bits = HEADER, preamble: Bits = PREAMBLE) -> Bits:
    """Payload of a framed packet; rejects a wrong prefix or length."""
    bits = _check_bits(bits)
    prefix = header + preamble
    if len(bits) != len(prefix) + PAYLOAD_BITS:
        raise MalformedPacketError(f"expected {len(prefix) + PAYLOAD_BITS} bits, got {len(bits)}")
    if bits[: len(prefix)] != prefix:
        raise MalformedPacketError(f"bad prefix {bits[: len(prefix)]}, expected {prefix}")
    return bits[len(prefix) :]


# =============================================================================
# Envelope traces at the IRS
# =============================================================================


@dataclass(frozen=True, eq=False)
class EnvelopeTrace:
    """Detector output sampled by the IRS microcontroller."""

    samples: NDArray[np.float64]
    t0: float = 0.0
    fs: float = MCU_SAMPLE_RATE

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.float64))
        if self.fs <= 0:
            raise ValueError("fs must be positive")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def times(self) -> NDArray[np.float64]:
        return self.t0 + np.arange(len(self.samples)) / self.fs

    @property
    def duration(self) -> float:
        return len(self.samples) / self.fs

    def slice_from(self, offset: int, length: int | None = None) -> EnvelopeTrace:
        stop = None if length is None else offset + length
        return EnvelopeTrace(self.samples[offset:stop], self.t0 + offset / self.fs, self.fs)


@dataclass(frozen=True)
class Transmission:
    """A radar plan as received at the IRS: per-antenna link gains and start time."""

    plan: RadarTxPlan
    gain_tx1: float
    gain_tx2: float
    start: float = 0.0


def _amplitude_at(tx: Transmission, times: NDArray[np.float64]) -> NDArray[np.float64]:
    plan = tx.plan
    halves = np.floor((times - tx.start) * plan.f_switch + _EDGE).astype(np.int64)
    bit_index = halves // (2 * plan.n_r)
    active = (halves >= 0) & (bit_index < len(plan.bits))
    bits = np.asarray(plan.bits, dtype=np.int64)
    level = np.where(bits[np.clip(bit_index, 0, len(bits) - 1)] == 1, plan.a1, plan.a0)
    gain = np.where(halves % 2 == 0, tx.gain_tx1, tx.gain_tx2)
    return np.where(active, level * gain, 0.0)


def render_envelope(
    transmissions: Sequence[Transmission],
    duration: float,
    *,
    v_diode: float = 0.1,
    rc: float = 1.0 / (10.0 * MAX_SWITCHING_HZ),
    noise_std: float = 0.0,
    rng: np.random.Generator | None = None,
    fs: float = MCU_SAMPLE_RATE,
    t0: float = 0.0,
) -> EnvelopeTrace:
    """Sum the received radar amplitudes and pass them through the detector."""
    n = int(round(duration * fs))
    times = t0 + np.arange(n) / fs
    amplitude = np.zeros(n)
    for tx in transmissions:
        amplitude += _amplitude_at(tx, times)
    volts = envelope_detect(times, amplitude, v_diode, rc).volts
    if noise_std > 0:
        if rng is None:
            raise ValueError("noise requires an explicit random generator")
        volts = volts + rng.normal(0.0, noise_std, size=n)
    return EnvelopeTrace(volts, t0, fs)


# =============================================================================
# Bit decisions
# =============================================================================


def bit_levels(
    trace: EnvelopeTrace,
    f_switch: float,
    *,
    n_r: int = 1,
    start: float | None = None,
    n_bits: int | None = None,
    guard: float = 0.25,
) -> NDArray[np.float64]:
    """Per-bit level: TX1 and TX2 plateaus estimated separately, then averaged.

    A plateau is the median of the samples inside its half-bit, skipping the
    first ``guard`` fraction to let the detector settle.
    """
    start = trace.t0 if start is None else start
    pos = (trace.times - start) * f_switch + _EDGE
    halves = np.floor(pos).astype(np.int64)
    frac = pos - halves
    halves_per_bit = 2 * n_r
    available = int(math.floor((trace.t0 + trace.duration - start) * f_switch / halves_per_bit + _EDGE))
    if available < 1:
        raise InsufficientDataError("insufficient samples: trace shorter than one bit")
    if n_bits is None:
        n_bits = available
    elif n_bits > available:
        raise InsufficientDataError(f"insufficient samples: {n_bits} bits requested, {available} present")

    levels = np.empty(n_bits)
    for b in range(n_bits):
        plateaus = []
        for kind in (0, 1):
            ids = [b * halves_per_bit + 2 * r + kind for r in range(n_r)]
            in_half = np.isin(halves, ids)
            settled = in_half & (frac >= guard)
            chosen = trace.samples[settled] if settled.any() else trace.samples[in_half]
            if chosen.size == 0:
                raise InsufficientDataError(
                    f"insufficient samples: no sample inside half-bit at F={f_switch} Hz"
                )
            plateaus.append(float(np.median(chosen)))
        levels[b] = 0.5 * (plateaus[0] + plateaus[1])
    return levels


def decode_bits(
    trace: EnvelopeTrace,
    f_switch: float,
    *,
    n_r: int = 1,
    start: float | None = None,
    n_bits: int | None = None,
    reference: float | None = None,
    prefix_bits: int = len(HEADER) + len(PREAMBLE),
    ratio: float = BIT_ONE_RATIO,
) -> Bits:
    """Ratio-threshold bit decisions.

    A bit is zero when its level is strictly below ``ratio`` times the
    reference; the reference defaults to the largest level among the first
    ``prefix_bits`` bits, which always include a known one.
    """
    levels = bit_levels(trace, f_switch, n_r=n_r, start=start, n_bits=n_bits)
    if reference is None:
        reference = float(levels[:prefix_bits].max())
    return tuple(0 if level < ratio * reference else 1 for level in levels)


def _pattern_waveform(pattern: Bits, f_switch: float, n_r: int, fs: float) -> NDArray[np.float64]:
    bit_duration = 2.0 * n_r / f_switch
    length = int(math.ceil(len(pattern) * bit_duration * fs - _EDGE))
    idx = np.floor(np.arange(length) / fs / bit_duration + _EDGE).astype(np.int64)
    idx = np.clip(idx, 0, len(pattern) - 1)
    return np.where(np.asarray(pattern)[idx] == 1, 1.0, -1.0)


def sync_align(
    trace: EnvelopeTrace,
    f_switch: float,
    pattern: Bits = HEADER + PREAMBLE,
    *,
    n_r: int = 1,
    min_confidence: float = 0.8,
    tie_tolerance: float = 0.02,
) -> int:
    """Sample offset of the first packet prefix in the trace.

    Uses normalised correlation against the prefix waveform. Among
    correlation peaks above ``min_confidence``, the earliest one within
    ``tie_tolerance`` of the best wins.
    """
    template = _pattern_waveform(pattern, f_switch, n_r, trace.fs)
    if len(trace) < len(template):
        raise InsufficientDataError("insufficient samples: trace shorter than the sync pattern")
    windows = np.lib.stride_tricks.sliding_window_view(trace.samples, len(template))
    centred = windows - windows.mean(axis=1, keepdims=True)
    tz = template - template.mean()
    norms = np.linalg.norm(centred, axis=1) * np.linalg.norm(tz)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.where(norms > 0, centred @ tz / norms, 0.0)

    padded = np.concatenate(([-2.0], corr, [-2.0]))
    peaks, props = sps.find_peaks(padded, height=min_confidence)
    if peaks.size == 0:
        raise PacketNotFoundError(float(corr.max(initial=0.0)))
    heights = props["peak_heights"]
    best = heights.max()
    first = int(peaks[np.argmax(heights >= best - tie_tolerance)]) - 1
    logger.debug(f"Sync at sample {first} (correlation {corr[first]:.3f})")
    return first


# =============================================================================
# Multi-radar identification
# =============================================================================


def detect_radars(
    trace: EnvelopeTrace,
    *,
    n_r: int = 1,
    floor_ratio: float = 8.0,
) -> list[float]:
    """Switching frequencies of the radars keying a 1010 beacon.

    The lowest-frequency line that clears both ``floor_ratio`` times the
    median bin and a quarter of the strongest line sets the threshold:
    every line at least half as strong as it is a radar. Odd harmonics of
    an accepted line are skipped. The square beacon puts a line at ``k``
    times its fundamental with ``1/k`` of its amplitude. No line clearing
    the floor means silence.
    """
    n = len(trace)
    if n < 4:
        return []
    x = trace.samples - trace.samples.mean()
    spectrum = np.abs(np.fft.rfft(x))
    spectrum[0] = 0.0
    freqs = np.fft.rfftfreq(n, d=1.0 / trace.fs)
    peaks, _ = sps.find_peaks(spectrum)
    if peaks.size == 0:
        return []
    top = float(spectrum[peaks].max())
    floor = float(np.median(spectrum[1:]))
    if top <= 0.0:
        return []
    cutoff = max(floor_ratio * floor, _MIN_LINE_FRACTION * top)
    candidates = [int(p) for p in peaks if spectrum[p] >= cutoff]
    if not candidates:
        return []
    threshold = 0.5 * float(spectrum[candidates[0]])
    kept: list[int] = []
    for p in candidates:
        if spectrum[p] < threshold:
            continue
        if any(_is_odd_harmonic(p, q, spectrum) for q in kept):
            logger.debug(f"Skipping harmonic line at {freqs[p]:.3f} Hz")
            continue
        kept.append(p)
    detected = [float(4.0 * n_r * freqs[p]) for p in kept]
    logger.info(f"Detected radar switching frequencies: {detected}")
    return detected


def _is_odd_harmonic(p: int, q: int, spectrum: NDArray[np.float64]) -> bool:
    k = round(p / q)
    if k < 3 or k % 2 == 0 or abs(p - k * q) > 1:
        return False
    return bool(spectrum[p] <= 2.0 * spectrum[q] / k)


def separate_radar(
    trace: EnvelopeTrace,
    f_switch: float,
    *,
    n_r: int = 1,
    order: int = 4,
    rel_bandwidth: float = 0.25,
) -> EnvelopeTrace:
    """Zero-phase band-pass around one radar's beacon line.

    The trace is wrap-padded by its own length on both sides so the filter
    sees a periodic signal and the output keeps the input's alignment.
    """
    if not 0.0 < f_switch < trace.fs / 2.0:
        raise ValueError(f"F={f_switch} Hz outside (0, {trace.fs / 2.0}) Hz")
    centre = beacon_line(f_switch, n_r)
    band = [centre * (1.0 - rel_bandwidth), centre * (1.0 + rel_bandwidth)]
    sos = sps.butter(order, band, btype="bandpass", fs=trace.fs, output="sos")
    n = len(trace)
    x = trace.samples - trace.samples.mean()
    padded = np.pad(x, (n, n), mode="wrap")
    filtered = sps.sosfiltfilt(sos, padded, padlen=0)[n : 2 * n]
    return EnvelopeTrace(filtered, trace.t0, trace.fs)


# =============================================================================
# IRS -> radar OOK
# =============================================================================


@dataclass(frozen=True)
class OokLevels:
    on: float
    off: float

    def __post_init__(self) -> None:
        if not self.on > self.off:
            raise ValueError(f"ON level {self.on} must exceed OFF level {self.off}")

    @property
    def threshold(self) -> float:
        return 0.5 * (self.on + self.off)


def ook_modulate(bits: Sequence[int], irs_id: int = 0) -> list[IrsState]:
    """One IRS configuration per symbol: retro for a one, off for a zero."""
    return [
        IrsState(IrsMode.RETRO, ook_bit=1, irs_id=irs_id) if b else IrsState(IrsMode.OFF, irs_id=irs_id)
        for b in _check_bits(bits)
    ]


def symbol_levels(magnitudes: ArrayLike, chirps_per_symbol: int) -> NDArray[np.float64]:
    """Median IRS-bin magnitude per symbol; a trailing partial symbol is dropped."""
    mags = np.asarray(magnitudes, dtype=np.float64)
    if chirps_per_symbol < 1:
        raise ValueError("chirps_per_symbol must be positive")
    n_symbols = len(mags) // chirps_per_symbol
    if n_symbols == 0:
        raise InsufficientDataError("insufficient samples: fewer chirps than one symbol")
    blocks = mags[: n_symbols * chirps_per_symbol].reshape(n_symbols, chirps_per_symbol)
    return np.median(blocks, axis=1)


def train_ook_levels(
    magnitudes: ArrayLike, chirps_per_symbol: int, known_bits: Sequence[int]
) -> OokLevels:
    """ON/OFF levels from symbols whose values are known, e.g. a packet prefix."""
    known = np.asarray(_check_bits(known_bits))
    levels = symbol_levels(magnitudes, chirps_per_symbol)[: len(known)]
    if len(levels) < len(known):
        raise InsufficientDataError("insufficient samples for the training symbols")
    if not (known == 1).any() or not (known == 0).any():
        raise ValueError("training needs both ON and OFF symbols")
    return OokLevels(
        on=float(np.median(levels[known == 1])), off=float(np.median(levels[known == 0]))
    )


def ook_demodulate(
    magnitudes: ArrayLike, chirps_per_symbol: int, levels: OokLevels | None = None
) -> Bits:
    """Threshold each symbol's median magnitude midway between trained levels."""
    if levels is None:
        raise CalibrationRequiredError()
    medians = symbol_levels(magnitudes, chirps_per_symbol)
    return tuple(int(m > levels.threshold) for m in medians)


def locate_ook_bin(
    spectra: ArrayLike, chirps_per_symbol: int, exclude_below: int = 1
) -> int:
    """Range bin whose per-symbol level swings the most across a capture."""
    mags = np.asarray(spectra, dtype=np.float64)
    if mags.ndim != 2:
        raise ValueError("spectra must be (chirps, bins)")
    n_symbols = mags.shape[0] // chirps_per_symbol
    if n_symbols < 2:
        raise InsufficientDataError("insufficient samples: need at least two symbols")
    blocks = mags[: n_symbols * chirps_per_symbol].reshape(n_symbols, chirps_per_symbol, -1)
    medians = np.median(blocks, axis=1)
    swing = medians.max(axis=0) - medians.min(axis=0)
    swing[:exclude_below] = 0.0
    return int(np.argmax(swing))


@dataclass
class LinkStats:
    """Running bit-error counter."""

    bits: int = 0
    errors: int = 0
    packets: int = 0
    lost_packets: int = 0
    history: list[tuple[int, int]] = field(default_factory=list)

    def record(self, sent: Sequence[int], received: Sequence[int] | None) -> None:
        self.packets += 1
        if received is None:
            self.lost_packets += 1
            self.bits += len(sent)
            self.errors += len(sent)
            self.history.append((len(sent), len(sent)))
            return
        errs = sum(int(a != b) for a, b in zip(sent, received, strict=True))
        self.bits += len(sent)
        self.errors += errs
        self.history.append((len(sent), errs))

    @property
    def ber(self) -> float:
        return self.errors / self.bits if self.bits else 0.0
