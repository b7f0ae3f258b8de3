"""Channel models that connect the protocol to the signal chain.

Downlink packets are rendered at the IRS detector and decoded there;
uplink OOK and sensing captures are synthesized at the radar. Every random
draw goes through the generator passed in, so a run is fixed by its seed.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from irs_nlos.comms import (
    HEADER,
    MCU_SAMPLE_RATE,
    PREAMBLE,
    Bits,
    RadarTxPlan,
    Transmission,
    beacon_bits,
    decode_bits,
    deframe_packet,
    detect_radars,
    frame_packet,
    locate_ook_bin,
    ook_demodulate,
    ook_modulate,
    render_envelope,
    separate_radar,
    sync_align,
    train_ook_levels,
)
from irs_nlos.errors import InsufficientDataError, PacketNotFoundError
from irs_nlos.geometry import IrsSite, Point2, Radar, Scene, wrap_angle
from irs_nlos.irs import IrsState, element_pattern, reflect_gain
from irs_nlos.locator import RxCube, synthesize_rx_cube
from irs_nlos.signal import (
    ChirpConfig,
    IqFrame,
    PathEcho,
    free_space_amplitude,
    noise_power_for_snr,
    radar_echo_gain,
    range_fft,
    synthesize_beat_cube,
)
from irs_nlos.simkit.codebook import Message, decode_message, encode_message
from irs_nlos.simkit.scenario import ChannelSpec, IrsSpec, RadarSpec

logger = logging.getLogger(__name__)

OOK_FFT_SIZE = 256


# =============================================================================
# IRS-relative geometry
# =============================================================================


def offset_from_normal(site: IrsSite, point: Point2) -> float:
    """Bearing of ``point`` seen from the IRS, relative to its normal."""
    return wrap_angle(site.position.bearing_to(point) - site.normal)


def beam_gain(state: IrsState, site: IrsSite, incoming: Point2, outgoing: Point2) -> float:
    """Amplitude gain of one pass through the surface, patch pattern included."""
    theta_in = offset_from_normal(site, incoming)
    theta_out = offset_from_normal(site, outgoing)
    pattern = math.sqrt(element_pattern(theta_in) * element_pattern(theta_out))
    return reflect_gain(state, theta_in, theta_out) * pattern


def _closing_speed(target_velocity: tuple[float, float], target: Point2, toward: Point2) -> float:
    dx, dy = toward.x - target.x, toward.y - target.y
    norm = math.hypot(dx, dy)
    if norm == 0.0:
        return 0.0
    return (target_velocity[0] * dx + target_velocity[1] * dy) / norm


# =============================================================================
# Radar-side echoes
# =============================================================================


def sensing_echoes(
    scene: Scene, radar: Radar, state: IrsState, irs_reflectivity: float = 1.0
) -> list[PathEcho]:
    """Every path the radar sees with the surface in ``state``.

    The surface contributes its own monostatic return and one relayed echo
    per target reachable through it; clutter and line-of-sight targets add
    direct returns.
    """
    echoes: list[PathEcho] = []
    origin = radar.position

    def aoa(point: Point2) -> float:
        return wrap_angle(origin.bearing_to(point) - radar.boresight)

    irs = scene.irs
    if irs is not None and scene.line_of_sight(origin, irs.position):
        d_rs = origin.distance_to(irs.position)
        mono = beam_gain(state, irs, origin, origin)
        if mono > 0.0:
            amplitude = radar_echo_gain([d_rs], irs_reflectivity) * mono
            echoes.append(PathEcho(2.0 * d_rs, amplitude, 0.0, aoa(irs.position)))
        for target in scene.targets:
            if not scene.line_of_sight(irs.position, target.position):
                continue
            d_st = irs.position.distance_to(target.position)
            gain = beam_gain(state, irs, origin, target.position)
            if gain <= 0.0 or d_st <= 0.0:
                continue
            reflectivity = target.reflectivity * irs_reflectivity
            amplitude = radar_echo_gain([d_rs, d_st], reflectivity) * gain**2
            velocity = _closing_speed(target.velocity, target.position, irs.position)
            echoes.append(PathEcho(2.0 * (d_rs + d_st), amplitude, velocity, aoa(irs.position)))

    for point, reflectivity in scene.clutter:
        if scene.line_of_sight(origin, point):
            d = origin.distance_to(point)
            echoes.append(PathEcho(2.0 * d, radar_echo_gain([d], reflectivity), 0.0, aoa(point)))
    for target in scene.targets:
        if scene.line_of_sight(origin, target.position):
            d = origin.distance_to(target.position)
            velocity = _closing_speed(target.velocity, target.position, origin)
            amplitude = radar_echo_gain([d], target.reflectivity)
            echoes.append(PathEcho(2.0 * d, amplitude, velocity, aoa(target.position)))
    return echoes


def noise_floor(cfg: ChirpConfig, echoes: Sequence[PathEcho], snr_db: float) -> float:
    """Receiver noise power putting the strongest of ``echoes`` at ``snr_db``."""
    strongest = max((e.gain for e in echoes), default=0.0)
    if strongest == 0.0:
        return 0.0
    return noise_power_for_snr(strongest, snr_db, cfg.amplitude)


def capture_cube(
    cfg: ChirpConfig,
    echoes: Sequence[PathEcho],
    noise_power: float,
    n_chirps: int,
    t0: float,
    rng: np.random.Generator,
) -> RxCube:
    """Four-element capture of ``n_chirps`` chirps starting at ``t0``."""
    return synthesize_rx_cube(cfg, echoes, noise_power, n_chirps=n_chirps, t0=t0, rng=rng)


# =============================================================================
# IRS -> radar OOK
# =============================================================================


@dataclass(frozen=True)
class OokReception:
    """What the radar made of one uplink packet."""

    sent: Bits
    received: Bits | None
    message: Message | None
    ook_range: float | None


def ook_uplink(
    scene: Scene,
    radar: Radar,
    message: Message,
    irs_id: int,
    cfg: ChirpConfig,
    channel: ChannelSpec,
    noise_power: float,
    t0: float,
    rng: np.random.Generator,
    irs_reflectivity: float = 1.0,
) -> OokReception:
    """Key a framed packet onto the surface and decode it at the radar.

    Symbols start on chirp boundaries and the radar knows where the packet
    begins; it locates the keyed range bin, trains ON/OFF levels on the
    header and preamble and thresholds the rest.
    """
    bits = frame_packet(encode_message(message))
    cps = channel.chirps_per_symbol
    states = ook_modulate(bits, irs_id)
    echoes = {s: sensing_echoes(scene, radar, s, irs_reflectivity) for s in dict.fromkeys(states)}
    samples = np.concatenate(
        [
            synthesize_beat_cube(
                cfg, echoes[s], n_chirps=cps, t0=t0 + k * cps * cfg.t_chirp, pri=cfg.t_chirp
            )[0]
            for k, s in enumerate(states)
        ]
    )
    if noise_power > 0:
        scale = math.sqrt(noise_power / 2.0)
        samples = samples + scale * (
            rng.standard_normal(samples.shape) + 1j * rng.standard_normal(samples.shape)
        )

    spectra = [
        range_fft(IqFrame(row, t0 + c * cfg.t_chirp, c), cfg, OOK_FFT_SIZE)
        for c, row in enumerate(samples)
    ]
    magnitudes = np.stack([s.magnitudes for s in spectra])
    try:
        ook_bin = locate_ook_bin(magnitudes, cps)
        column = magnitudes[:, ook_bin]
        prefix = HEADER + PREAMBLE
        levels = train_ook_levels(column[: len(prefix) * cps], cps, prefix)
        received = ook_demodulate(column, cps, levels)
        decoded = decode_message(deframe_packet(received))
    except ValueError as exc:
        logger.info(f"Radar {radar.id} failed to decode uplink {message}: {exc}")
        return OokReception(bits, None, None, None)
    ook_range = float(spectra[0].ranges[ook_bin])
    return OokReception(bits, received, decoded, ook_range)


# =============================================================================
# Radar -> IRS keying
# =============================================================================


def downlink_gains(
    radar: Radar, site: IrsSite, cfg: ChirpConfig, tx_amplitude: float
) -> tuple[float, float]:
    """Received amplitude at the IRS detector from TX1 and TX2."""
    pattern = element_pattern(offset_from_normal(site, radar.position))
    g1, g2 = (
        free_space_amplitude(tx.distance_to(site.position), cfg.wavelength, tx_amplitude) * pattern
        for tx in radar.tx_positions
    )
    return g1, g2


def _plan(spec: RadarSpec, bits: Sequence[int], channel: ChannelSpec) -> RadarTxPlan:
    return RadarTxPlan(spec.f_switch, tuple(bits), a1=1.0, a0=channel.a0_ratio, n_r=spec.n_r)


def _aligned(seconds: float, fs: float) -> float:
    """Nearest detector sample instant."""
    return round(seconds * fs) / fs


@dataclass(frozen=True)
class PacketReception:
    sent: Bits
    received: Bits | None
    message: Message | None
    malformed: bool = False


def transmit_packet(
    radar: Radar,
    spec: RadarSpec,
    message: Message,
    site: IrsSite,
    irs_spec: IrsSpec,
    cfg: ChirpConfig,
    channel: ChannelSpec,
    rng: np.random.Generator,
) -> PacketReception:
    """Render one framed packet at the IRS detector, then sync and decode it."""
    bits = frame_packet(encode_message(message))
    plan = _plan(spec, bits, channel)
    g1, g2 = downlink_gains(radar, site, cfg, channel.tx_amplitude)
    start = _aligned(channel.lead_in_seconds, MCU_SAMPLE_RATE)
    duration = start + plan.duration + plan.bit_duration
    trace = render_envelope(
        [Transmission(plan, g1, g2, start)],
        duration,
        v_diode=irs_spec.v_diode,
        rc=irs_spec.rc,
        noise_std=channel.envelope_noise_std,
        rng=rng,
    )
    try:
        offset = sync_align(
            trace, spec.f_switch, n_r=spec.n_r, min_confidence=channel.sync_confidence
        )
        start_at = trace.t0 + offset / trace.fs
        received = decode_bits(trace, spec.f_switch, n_r=spec.n_r, start=start_at, n_bits=len(bits))
    except (PacketNotFoundError, InsufficientDataError) as exc:
        logger.info(f"IRS missed a packet from radar {radar.id}: {exc}")
        return PacketReception(bits, None, None)
    try:
        decoded = decode_message(deframe_packet(received))
    except ValueError as exc:
        logger.warning(f"Malformed packet from radar {radar.id}: {exc}")
        return PacketReception(bits, received, None, malformed=True)
    logger.debug(f"IRS decoded {decoded} from radar {radar.id}")
    return PacketReception(bits, received, decoded)


@dataclass(frozen=True)
class BeaconResult:
    """Joint identification window: detected switching rates and per-radar bits."""

    detected: tuple[float, ...]
    decoded: dict[str, tuple[Bits, Bits]]


def beacon_window(
    radars: Sequence[tuple[Radar, RadarSpec]],
    site: IrsSite,
    irs_spec: IrsSpec,
    cfg: ChirpConfig,
    channel: ChannelSpec,
    rng: np.random.Generator,
) -> BeaconResult:
    """All radars key a 1010 beacon at once; the IRS splits them apart.

    Each radar's share is band-passed around its own spectral line and its
    bits read at known timing.
    """
    transmissions = []
    sent: dict[str, Bits] = {}
    for radar, spec in radars:
        n_bits = int(channel.beacon_seconds * spec.f_switch / (2.0 * spec.n_r))
        bits = beacon_bits(n_bits)
        sent[radar.id] = bits
        g1, g2 = downlink_gains(radar, site, cfg, channel.tx_amplitude)
        transmissions.append(Transmission(_plan(spec, bits, channel), g1, g2, 0.0))
    trace = render_envelope(
        transmissions,
        channel.beacon_seconds,
        v_diode=irs_spec.v_diode,
        rc=irs_spec.rc,
        noise_std=channel.envelope_noise_std,
        rng=rng,
    )
    n_r = radars[0][1].n_r if radars else 1
    detected = tuple(detect_radars(trace, n_r=n_r))
    decoded: dict[str, tuple[Bits, Bits]] = {}
    for radar, spec in radars:
        if not any(math.isclose(f, spec.f_switch, rel_tol=0.05) for f in detected):
            logger.warning(f"Beacon of radar {radar.id} (F={spec.f_switch} Hz) not detected")
            continue
        part = separate_radar(trace, spec.f_switch, n_r=spec.n_r)
        bits = sent[radar.id]
        received = decode_bits(part, spec.f_switch, n_r=spec.n_r, n_bits=len(bits))
        decoded[radar.id] = (bits, received)
    return BeaconResult(detected, decoded)


def radar_present(
    radars: Sequence[Radar],
    site: IrsSite,
    irs_spec: IrsSpec,
    cfg: ChirpConfig,
    channel: ChannelSpec,
) -> bool:
    """Whether any radar's carrier clears the diode and the ADC noise."""
    floor = 3.0 * channel.envelope_noise_std
    for radar in radars:
        level = max(downlink_gains(radar, site, cfg, channel.tx_amplitude)) - irs_spec.v_diode
        if level > floor:
            return True
    return False


# =============================================================================
# BER measurements
# =============================================================================


@dataclass(frozen=True)
class BerCell:
    distance: float
    angle_deg: float
    bits: int
    errors: int

    @property
    def ber(self) -> float:
        return self.errors / self.bits if self.bits else 0.0


def measure_ber(
    distance: float,
    angle_deg: float,
    cfg: ChirpConfig,
    channel: ChannelSpec,
    irs_spec: IrsSpec,
    rng: np.random.Generator,
    *,
    f_switch: float = 10.0,
    n_r: int = 1,
    n_packets: int = 50,
) -> BerCell:
    """Downlink payload BER for a radar at ``distance`` and ``angle_deg`` off the IRS normal.

    Bits are read at known timing so the figure reflects the detector and
    the threshold, not packet acquisition.
    """
    site = IrsSite(Point2(0.0, 0.0), 0.0)
    position = site.position.offset(distance, math.radians(angle_deg))
    radar = Radar.with_spacing("ber", position, cfg.wavelength, math.pi)
    spec = RadarSpec(id="ber", position=(position.x, position.y), f_switch=f_switch, n_r=n_r)
    g1, g2 = downlink_gains(radar, site, cfg, channel.tx_amplitude)
    start = _aligned(channel.lead_in_seconds, MCU_SAMPLE_RATE)
    bits_total = errors = 0
    for _ in range(n_packets):
        payload = tuple(int(b) for b in rng.integers(0, 2, size=6))
        framed = frame_packet(payload)
        plan = _plan(spec, framed, channel)
        trace = render_envelope(
            [Transmission(plan, g1, g2, start)],
            start + plan.duration,
            v_diode=irs_spec.v_diode,
            rc=irs_spec.rc,
            noise_std=channel.envelope_noise_std,
            rng=rng,
        )
        received = decode_bits(trace, f_switch, n_r=n_r, start=start, n_bits=len(framed))
        got = received[len(HEADER) + len(PREAMBLE) :]
        bits_total += len(payload)
        errors += sum(int(a != b) for a, b in zip(payload, got, strict=True))
    return BerCell(distance, angle_deg, bits_total, errors)


def ber_sweep(
    cfg: ChirpConfig,
    channel: ChannelSpec,
    irs_spec: IrsSpec,
    rng: np.random.Generator,
    *,
    distances: Sequence[float] = (0.5, 1.0, 1.5, 2.0),
    angles_deg: Sequence[float] = (0.0, 20.0, 40.0, 60.0),
    f_switch: float = 10.0,
    n_packets: int = 50,
) -> list[BerCell]:
    """BER grid over radar distance and angle, distance-major."""
    cells = [
        measure_ber(d, a, cfg, channel, irs_spec, rng, f_switch=f_switch, n_packets=n_packets)
        for d in distances
        for a in angles_deg
    ]
    for cell in cells:
        logger.info(f"BER at {cell.distance:.1f} m, {cell.angle_deg:.0f} deg: {cell.ber:.4f}")
    return cells
