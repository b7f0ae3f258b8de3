"""Epoch loop: both state machines driven over one slot clock.

An epoch is one superframe. The IRS machine decides what the surface does
in each slot; every radar machine reacts to what its receiver decoded.
Channel effects come from ``links`` and all randomness from one generator
seeded per run, so a scenario and a seed fix every output byte.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path

import numpy as np

from irs_nlos.comms import LinkStats
from irs_nlos.errors import InsufficientDataError, IrsNotFoundError, NegativeLegError
from irs_nlos.geometry import Point2, Radar, Scene
from irs_nlos.irs import IrsMode, IrsState
from irs_nlos.locator import (
    MusicGrid,
    PeakLabel,
    classify_nlos,
    estimate_velocity,
    localize_irs,
    localize_target,
    music_2d,
    select_ook_peak,
    select_relay_peak,
)
from irs_nlos.observability import add_scenario_attributes, trace_operation
from irs_nlos.scheduler import AngleDurationSet, TargetDetection, strongest_per_range
from irs_nlos.simkit.codebook import AngleAnnounce, IdAnnounce, Message, aoi_messages
from irs_nlos.simkit.fsm import (
    AdcSamples,
    Announce,
    BroadcastId,
    IrsEvent,
    IrsFsmState,
    IrsPhase,
    RadarAction,
    RadarFsmState,
    RadarPhase,
    RadarPolicy,
    Reflect,
    Resample,
    RxFrame,
    SendAoi,
    Sense,
    SlotTick,
    UpdateAoi,
    Wait,
    irs_fsm_step,
    radar_fsm_step,
)
from irs_nlos.simkit.links import (
    ber_sweep,
    beacon_window,
    capture_cube,
    noise_floor,
    offset_from_normal,
    ook_uplink,
    radar_present,
    sensing_echoes,
    transmit_packet,
)
from irs_nlos.simkit.metrics import (
    EpochRecord,
    Estimate,
    LinkCell,
    MetricsReport,
    build_report,
    evaluate_checks,
)
from irs_nlos.simkit.reports import emit_reports
from irs_nlos.simkit.scenario import RadarSpec, ScenarioConfig, build_scene, build_tracks, load_scenario

logger = logging.getLogger(__name__)


# =============================================================================
# Slot clock
# =============================================================================


class SlotKind(StrEnum):
    RADAR_COMM = "radar_comm"
    COMM = "comm"
    SENSING = "sensing"


class SlotClock:
    """Global slot counter that also remembers what the current slot is for."""

    def __init__(self, slot_seconds: float) -> None:
        if slot_seconds <= 0:
            raise ValueError("slot_seconds must be positive")
        self.slot_seconds = slot_seconds
        self.slot = 0
        self.kind: SlotKind | None = None
        self.counts = {kind: 0 for kind in SlotKind}
        self.idle = 0

    @property
    def now(self) -> float:
        return self.slot * self.slot_seconds

    def open(self, kind: SlotKind, n: int = 1) -> tuple[float, float]:
        """Start ``n`` slots of ``kind``; returns their start and end times."""
        if n < 1:
            raise ValueError("a slot window needs at least one slot")
        start = self.now
        self.slot += n
        self.kind = kind
        self.counts[kind] += n
        return start, self.now

    def idle_slot(self) -> None:
        self.slot += 1
        self.kind = None
        self.idle += 1

    def require(self, kind: SlotKind) -> None:
        if self.kind is not kind:
            raise RuntimeError(f"{kind} activity outside a {kind} slot (current: {self.kind})")


# =============================================================================
# Per-radar bookkeeping
# =============================================================================


@dataclass(frozen=True)
class IrsView:
    """What a radar learned about the surface during discovery."""

    position: Point2
    d_rs: float
    aoa: float
    phi: float
    retro_power_db: float


@dataclass
class _RadarCtx:
    radar: Radar
    spec: RadarSpec
    fsm: RadarFsmState
    noise_power: float
    view: IrsView | None = None
    pending: AngleDurationSet | None = None
    sense_angle: int | None = None
    downlink: LinkStats = field(default_factory=LinkStats)
    uplink: LinkStats = field(default_factory=LinkStats)
    sensed: list[tuple[TargetDetection, Estimate | None]] = field(default_factory=list)


def _describe(message: Message) -> str:
    return f"{type(message).__name__}{tuple(vars(message).values())}"


class ScenarioRunner:
    """Runs one scenario from a fixed seed."""

    def __init__(self, cfg: ScenarioConfig, seed: int | None = None) -> None:
        self.cfg = cfg
        self.seed = cfg.seed if seed is None else seed
        self.rng = np.random.default_rng(self.seed)
        self.chirp = cfg.chirp.to_chirp_config()
        self.tracks = build_tracks(cfg, self.rng)
        self.clock = SlotClock(cfg.scheduler.slot_seconds)
        loc = cfg.locator
        self.grid = MusicGrid.default(
            loc.max_range,
            range_step=loc.range_step,
            angle_step_deg=loc.angle_step_deg,
            max_angle_deg=loc.max_angle_deg,
        )

        scene = self.scene_at(0.0)
        scene.check_tx_spacing(self.chirp.wavelength)
        scene.check_nlos()

        sched = cfg.scheduler
        policy = RadarPolicy(
            adaptive=cfg.mode == "adaptive",
            angles=tuple(sched.angles),
            naive_slots=sched.naive_slots,
            delta_alpha_deg=sched.delta_alpha_deg,
            d_max_energy=sched.d_max_energy,
            slot_seconds=sched.slot_seconds,
            strict_formula=sched.strict_formula,
            infeasible_policy=sched.infeasible_policy,
            lost_timeout_slots=sched.lost_timeout_slots,
            max_slots_per_angle=sched.max_slots_per_angle,
            range_tolerance=5.0 * loc.range_step,
        )
        retro = IrsState(IrsMode.RETRO)
        reflectivity = cfg.irs.reflectivity if cfg.irs is not None else 1.0
        self.radars = [
            _RadarCtx(
                radar,
                spec,
                RadarFsmState(spec.id, policy),
                noise_floor(
                    self.chirp,
                    sensing_echoes(scene, radar, retro, reflectivity),
                    cfg.channel.snr_db,
                ),
            )
            for radar, spec in zip(scene.radars, cfg.radars, strict=True)
        ]
        self.irs_fsm = (
            IrsFsmState(cfg.irs.irs_id, tuple(sched.angles), sched.naive_slots)
            if cfg.irs is not None
            else None
        )
        self.beacon_cells: list[LinkCell] = []
        self.epochs: list[EpochRecord] = []

    def scene_at(self, t: float) -> Scene:
        return build_scene(self.cfg, self.tracks, t)

    # -------------------------------------------------------------------------
    # Top level
    # -------------------------------------------------------------------------

    def run(self) -> MetricsReport:
        cfg = self.cfg
        with trace_operation("run_scenario") as span:
            add_scenario_attributes(span, cfg, self.seed)
            logger.info(
                f"Running scenario {cfg.name!r} ({cfg.mode}, {cfg.epochs} epochs, seed {self.seed})"
            )
            for k in range(cfg.epochs):
                with trace_operation("epoch", {"epoch.index": k}) as epoch_span:
                    record = self._epoch(k)
                    epoch_span.set_attribute("epoch.estimates", len(record.estimates))
                    epoch_span.set_attribute("epoch.scan_slots", record.scan_slots)
                self.epochs.append(record)
            report = build_report(
                cfg.name,
                self.seed,
                cfg.mode,
                self.epochs,
                self._link_cells(),
                cfg.reports,
                (
                    self.clock.counts[SlotKind.RADAR_COMM] + self.clock.counts[SlotKind.COMM],
                    self.clock.counts[SlotKind.SENSING],
                    self.clock.idle,
                ),
            )
            span.set_attribute("scenario.estimates", len(report.estimates))
        logger.info(
            f"Scenario {cfg.name!r} done: {len(report.estimates)} estimates, "
            f"scan avg {report.scan_avg if report.scan_avg is not None else float('nan'):.3f} s"
        )
        return report

    def _epoch(self, k: int) -> EpochRecord:
        t_start = self.clock.now
        slot_start = self.clock.slot
        was_scanning = any(r.fsm.phase is RadarPhase.SCANNING for r in self.radars)
        packets: list[str] = []
        sensed_angles: list[int] = []
        reflected = False
        for r in self.radars:
            r.sensed = []

        if self.irs_fsm is None:
            self.clock.idle_slot()
            for r in self.radars:
                self._step(r, RxFrame())
        else:
            event = self._radar_to_irs(packets)
            self.irs_fsm, irs_actions = irs_fsm_step(self.irs_fsm, event)
            for action in irs_actions:
                match action:
                    case BroadcastId(irs_id=irs_id):
                        start, _ = self.clock.open(SlotKind.COMM)
                        self._uplink(IdAnnounce(irs_id), start, packets)
                    case Announce(angle=angle, irs_id=irs_id):
                        start, _ = self.clock.open(SlotKind.COMM)
                        self._uplink(AngleAnnounce(angle, irs_id), start, packets)
                    case Reflect(angle=angle, slots=slots):
                        start, end = self.clock.open(SlotKind.SENSING, slots)
                        reflected = True
                        if self._sense(angle, slots, start, end):
                            sensed_angles.append(angle)
                    case Resample():
                        self.clock.idle_slot()
                        for r in self.radars:
                            self._step(r, RxFrame())

        estimates: list[Estimate] = []
        detections = 0
        for r in self.radars:
            policy = r.fsm.policy
            kept = strongest_per_range(
                [d for d, _ in r.sensed], policy.range_tolerance, policy.leak_ratio
            )
            detections += len(kept)
            estimates.extend(e for d, e in r.sensed if e is not None and d in kept)
            self._step(r, SlotTick())

        scan_slots = self.clock.slot - slot_start
        superframe = was_scanning and reflected
        return EpochRecord(
            epoch=k,
            timestamp=t_start,
            mode=self.cfg.mode,
            phases={r.radar.id: str(r.fsm.phase) for r in self.radars},
            angles=tuple(sensed_angles),
            packets=tuple(packets),
            detections=detections,
            estimates=tuple(estimates),
            scan_slots=scan_slots,
            scan_seconds=scan_slots * self.clock.slot_seconds if superframe else None,
        )

    # -------------------------------------------------------------------------
    # Radar state machine plumbing
    # -------------------------------------------------------------------------

    def _step(self, r: _RadarCtx, event: RxFrame | SlotTick) -> None:
        r.fsm, actions = radar_fsm_step(r.fsm, event)
        self._apply(r, actions)

    def _apply(self, r: _RadarCtx, actions: list[RadarAction]) -> None:
        for action in actions:
            match action:
                case Sense(angle=angle):
                    r.sense_angle = angle
                case Wait():
                    r.sense_angle = None
                case SendAoi(aoi=aoi):
                    r.pending = aoi
                case UpdateAoi(aoi=aoi):
                    logger.debug(f"Radar {r.radar.id} AoI now {aoi.entries}")
        if r.fsm.phase is RadarPhase.CHIRPING:
            r.view = None
            r.pending = None
            r.sense_angle = None

    # -------------------------------------------------------------------------
    # Radar -> IRS slot
    # -------------------------------------------------------------------------

    def _radar_to_irs(self, packets: list[str]) -> IrsEvent:
        """Radar-to-IRS slot: beacon, then AoI packets one radar at a time."""
        assert self.irs_fsm is not None and self.cfg.irs is not None
        if self.irs_fsm.phase is IrsPhase.INIT:
            return SlotTick()

        scene = self.scene_at(self.clock.now)
        assert scene.irs is not None
        irs_spec = self.cfg.irs
        channel = self.cfg.channel
        present = radar_present([r.radar for r in self.radars], scene.irs, irs_spec, self.chirp, channel)
        senders = sorted(
            (r for r in self.radars if r.pending is not None), key=lambda r: r.spec.f_switch
        )
        if not senders:
            return AdcSamples(radar_present=present)

        self.clock.open(SlotKind.RADAR_COMM, self.cfg.scheduler.radar_comm_slots)
        if len(self.radars) > 1:
            beacon = beacon_window(
                [(r.radar, r.spec) for r in self.radars],
                scene.irs,
                irs_spec,
                self.chirp,
                channel,
                self.rng,
            )
            for r in self.radars:
                if r.radar.id in beacon.decoded:
                    sent, received = beacon.decoded[r.radar.id]
                    stats = LinkStats()
                    stats.record(sent, received)
                    self.beacon_cells.append(self._radar_cell("beacon", r, stats))
            senders = [r for r in senders if r.radar.id in beacon.decoded]

        messages: list[Message] = []
        malformed = 0
        for r in senders:
            assert r.pending is not None
            self.clock.require(SlotKind.RADAR_COMM)
            heard: list[Message] = []
            for message in aoi_messages(r.pending):
                rx = transmit_packet(
                    r.radar, r.spec, message, scene.irs, irs_spec, self.chirp, channel, self.rng
                )
                r.downlink.record(rx.sent, rx.received)
                malformed += int(rx.malformed)
                if rx.message is None:
                    if not heard:
                        logger.info(f"AoI set of radar {r.radar.id} lost; grants dropped")
                        break
                    continue
                heard.append(rx.message)
            if heard:
                packets.extend(f"{r.radar.id}>IRS {_describe(m)}" for m in heard)
                messages.extend(heard)
            r.pending = None
        return AdcSamples(tuple(messages), radar_present=present, malformed=malformed)

    # -------------------------------------------------------------------------
    # IRS -> radar comm slots
    # -------------------------------------------------------------------------

    def _uplink(self, message: Message, start: float, packets: list[str]) -> None:
        assert self.irs_fsm is not None and self.cfg.irs is not None
        scene = self.scene_at(start)
        for r in self.radars:
            self.clock.require(SlotKind.COMM)
            rx = ook_uplink(
                scene,
                r.radar,
                message,
                self.irs_fsm.irs_id,
                self.chirp,
                self.cfg.channel,
                r.noise_power,
                start,
                self.rng,
                self.cfg.irs.reflectivity,
            )
            r.uplink.record(rx.sent, rx.received)
            heard = rx.message
            if heard is not None and r.view is None and rx.ook_range is not None:
                r.view = self._locate_irs(r, scene, rx.ook_range, start)
                if r.view is None:
                    heard = None
            if heard is not None:
                packets.append(f"IRS>{r.radar.id} {_describe(heard)}")
            self._step(r, RxFrame(message=heard))

    def _locate_irs(self, r: _RadarCtx, scene: Scene, ook_range: float, t: float) -> IrsView | None:
        """Find the surface as the peak that appears only while it retro-reflects."""
        assert self.cfg.irs is not None
        loc = self.cfg.locator
        reflectivity = self.cfg.irs.reflectivity
        n = min(self.chirp.n_chirps_per_slot, loc.max_chirps_per_capture)
        peaks = []
        for mode in (IrsMode.RETRO, IrsMode.OFF):
            echoes = sensing_echoes(scene, r.radar, IrsState(mode), reflectivity)
            cube = capture_cube(self.chirp, echoes, r.noise_power, n, t, self.rng)
            try:
                peaks.append(
                    music_2d(
                        cube,
                        self.chirp,
                        self.grid,
                        subarray=loc.subarray,
                        auto_sources=True,
                        dynamic_range_db=loc.dynamic_range_db,
                        refine=loc.refine_peaks,
                    )
                )
            except InsufficientDataError:
                peaks.append([])
        classified = classify_nlos(peaks[0], peaks[1], threshold_db=loc.threshold_db)
        candidates = [c.peak for c in classified if c.label is PeakLabel.NLOS_VIA_IRS]
        try:
            peak = select_ook_peak(candidates, ook_range)
            position = localize_irs(peak, r.radar.position, r.radar.boresight)
        except IrsNotFoundError as exc:
            logger.warning(f"Radar {r.radar.id}: {exc} near {ook_range:.2f} m")
            return None
        logger.info(
            f"Radar {r.radar.id} located the IRS at ({position.x:.3f}, {position.y:.3f}), "
            f"D_RS={peak.range:.3f} m"
        )
        return IrsView(position, peak.range, peak.aoa, r.radar.boresight + peak.aoa, peak.power)

    # -------------------------------------------------------------------------
    # Sensing slots
    # -------------------------------------------------------------------------

    def _sense(self, angle: int, slots: int, start: float, end: float) -> bool:
        assert self.irs_fsm is not None and self.cfg.irs is not None
        loc = self.cfg.locator
        t_mid = 0.5 * (start + end)
        scene = self.scene_at(t_mid)
        state = IrsState(IrsMode.REFLECT, angle=angle, irs_id=self.irs_fsm.irs_id)
        n_chirps = min(slots * self.chirp.n_chirps_per_slot, loc.max_chirps_per_capture)
        t0 = t_mid - 0.5 * n_chirps * self.chirp.t_chirp
        sensed = False
        for r in self.radars:
            if r.sense_angle != angle or r.view is None:
                continue
            self.clock.require(SlotKind.SENSING)
            sensed = True
            echoes = sensing_echoes(scene, r.radar, state, self.cfg.irs.reflectivity)
            cube = capture_cube(self.chirp, echoes, r.noise_power, n_chirps, t0, self.rng)
            try:
                peaks = music_2d(
                    cube,
                    self.chirp,
                    self.grid,
                    subarray=loc.subarray,
                    auto_sources=True,
                    dynamic_range_db=loc.dynamic_range_db,
                    refine=loc.refine_peaks,
                )
            except InsufficientDataError as exc:
                logger.debug(f"Radar {r.radar.id} at {angle} deg: {exc}")
                continue
            view = r.view
            peak = select_relay_peak(peaks, view.d_rs, view.aoa)
            if peak is None or peak.power <= view.retro_power_db - loc.relay_threshold_db:
                continue
            try:
                position = localize_target(
                    peak.range, view.d_rs, math.radians(angle), view.phi, view.position
                )
            except NegativeLegError as exc:
                logger.debug(f"Radar {r.radar.id}: {exc}")
                continue
            velocity = abs(estimate_velocity(cube, self.chirp, peak.range))
            detection = TargetDetection(angle, peak.range, 10.0 ** (peak.power / 10.0), velocity)
            estimate = self._pair(r, scene, angle, t_mid, position)
            r.sensed.append((detection, estimate))
            self._step(r, RxFrame(detections=(detection,)))
        return sensed

    def _pair(
        self, r: _RadarCtx, scene: Scene, angle: int, t: float, position: Point2
    ) -> Estimate | None:
        """Match an estimate with the closest true target."""
        if not scene.targets or scene.irs is None:
            return None
        target = min(scene.targets, key=lambda tg: (tg.position.distance_to(position), tg.id))
        irs = scene.irs.position
        distance = r.radar.position.distance_to(irs) + irs.distance_to(target.position)
        return Estimate(
            radar_id=r.radar.id,
            angle=angle,
            t=t,
            x=position.x,
            y=position.y,
            target_id=target.id,
            true_x=target.position.x,
            true_y=target.position.y,
            distance=distance,
        )

    # -------------------------------------------------------------------------
    # Link counters
    # -------------------------------------------------------------------------

    def _radar_cell(self, section: str, r: _RadarCtx, stats: LinkStats) -> LinkCell:
        scene = self.scene_at(0.0)
        assert scene.irs is not None
        distance = r.radar.position.distance_to(scene.irs.position)
        angle = abs(math.degrees(offset_from_normal(scene.irs, r.radar.position)))
        return LinkCell(section, distance, angle, stats.bits, stats.errors)

    def _link_cells(self) -> list[LinkCell]:
        if self.cfg.irs is None:
            return []
        cells = list(self.beacon_cells)
        for r in self.radars:
            if r.downlink.bits:
                cells.append(self._radar_cell("downlink", r, r.downlink))
            if r.uplink.bits:
                cells.append(self._radar_cell("uplink", r, r.uplink))
        if self.cfg.reports.ber_sweep:
            spec = self.radars[0].spec
            for cell in ber_sweep(
                self.chirp,
                self.cfg.channel,
                self.cfg.irs,
                self.rng,
                f_switch=spec.f_switch,
                n_packets=self.cfg.reports.ber_packets,
            ):
                cells.append(LinkCell("ber_sweep", cell.distance, cell.angle_deg, cell.bits, cell.errors))
        return cells


# =============================================================================
# Entry points
# =============================================================================


def run_scenario(cfg: ScenarioConfig, seed: int | None = None) -> MetricsReport:
    """Run a scenario end to end; the same (cfg, seed) always gives the same report."""
    return ScenarioRunner(cfg, seed).run()


def run_checks(cfg: ScenarioConfig, report: MetricsReport, seed: int | None = None) -> list[str]:
    """Evaluate ``cfg.checks`` against a report, running the naive twin when needed."""
    naive = None
    if cfg.checks.adaptive_not_slower and cfg.mode == "adaptive":
        naive = run_scenario(cfg.with_overrides(mode="naive"), seed)
    return evaluate_checks(report, cfg.checks, naive)


@dataclass(frozen=True)
class SweepResult:
    name: str
    out_dir: Path
    failures: tuple[str, ...] = ()


def _sweep_job(path: str, out_dir: str, seed: int | None, check: bool) -> SweepResult:
    cfg = load_scenario(path)
    report = run_scenario(cfg, seed)
    emit_reports(report, out_dir)
    failures = tuple(run_checks(cfg, report, seed)) if check else ()
    return SweepResult(cfg.name, Path(out_dir), failures)


def sweep(
    paths: list[Path],
    out_dir: Path,
    *,
    workers: int = 1,
    seed: int | None = None,
    check: bool = False,
) -> list[SweepResult]:
    """Run scenario files in parallel, each into ``out_dir/<name>``.

    Runs share nothing, and results come back in scenario-name order
    whatever the worker count.
    """
    if workers < 1:
        raise ValueError("workers must be at least 1")
    named = sorted((load_scenario(p).name, p) for p in paths)
    names = [n for n, _ in named]
    if len(set(names)) != len(names):
        raise ValueError(f"scenario names must be unique within a sweep, got {names}")
    jobs = [(str(p), str(out_dir / n), seed, check) for n, p in named]
    logger.info(f"Sweeping {len(jobs)} scenario(s) with {workers} worker(s)")
    if workers == 1:
        return [_sweep_job(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_sweep_job, *job) for job in jobs]
        return [f.result() for f in futures]
