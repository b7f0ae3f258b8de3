"""IRS and radar protocol state machines.

Both machines are pure: ``step(state, event)`` returns the next state and
the actions to carry out, and never touches the channel itself. The runner
performs the actions and feeds the outcomes back as events.

``SlotTick`` means "a slot passed with nothing sampled" to the IRS and
"the superframe ended" to the radar.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from enum import StrEnum
from typing import Literal

from irs_nlos.errors import InfeasibleScheduleError
from irs_nlos.irs import SUPPORTED_ANGLES, IrsMode, IrsState
from irs_nlos.scheduler import (
    AngleDurationSet,
    TargetDetection,
    build_aoi,
    cap_durations,
    clamp_aoi,
    minimum_durations,
    strongest_per_range,
)
from irs_nlos.simkit.codebook import AngleAnnounce, AoiSet, IdAnnounce, Message, aoi_from_messages

logger = logging.getLogger(__name__)


# =============================================================================
# Events
# =============================================================================


@dataclass(frozen=True)
class SlotTick:
    pass


@dataclass(frozen=True)
class AdcSamples:
    """What the IRS pulled out of one radar-to-IRS slot."""

    messages: tuple[Message, ...] = ()
    radar_present: bool = False
    malformed: int = 0


@dataclass(frozen=True)
class RxFrame:
    """One radar-side receive outcome.

    ``message`` is the decoded OOK payload of a comm slot, None when the
    slot stayed silent. ``detections`` carries relay targets from a sensing
    capture.
    """

    message: Message | None = None
    detections: tuple[TargetDetection, ...] = ()


IrsEvent = AdcSamples | SlotTick
RadarEvent = RxFrame | SlotTick


# =============================================================================
# Actions
# =============================================================================


@dataclass(frozen=True)
class BroadcastId:
    irs_id: int


@dataclass(frozen=True)
class Announce:
    """Retro-reflect the angle-announce packet for ``angle``."""

    angle: int
    irs_id: int


@dataclass(frozen=True)
class Reflect:
    angle: int
    slots: int


@dataclass(frozen=True)
class Resample:
    pass


@dataclass(frozen=True)
class Chirp:
    pass


@dataclass(frozen=True)
class SendAoi:
    aoi: AngleDurationSet


@dataclass(frozen=True)
class Sense:
    angle: int
    slots: int


@dataclass(frozen=True)
class Wait:
    angle: int


@dataclass(frozen=True)
class UpdateAoi:
    aoi: AngleDurationSet


IrsAction = BroadcastId | Announce | Reflect | Resample
RadarAction = Chirp | SendAoi | Sense | Wait | UpdateAoi


# =============================================================================
# IRS
# =============================================================================


class IrsPhase(StrEnum):
    INIT = "init"
    LISTEN = "listen"


@dataclass(frozen=True)
class IrsFsmState:
    irs_id: int
    angles: tuple[int, ...] = SUPPORTED_ANGLES
    default_slots: int = 10
    phase: IrsPhase = IrsPhase.INIT
    surface: IrsState = field(default_factory=IrsState)
    aoi: AngleDurationSet | None = None


def _aoi_groups(messages: Sequence[Message]) -> list[AngleDurationSet]:
    """Split a slot's messages into one schedule per AoI bitmap."""
    groups: list[list[Message]] = []
    for message in messages:
        if isinstance(message, AoiSet):
            groups.append([message])
        elif groups:
            groups[-1].append(message)
    schedules = [aoi_from_messages(g) for g in groups]
    return [s for s in schedules if s is not None]


def irs_fsm_step(state: IrsFsmState, event: IrsEvent) -> tuple[IrsFsmState, list[IrsAction]]:
    """Advance the IRS by one event.

    The IRS broadcasts its ID once after power-up. Afterwards every
    radar-to-IRS slot either yields AoI sets (merged, longest duration per
    angle), plain radar activity (all angles at the default duration) or
    silence (sample again).
    """
    if state.phase is IrsPhase.INIT:
        logger.info(f"IRS {state.irs_id} broadcasting ID")
        retro = IrsState(IrsMode.RETRO, irs_id=state.irs_id)
        return replace(state, phase=IrsPhase.LISTEN, surface=retro), [BroadcastId(state.irs_id)]

    if isinstance(event, SlotTick):
        return state, [Resample()]

    if event.malformed:
        logger.warning(f"IRS {state.irs_id} ignored {event.malformed} malformed packet(s)")

    schedules = _aoi_groups(event.messages)
    if schedules:
        aoi = schedules[0]
        for other in schedules[1:]:
            aoi = aoi.merge(other)
        logger.info(f"IRS {state.irs_id} using AoI {aoi.entries}")
    elif event.radar_present or event.messages:
        aoi = AngleDurationSet.full(state.angles, state.default_slots)
        logger.debug(f"IRS {state.irs_id} heard a radar without AoI; sweeping all angles")
    else:
        return state, [Resample()]

    actions: list[IrsAction] = []
    for angle, slots in aoi:
        actions.append(Announce(angle, state.irs_id))
        actions.append(Reflect(angle, slots))
    last = IrsState(IrsMode.REFLECT, angle=aoi.angles[-1], irs_id=state.irs_id)
    return replace(state, surface=last, aoi=aoi), actions


# =============================================================================
# Radar
# =============================================================================


class RadarPhase(StrEnum):
    CHIRPING = "chirping"
    SCANNING = "scanning"


@dataclass(frozen=True)
class RadarPolicy:
    """Scheduler knobs the radar applies at the end of each superframe."""

    adaptive: bool = True
    angles: tuple[int, ...] = SUPPORTED_ANGLES
    naive_slots: int = 10
    delta_alpha_deg: float = 15.0
    d_max_energy: int = 8
    slot_seconds: float = 0.1625
    strict_formula: bool = False
    infeasible_policy: Literal["clamp", "naive"] = "clamp"
    lost_timeout_slots: int = 64
    max_slots_per_angle: int = 16
    range_tolerance: float = 0.1
    leak_ratio: float = 0.5

    @property
    def initial_aoi(self) -> AngleDurationSet:
        return AngleDurationSet.full(self.angles, self.naive_slots)


@dataclass(frozen=True)
class RadarFsmState:
    radar_id: str
    policy: RadarPolicy = field(default_factory=RadarPolicy)
    phase: RadarPhase = RadarPhase.CHIRPING
    irs_id: int | None = None
    aoi: AngleDurationSet | None = None
    current_angle: int | None = None
    collected: tuple[TargetDetection, ...] = ()
    silent_slots: int = 0


def next_aoi(state: RadarFsmState) -> AngleDurationSet:
    """Schedule for the next superframe from the detections collected so far."""
    policy = state.policy
    prev = state.aoi if state.aoi is not None else policy.initial_aoi
    found = strongest_per_range(state.collected, policy.range_tolerance, policy.leak_ratio)
    try:
        aoi = build_aoi(
            found,
            prev,
            policy.delta_alpha_deg,
            policy.d_max_energy,
            slot_seconds=policy.slot_seconds,
            strict_formula=policy.strict_formula,
        )
    except InfeasibleScheduleError as exc:
        if policy.infeasible_policy == "naive":
            logger.warning(f"Radar {state.radar_id}: {exc}; falling back to the naive frame")
            aoi = policy.initial_aoi
        else:
            minimum = minimum_durations(
                found, policy.d_max_energy, strict_formula=policy.strict_formula
            )
            try:
                aoi = clamp_aoi(minimum, exc.max_scan_slots)
            except InfeasibleScheduleError:
                aoi = AngleDurationSet(tuple((a, 1) for a in minimum.angles))
            logger.warning(f"Radar {state.radar_id}: {exc}; clamped to {aoi.entries}")
    return cap_durations(aoi, policy.max_slots_per_angle)


def _acquire(state: RadarFsmState, irs_id: int) -> tuple[RadarFsmState, list[RadarAction]]:
    aoi = state.policy.initial_aoi
    logger.info(f"Radar {state.radar_id} decoded IRS {irs_id}")
    acquired = replace(
        state, phase=RadarPhase.SCANNING, irs_id=irs_id, aoi=aoi, collected=(), silent_slots=0
    )
    return acquired, [SendAoi(aoi)] if state.policy.adaptive else []


def _lost(state: RadarFsmState) -> tuple[RadarFsmState, list[RadarAction]]:
    logger.warning(
        f"Radar {state.radar_id} lost IRS {state.irs_id} after {state.silent_slots} silent slots"
    )
    reset = RadarFsmState(state.radar_id, state.policy)
    return reset, [Chirp()]


def radar_fsm_step(
    state: RadarFsmState, event: RadarEvent
) -> tuple[RadarFsmState, list[RadarAction]]:
    """Advance a radar by one event.

    While chirping the radar waits for an IRS identity (an ID or angle
    announce). Once scanning it senses only the announced angles inside its
    AoI, waits through the others and rebuilds the AoI when the superframe
    ends. Too many silent comm slots send it back to chirping.
    """
    if state.phase is RadarPhase.CHIRPING:
        if isinstance(event, RxFrame) and isinstance(event.message, IdAnnounce | AngleAnnounce):
            return _acquire(state, event.message.irs_id)
        return state, [Chirp()]

    assert state.aoi is not None
    if isinstance(event, SlotTick):
        if not state.policy.adaptive:
            return replace(state, collected=(), current_angle=None), []
        aoi = next_aoi(state)
        logger.debug(f"Radar {state.radar_id} next AoI {aoi.entries} (D_scan={aoi.d_scan})")
        updated = replace(state, aoi=aoi, collected=(), current_angle=None)
        return updated, [UpdateAoi(aoi), SendAoi(aoi)]

    message = event.message
    if isinstance(message, AngleAnnounce):
        heard = replace(state, current_angle=message.angle, silent_slots=0)
        if message.angle in state.aoi.angles:
            return heard, [Sense(message.angle, state.aoi.duration(message.angle))]
        logger.debug(f"Radar {state.radar_id} waiting through {message.angle} deg")
        return heard, [Wait(message.angle)]
    if isinstance(message, IdAnnounce):
        logger.info(f"Radar {state.radar_id}: IRS {message.irs_id} restarted; resending AoI")
        return replace(state, silent_slots=0), [SendAoi(state.aoi)] if state.policy.adaptive else []
    if message is not None:
        return state, []

    if event.detections:
        if state.current_angle not in state.aoi.angles:
            return state, []
        return replace(state, collected=state.collected + event.detections), []

    silent = state.silent_slots + 1
    if silent >= state.policy.lost_timeout_slots:
        return _lost(replace(state, silent_slots=silent))
    return replace(state, silent_slots=silent), []
