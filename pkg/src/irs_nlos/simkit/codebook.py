"""Six-bit payload codebook.

Two type bits, four content bits:

- ``00`` ID announce: angle index (2 bits) + IRS id (2 bits)
- ``01`` AoI set: one bit per supported angle, 30 deg first
- ``10`` angle announce: angle index (2 bits) + IRS id (2 bits)
- ``11`` slot grant: sensing slots minus one (1..16)
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from enum import IntEnum

from irs_nlos.comms import Bits
from irs_nlos.errors import MalformedPacketError
from irs_nlos.irs import SUPPORTED_ANGLES
from irs_nlos.scheduler import AngleDurationSet

logger = logging.getLogger(__name__)

MAX_GRANT_SLOTS = 16


class MessageType(IntEnum):
    ID_ANNOUNCE = 0b00
    AOI_SET = 0b01
    ANGLE_ANNOUNCE = 0b10
    SLOT_GRANT = 0b11


@dataclass(frozen=True)
class IdAnnounce:
    irs_id: int


@dataclass(frozen=True)
class AoiSet:
    angles: tuple[int, ...]


@dataclass(frozen=True)
class AngleAnnounce:
    angle: int
    irs_id: int


@dataclass(frozen=True)
class SlotGrant:
    slots: int


Message = IdAnnounce | AoiSet | AngleAnnounce | SlotGrant


def _to_bits(value: int, width: int) -> Bits:
    return tuple((value >> (width - 1 - i)) & 1 for i in range(width))


def _from_bits(bits: Sequence[int]) -> int:
    value = 0
    for b in bits:
        value = (value << 1) | b
    return value


def _check_id(irs_id: int) -> None:
    if not 0 <= irs_id <= 3:
        raise ValueError(f"IRS id must fit in 2 bits, got {irs_id}")


def encode_message(message: Message) -> Bits:
    """Six payload bits for a message."""
    match message:
        case IdAnnounce(irs_id=irs_id):
            _check_id(irs_id)
            return _to_bits(MessageType.ID_ANNOUNCE, 2) + _to_bits(0, 2) + _to_bits(irs_id, 2)
        case AoiSet(angles=angles):
            if not angles:
                raise ValueError("AoI set must name at least one angle")
            bitmap = tuple(int(a in angles) for a in SUPPORTED_ANGLES)
            if sum(bitmap) != len(set(angles)):
                raise ValueError(f"unsupported angle in {angles}")
            return _to_bits(MessageType.AOI_SET, 2) + bitmap
        case AngleAnnounce(angle=angle, irs_id=irs_id):
            _check_id(irs_id)
            if angle not in SUPPORTED_ANGLES:
                raise ValueError(f"unsupported angle {angle}")
            index = SUPPORTED_ANGLES.index(angle)
            return _to_bits(MessageType.ANGLE_ANNOUNCE, 2) + _to_bits(index, 2) + _to_bits(irs_id, 2)
        case SlotGrant(slots=slots):
            if slots < 1:
                raise ValueError("slot grant must be at least 1")
            if slots > MAX_GRANT_SLOTS:
                logger.warning(f"Slot grant {slots} clamped to {MAX_GRANT_SLOTS}")
                slots = MAX_GRANT_SLOTS
            return _to_bits(MessageType.SLOT_GRANT, 2) + _to_bits(slots - 1, 4)
    raise TypeError(f"not a message: {message!r}")


def decode_message(payload: Sequence[int]) -> Message:
    """Inverse of :func:`encode_message`."""
    bits = tuple(payload)
    if len(bits) != 6:
        raise MalformedPacketError(f"payload must be 6 bits, got {len(bits)}")
    kind = MessageType(_from_bits(bits[:2]))
    content = bits[2:]
    if kind is MessageType.AOI_SET:
        angles = tuple(a for a, bit in zip(SUPPORTED_ANGLES, content, strict=True) if bit)
        if not angles:
            raise MalformedPacketError("empty AoI bitmap")
        return AoiSet(angles)
    if kind is MessageType.SLOT_GRANT:
        return SlotGrant(_from_bits(content) + 1)
    index, irs_id = _from_bits(content[:2]), _from_bits(content[2:])
    if kind is MessageType.ID_ANNOUNCE:
        return IdAnnounce(irs_id)
    return AngleAnnounce(SUPPORTED_ANGLES[index], irs_id)


def aoi_messages(aoi: AngleDurationSet) -> list[Message]:
    """AoI bitmap followed by one grant per angle, in bitmap order."""
    entries = sorted(aoi)
    messages: list[Message] = [AoiSet(tuple(a for a, _ in entries))]
    messages.extend(SlotGrant(d) for _, d in entries)
    return messages


def aoi_from_messages(messages: Sequence[Message]) -> AngleDurationSet | None:
    """Rebuild the schedule from an AoI bitmap and its grants.

    Returns None when no AoI bitmap was received. Missing grants fall back
    to one slot with a warning.
    """
    aoi = next((m for m in messages if isinstance(m, AoiSet)), None)
    if aoi is None:
        return None
    grants = [m.slots for m in messages if isinstance(m, SlotGrant)]
    if len(grants) < len(aoi.angles):
        logger.warning(f"AoI {aoi.angles} arrived with {len(grants)} grants; padding with 1 slot")
        grants += [1] * (len(aoi.angles) - len(grants))
    return AngleDurationSet(tuple(zip(aoi.angles, grants[: len(aoi.angles)], strict=True)))
