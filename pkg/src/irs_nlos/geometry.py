"""Plan-view scene model and the closed-form relay localization equations."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

from irs_nlos.errors import DegenerateGeometryError

logger = logging.getLogger(__name__)

_EPS = 1e-12


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"Point2 coordinates must be finite, got ({self.x}, {self.y})")

    def __add__(self, other: Point2) -> Point2:
        return Point2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: Point2) -> Point2:
        return Point2(self.x - other.x, self.y - other.y)

    def distance_to(self, other: Point2) -> float:
        return math.hypot(other.x - self.x, other.y - self.y)

    def bearing_to(self, other: Point2) -> float:
        """World bearing (radians, counter-clockwise from +x) toward ``other``."""
        return math.atan2(other.y - self.y, other.x - self.x)

    def offset(self, distance: float, bearing: float) -> Point2:
        return Point2(self.x + distance * math.cos(bearing), self.y + distance * math.sin(bearing))


def wrap_angle(angle: float) -> float:
    """Wrap to (-pi, pi]."""
    wrapped = math.remainder(angle, 2.0 * math.pi)
    return math.pi if wrapped == -math.pi else wrapped


@dataclass(frozen=True)
class Radar:
    """A radar with its two transmit antennas and array boresight."""

    id: str
    position: Point2
    tx_positions: tuple[Point2, Point2]
    boresight: float = 0.0

    @classmethod
    def with_spacing(
        cls, id: str, position: Point2, wavelength: float, boresight: float = 0.0
    ) -> Radar:
        """Place TX1/TX2 half a wavelength apart, across the boresight."""
        half = wavelength / 4.0
        across = boresight + math.pi / 2.0
        return cls(
            id=id,
            position=position,
            tx_positions=(position.offset(-half, across), position.offset(half, across)),
            boresight=boresight,
        )


@dataclass(frozen=True)
class IrsSite:
    position: Point2
    normal: float = 0.0


@dataclass(frozen=True)
class Target:
    id: str
    position: Point2
    velocity: tuple[float, float] = (0.0, 0.0)
    reflectivity: float = 1.0

    @property
    def speed(self) -> float:
        return math.hypot(*self.velocity)


def _orientation(a: Point2, b: Point2, c: Point2) -> float:
    return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)


def segments_intersect(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool:
    """True if closed segments p1-p2 and q1-q2 share a point."""
    d1 = _orientation(q1, q2, p1)
    d2 = _orientation(q1, q2, p2)
    d3 = _orientation(p1, p2, q1)
    d4 = _orientation(p1, p2, q2)
    if ((d1 > _EPS and d2 < -_EPS) or (d1 < -_EPS and d2 > _EPS)) and (
        (d3 > _EPS and d4 < -_EPS) or (d3 < -_EPS and d4 > _EPS)
    ):
        return True

    def on_segment(a: Point2, b: Point2, c: Point2) -> bool:
        return (
            min(a.x, b.x) - _EPS <= c.x <= max(a.x, b.x) + _EPS
            and min(a.y, b.y) - _EPS <= c.y <= max(a.y, b.y) + _EPS
        )

    return (
        (abs(d1) <= _EPS and on_segment(q1, q2, p1))
        or (abs(d2) <= _EPS and on_segment(q1, q2, p2))
        or (abs(d3) <= _EPS and on_segment(p1, p2, q1))
        or (abs(d4) <= _EPS and on_segment(p1, p2, q2))
    )


def point_in_polygon(point: Point2, polygon: Sequence[Point2]) -> bool:
    """Even-odd ray casting."""
    inside = False
    n = len(polygon)
    for i in range(n):
        a, b = polygon[i], polygon[(i + 1) % n]
        if (a.y > point.y) != (b.y > point.y):
            x_cross = a.x + (point.y - a.y) * (b.x - a.x) / (b.y - a.y)
            if point.x < x_cross:
                inside = not inside
    return inside


def segment_hits_polygon(a: Point2, b: Point2, polygon: Sequence[Point2]) -> bool:
    if len(polygon) < 2:
        return False
    n = len(polygon)
    for i in range(n):
        if segments_intersect(a, b, polygon[i], polygon[(i + 1) % n]):
            return True
    return len(polygon) >= 3 and point_in_polygon(a, polygon)


@dataclass(frozen=True)
class Scene:
    """Radars, one IRS, moving targets and a blocking obstacle."""

    radars: tuple[Radar, ...]
    irs: IrsSite | None
    targets: tuple[Target, ...] = ()
    obstacle: tuple[Point2, ...] = ()
    nlos: bool = False
    clutter: tuple[tuple[Point2, float], ...] = field(default=())

    def radar(self, radar_id: str | None = None) -> Radar:
        if not self.radars:
            raise ValueError("scene has no radar")
        if radar_id is None:
            return self.radars[0]
        for radar in self.radars:
            if radar.id == radar_id:
                return radar
        raise KeyError(f"unknown radar {radar_id!r}")

    def target(self, target_id: str) -> Target:
        for target in self.targets:
            if target.id == target_id:
                return target
        raise KeyError(f"unknown target {target_id!r}")

    def line_of_sight(self, a: Point2, b: Point2) -> bool:
        return not segment_hits_polygon(a, b, self.obstacle)

    def check_tx_spacing(self, wavelength: float, rel_tol: float = 1e-6) -> None:
        for radar in self.radars:
            spacing = radar.tx_positions[0].distance_to(radar.tx_positions[1])
            if not math.isclose(spacing, wavelength / 2.0, rel_tol=rel_tol):
                raise ValueError(
                    f"radar {radar.id}: TX spacing {spacing:.6f} m is not lambda/2 "
                    f"({wavelength / 2.0:.6f} m)"
                )

    def check_nlos(self) -> None:
        """Every target must be hidden from every radar when tagged NLoS."""
        if not self.nlos:
            return
        for radar in self.radars:
            for target in self.targets:
                if self.line_of_sight(radar.position, target.position):
                    raise ValueError(
                        f"scene tagged NLoS but target {target.id} is visible from {radar.id}"
                    )


@dataclass(frozen=True)
class PathSolution:
    d_rs: float
    d_st: float
    phi: float
    alpha_required: float
    alpha_defined: bool = True


def irs_position(radar: Point2, d_rs: float, phi: float) -> Point2:
    """IRS location from its range and AoA at the radar."""
    if d_rs <= 0:
        raise ValueError(f"D_RS must be positive, got {d_rs}")
    return Point2(radar.x + d_rs * math.cos(phi), radar.y + d_rs * math.sin(phi))


def target_position(irs: Point2, d_st: float, alpha: float, phi: float) -> Point2:
    """Target location from the IRS leg length and the reflection angle."""
    if d_st < 0:
        raise ValueError(f"D_ST must be non-negative, got {d_st}")
    return Point2(irs.x - d_st * math.cos(alpha - phi), irs.y + d_st * math.sin(alpha - phi))


def beam_bearing(phi: float, alpha: float) -> float:
    """World bearing from the IRS along the beam reflected at ``alpha``."""
    return wrap_angle(math.pi - alpha + phi)


def solve_forward_path(scene: Scene, target_id: str, radar_id: str | None = None) -> PathSolution:
    """Ground-truth relay geometry for one target.

    ``alpha_required`` is chosen so that ``target_position`` reproduces the
    true target; only ``alpha - phi`` is constrained by the geometry.
    """
    if scene.irs is None:
        raise ValueError("scene has no IRS")
    radar = scene.radar(radar_id).position
    irs = scene.irs.position
    target = scene.target(target_id).position

    d_rs = radar.distance_to(irs)
    if d_rs <= _EPS:
        raise DegenerateGeometryError("radar and IRS coincide")
    phi = radar.bearing_to(irs)
    d_st = irs.distance_to(target)
    if d_st <= _EPS:
        logger.debug(f"Target {target_id} sits on the IRS; alpha left undefined")
        return PathSolution(d_rs, 0.0, phi, 0.0, alpha_defined=False)

    dx, dy = target.x - irs.x, target.y - irs.y
    alpha = wrap_angle(phi + math.atan2(dy, -dx))
    return PathSolution(d_rs, d_st, phi, alpha)


def angular_mismatch_error(d_st: float, delta_deg: float) -> float:
    """Chord displacement when the beam is ``delta_deg`` off the true bearing."""
    if d_st < 0:
        raise ValueError("D_ST must be non-negative")
    if not 0.0 <= delta_deg <= 180.0:
        raise ValueError("delta must lie in [0, 180] degrees")
    return 2.0 * d_st * math.sin(math.radians(delta_deg) / 2.0)
