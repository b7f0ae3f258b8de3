"""Exception types raised across the simulator.

Precondition failures also derive from ValueError so callers that only
know about the standard library keep working.
"""

from __future__ import annotations


class NlosError(Exception):
    """Base class for all simulator errors."""


class DegenerateGeometryError(NlosError, ValueError):
    """Two points that must differ coincide, or a distance is not positive."""

    def __init__(self, detail: str = "") -> None:
        super().__init__(f"degenerate geometry{': ' + detail if detail else ''}")


class UnsupportedAngleError(NlosError, ValueError):
    """A reflection angle outside the supported beam set was requested."""

    def __init__(self, angle: float) -> None:
        self.angle = angle
        super().__init__(f"angle not supported: {angle:g} deg")


class InsufficientDataError(NlosError, ValueError):
    """Not enough samples, chirps or snapshots to run an estimator."""


class PacketNotFoundError(NlosError):
    """Correlation never reached the confidence threshold."""

    def __init__(self, confidence: float) -> None:
        self.confidence = confidence
        super().__init__(f"no packet found (best correlation {confidence:.3f})")


class MalformedPacketError(NlosError, ValueError):
    """Header, preamble or payload content did not decode."""


class CalibrationRequiredError(NlosError):
    """OOK demodulation was attempted before ON/OFF levels were trained."""

    def __init__(self) -> None:
        super().__init__("calibration required")


class InfeasibleScheduleError(NlosError):
    """The requested scan violates the target-speed constraint."""

    def __init__(self, d_scan: int, max_scan_slots: int) -> None:
        self.d_scan = d_scan
        self.max_scan_slots = max_scan_slots
        super().__init__(
            f"infeasible schedule: D_scan={d_scan} slots, at most {max_scan_slots} allowed"
        )


class IrsNotFoundError(NlosError):
    """No peak carried the IRS on/off signature."""

    def __init__(self) -> None:
        super().__init__("IRS not found")


class NegativeLegError(NlosError, ValueError):
    """The measured path is shorter than the radar-to-IRS leg."""

    def __init__(self, total_path: float, d_rs: float) -> None:
        super().__init__(f"negative leg: total path {total_path:.4f} m < D_RS {d_rs:.4f} m")
