"""Closed contours in the (omega, eps0) drive plane and their topology.

A loop is an ellipse traversed at uniform angular speed over duration T,
either clockwise (CW) or counter-clockwise (CCW). Whether the loop encircles
the exceptional point is measured two independent ways: geometrically through
the signed proximity ``rho`` and topologically through the winding number of
the discriminant around the complex origin.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import EPOnContourError, UndersampledError
from .model import EPLocation, FieldPoint, SystemParams, locate_ep

__all__ = [
    "Direction",
    "LoopSpec",
    "StaticDrive",
    "field_at",
    "field_velocity",
    "winding_number",
    "rho",
    "contains_ep",
]


class Direction(enum.Enum):
    CW = "cw"
    CCW = "ccw"

    @property
    def sign(self) -> int:
        """Angular orientation: +1 for CCW, -1 for CW."""
        return 1 if self is Direction.CCW else -1

    def reversed(self) -> "Direction":
        return Direction.CW if self is Direction.CCW else Direction.CCW


@dataclass(frozen=True)
class LoopSpec:
    """Elliptical contour center +/- (a*cos, b*sin) with direction and duration.

    The drive amplitude must stay physical (eps0 >= 0) along the whole
    contour, which requires center.eps0 >= semi_axis_eps. Equality is allowed
    and makes the loop touch eps0 = 0, where bare and adiabatic states
    coincide; that is the natural start/end point for pulse-like protocols.
    """

    center: FieldPoint
    semi_axis_omega: float
    semi_axis_eps: float
    direction: Direction
    duration_T: float
    start_phase: float = 0.0

    def __post_init__(self) -> None:
        if self.semi_axis_omega <= 0:
            raise ValueError("semi_axis_omega must be > 0")
        if self.semi_axis_eps <= 0:
            raise ValueError("semi_axis_eps must be > 0")
        if self.duration_T <= 0:
            raise ValueError("duration_T must be > 0")
        if self.center.eps0 < self.semi_axis_eps:
            raise ValueError("center.eps0 must be >= semi_axis_eps (eps0 >= 0 on contour)")

    def reversed(self) -> "LoopSpec":
        return LoopSpec(
            center=self.center,
            semi_axis_omega=self.semi_axis_omega,
            semi_axis_eps=self.semi_axis_eps,
            direction=self.direction.reversed(),
            duration_T=self.duration_T,
            start_phase=self.start_phase,
        )

    # -- drive protocol ----------------------------------------------------

    def _theta(self, t: float) -> float:
        # t/T reduced mod 1 so that t = T reproduces t = 0 bit-for-bit
        frac = math.fmod(t / self.duration_T, 1.0)
        return self.start_phase + self.direction.sign * 2.0 * math.pi * frac

    def field_at(self, t: float) -> FieldPoint:
        return field_at(self, t)

    def velocity_at(self, t: float) -> tuple[float, float]:
        return field_velocity(self, t)

    def omega_integral(self, t: float) -> float:
        """Closed form of int_0^t omega(t') dt' (used to factor the mean phase)."""
        _check_time(self, t)
        th0 = self.start_phase
        rate = self.direction.sign * 2.0 * math.pi / self.duration_T
        return self.center.omega * t + self.semi_axis_omega * (
            (math.sin(th0 + rate * t) - math.sin(th0)) / rate
        )


@dataclass(frozen=True)
class StaticDrive:
    """Constant field held for a finite duration.

    The degenerate (zero-area) limit of a loop, exposed directly so constant
    drives do not need fake ellipse axes.
    """

    field: FieldPoint
    duration_T: float

    def __post_init__(self) -> None:
        if self.duration_T <= 0:
            raise ValueError("duration_T must be > 0")

    def field_at(self, t: float) -> FieldPoint:
        _check_time(self, t)
        return self.field

    def velocity_at(self, t: float) -> tuple[float, float]:
        _check_time(self, t)
        return (0.0, 0.0)

    def omega_integral(self, t: float) -> float:
        _check_time(self, t)
        return self.field.omega * t


def _check_time(drive, t: float) -> None:
    if not 0.0 <= t <= drive.duration_T:
        raise ValueError(f"t = {t} outside [0, {drive.duration_T}]")


def field_at(loop: LoopSpec, t: float) -> FieldPoint:
    """Contour point at time t: theta(t) = start_phase + sign*2*pi*t/T."""
    _check_time(loop, t)
    th = loop._theta(t)
    return FieldPoint(
        omega=loop.center.omega + loop.semi_axis_omega * math.cos(th),
        eps0=loop.center.eps0 + loop.semi_axis_eps * math.sin(th),
    )


def field_velocity(loop: LoopSpec, t: float) -> tuple[float, float]:
    """Analytic time derivative of field_at; scales as 1/T for fixed geometry."""
    _check_time(loop, t)
    th = loop._theta(t)
    rate = loop.direction.sign * 2.0 * math.pi / loop.duration_T
    return (
        -loop.semi_axis_omega * math.sin(th) * rate,
        loop.semi_axis_eps * math.cos(th) * rate,
    )


def _discriminant_on_loop(loop: LoopSpec, params: SystemParams, times: np.ndarray) -> np.ndarray:
    """Vectorized discriminant along the contour (keeps winding sweeps fast)."""
    frac = np.mod(times / loop.duration_T, 1.0)
    th = loop.start_phase + loop.direction.sign * 2.0 * np.pi * frac
    omega = loop.center.omega + loop.semi_axis_omega * np.cos(th)
    eps0 = loop.center.eps0 + loop.semi_axis_eps * np.sin(th)
    dh = (params.e1 + omega - params.e2) + 1j * params.delta_gamma
    h12 = 0.5 * eps0 * complex(params.d12)
    return dh * dh + 4.0 * h12 * h12


def winding_number(
    loop: LoopSpec,
    params: SystemParams,
    n_samples: int = 1024,
    tol: float = 1e-12,
) -> int:
    """Integer winding of the discriminant around the complex origin.

    Accumulates the continuous argument of Delta along one traversal. The
    result is -1 for a CCW loop enclosing the EP of this model (+1 for CW)
    and 0 otherwise; the sign convention follows from Delta circling the
    origin opposite to the parameter-space orientation here.

    Raises
    ------
    EPOnContourError
        If |Delta| < tol at any sample (contour touches the degeneracy).
    UndersampledError
        If any adjacent-sample argument jump exceeds pi/2.
    """
    if n_samples < 64:
        raise ValueError("n_samples must be >= 64")
    times = np.linspace(0.0, loop.duration_T, n_samples + 1)
    delta = _discriminant_on_loop(loop, params, times)
    mags = np.abs(delta)
    if np.any(mags < tol):
        k = int(np.argmin(mags))
        raise EPOnContourError(
            f"|discriminant| = {mags[k]:.3e} < tol at sample t = {times[k]:.6g}"
        )
    args = np.angle(delta)
    jumps = np.diff(args)
    jumps = (jumps + np.pi) % (2.0 * np.pi) - np.pi
    worst = float(np.max(np.abs(jumps)))
    if worst > 0.5 * np.pi:
        raise UndersampledError(
            f"argument jump {worst:.3f} rad > pi/2 between samples; raise n_samples"
        )
    total = float(np.sum(jumps))
    w = total / (2.0 * np.pi)
    w_int = round(w)
    # closed contour: the accumulated argument must come out an exact multiple
    if abs(w - w_int) > 1e-6:
        raise UndersampledError(f"winding accumulated to non-integer {w:.6f}")
    return int(w_int)


def rho(loop: LoopSpec, ep: EPLocation) -> float:
    """Signed EP-to-loop proximity in model units.

    r_hat is the elliptical radius of the EP in loop coordinates; rho =
    (1 - r_hat) * min(a, b) is positive when the EP lies strictly inside,
    zero on the contour, negative outside.
    """
    rx = (ep.field.omega - loop.center.omega) / loop.semi_axis_omega
    ry = (ep.field.eps0 - loop.center.eps0) / loop.semi_axis_eps
    r_hat = math.hypot(rx, ry)
    return (1.0 - r_hat) * min(loop.semi_axis_omega, loop.semi_axis_eps)


def contains_ep(loop: LoopSpec, params: SystemParams) -> bool:
    """True iff the loop strictly encircles the model's EP (rho > 0)."""
    return rho(loop, locate_ep(params)) > 0.0
