"""Time propagation along drive contours, in bare and adiabatic frames.

Both propagators integrate i dc/dt = H(t) c for the driven two-level model.
The mean (trace) part of H is removed analytically before integration: the
trace's imaginary part is constant in time, so the common phase and mean
decay factor exp(-i int tr(H)/2 dt) is known in closed form and the stepper
only has to resolve the traceless dynamics, whose rates are set by the small
eigenvalue splitting. This keeps norm drift at machine precision for
Hermitian parameters and postpones overflow for strongly decaying runs.

``propagate_direct`` integrates the bare-basis amplitudes with an adaptive
8th-order Runge-Kutta (DOP853). ``propagate_adiabatic`` expands the state in
the instantaneous eigenbasis, integrating coefficients whose off-diagonal
couplings are the velocity-weighted eigenvector derivatives; branch identity
is maintained by c-product overlap tracking, which is exactly where the
state-exchange around an exceptional point shows up. The two routes share
no stepper code, so their agreement is a genuine cross-check.

Recorded amplitudes are kept inside the representable range: if the true
squared norm leaves [1e-150, 1e+150] the stored state is renormalized and
the log of the discarded factor accumulates in ``log_scale`` (true norm^2 =
``norms_sq * exp(log_scale)``). All normalized projections are unaffected.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.integrate import DOP853, simpson

from .errors import (
    AmbiguousTrackingError,
    EPOnContourError,
    EPProximityError,
    NonFiniteError,
    StepSizeUnderflowError,
)
from .loops import LoopSpec, StaticDrive
from .model import (
    EigenFrame,
    FieldPoint,
    HamiltonianMatrix,
    SystemParams,
    _eigensystem,
    _root_plus,
    build_hamiltonian,
    c_product,
    discriminant,
)

__all__ = [
    "StateVector",
    "IntegratorConfig",
    "TrajectoryRecord",
    "AdiabaticFrame",
    "propagate_direct",
    "propagate_adiabatic",
    "na_coupling",
    "na_coupling_at",
    "track_branches",
    "accumulated_phase",
    "average_decay_rate",
]

Drive = Union[LoopSpec, StaticDrive]

# stored squared norm is kept inside this window (log bounds)
_LOG_RECORD_LO = math.log(1e-150)
_LOG_RECORD_HI = math.log(1e150)
# tighter internal window so intermediate RK stages stay far from overflow
_LOG_WORK_LO = math.log(1e-100)
_LOG_WORK_HI = math.log(1e100)

_FD_REL_STEP = 1e-6  # central-difference step scale for eigenvector derivatives


@dataclass(frozen=True)
class StateVector:
    """Two complex amplitudes on the bare basis; not both zero."""

    c1: complex
    c2: complex

    def __post_init__(self) -> None:
        if self.c1 == 0 and self.c2 == 0:
            raise ValueError("state vector must not be identically zero")

    @classmethod
    def coerce(cls, value) -> "StateVector":
        if isinstance(value, StateVector):
            return value
        c1, c2 = value
        return cls(complex(c1), complex(c2))

    @classmethod
    def basis(cls, index: int) -> "StateVector":
        if index not in (1, 2):
            raise ValueError("basis index must be 1 or 2")
        return cls(1.0 + 0j, 0j) if index == 1 else cls(0j, 1.0 + 0j)

    @classmethod
    def equal_superposition(cls, relative_phase: float = 0.0) -> "StateVector":
        amp = 1.0 / math.sqrt(2.0)
        return cls(amp, amp * cmath.exp(1j * relative_phase))

    def as_array(self) -> np.ndarray:
        return np.array([self.c1, self.c2], dtype=complex)


@dataclass(frozen=True)
class IntegratorConfig:
    """Adaptive step control settings shared by both propagators."""

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = 10.0
    initial_step: float = 1e-2

    def __post_init__(self) -> None:
        for name in ("rel_tol", "abs_tol", "max_step", "initial_step"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.rel_tol < 100.0 * np.finfo(float).eps:
            raise ValueError("rel_tol must be >= 100 * machine epsilon")


@dataclass(frozen=True)
class TrajectoryRecord:
    """Time series of the propagated state.

    ``states`` holds the stored (possibly renormalized) amplitudes; the
    physical squared norm at row k is ``norms_sq[k] * exp(log_scale[k])``.
    ``adiabatic_coeffs`` (adiabatic runs only) are the coefficients of the
    stored state on the tracked instantaneous eigenvectors, and
    ``branch_labels`` gives the instantaneous label ('+' or '-') of tracked
    slot 0 at each time.
    """

    times: np.ndarray
    states: np.ndarray
    norms_sq: np.ndarray
    log_scale: np.ndarray
    adiabatic_coeffs: Optional[np.ndarray]
    branch_labels: Optional[np.ndarray]
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        t = np.asarray(self.times)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("times must be a 1-D array with at least two entries")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValueError("times must increase strictly from 0")

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def true_norm_sq(self, k: int = -1) -> float:
        return float(self.norms_sq[k] * math.exp(self.log_scale[k]))


@dataclass(frozen=True)
class AdiabaticFrame:
    """Eigenframes sampled along a loop with branch continuity applied.

    Slot 0 starts on the instantaneous '+' branch, slot 1 on '-'; each slot
    then follows its eigenvector by maximal c-product overlap between
    adjacent samples. ``labels[k, s]`` records which instantaneous branch
    slot s occupies at ``times[k]``.
    """

    times: np.ndarray
    energies: np.ndarray  # (m, 2) complex, per tracked slot
    vectors: np.ndarray  # (m, 2, 2) complex, [time, slot, component]
    labels: np.ndarray  # (m, 2) of '+'/'-'

    @property
    def swapped(self) -> bool:
        """True when one traversal exchanged the branches (EP encircled)."""
        return bool(self.labels[-1, 0] != self.labels[0, 0])


# ---------------------------------------------------------------------------
# trace-phase bookkeeping
# ---------------------------------------------------------------------------


def _mean_decay(params: SystemParams) -> float:
    return 0.5 * (params.gamma1 + params.gamma2)


def _trace_phase(params: SystemParams, drive: Drive, t: float) -> float:
    """Re int_0^t tr H / 2 dt' (the removed common phase), in closed form."""
    return 0.5 * ((params.e1 + params.e2) * t + drive.omega_integral(t))


def _clamped_field(drive: Drive, t: float) -> FieldPoint:
    # RK stages can poke epsilon outside [0, T]; the contour formula is
    # periodic and smooth, so clamping is exact at the boundaries
    tt = min(max(t, 0.0), drive.duration_T)
    return drive.field_at(tt)


# ---------------------------------------------------------------------------
# recording shared by both propagators
# ---------------------------------------------------------------------------


class _Recorder:
    """Accumulates rows and converts scale factors to the recorded convention."""

    def __init__(self, params: SystemParams, drive: Drive) -> None:
        self._params = params
        self._drive = drive
        self._gbar = _mean_decay(params)
        self.rows: list[tuple] = []  # (t, payload, log_internal)
        self._offset = 0.0
        self._last_t: float | None = None

    def add(self, t: float, payload, log_internal: float) -> None:
        if self._last_t is not None and t <= self._last_t:
            return
        self._last_t = t
        self.rows.append((t, payload, log_internal))

    def finalize(self, reconstruct: Callable) -> tuple:
        """reconstruct(t, payload) -> (raw_state, raw_coeffs or None).

        raw_state is in the working frame: true state = raw * exp(phase+scale).
        """
        m = len(self.rows)
        times = np.empty(m)
        states = np.empty((m, 2), dtype=complex)
        coeffs = np.empty((m, 2), dtype=complex)
        norms = np.empty(m)
        logs = np.empty(m)
        have_coeffs = False
        for k, (t, payload, log_internal) in enumerate(self.rows):
            raw_state, raw_coeffs = reconstruct(t, payload)
            phase = -_trace_phase(self._params, self._drive, t)
            log_total = -2.0 * self._gbar * t + log_internal
            raw_n2 = abs(raw_state[0]) ** 2 + abs(raw_state[1]) ** 2
            log_true = math.log(raw_n2) + log_total if raw_n2 > 0 else -math.inf
            if not (_LOG_RECORD_LO < log_true - self._offset < _LOG_RECORD_HI):
                # renormalize the stored state, push the factor into log_scale
                self._offset = log_true
            factor = cmath.exp(1j * phase) * math.exp(0.5 * (log_total - self._offset))
            states[k] = (raw_state[0] * factor, raw_state[1] * factor)
            if raw_coeffs is not None:
                have_coeffs = True
                coeffs[k] = (raw_coeffs[0] * factor, raw_coeffs[1] * factor)
            times[k] = t
            norms[k] = abs(states[k, 0]) ** 2 + abs(states[k, 1]) ** 2
            logs[k] = self._offset
        return times, states, norms, logs, (coeffs if have_coeffs else None)


# ---------------------------------------------------------------------------
# direct propagation (bare basis, DOP853)
# ---------------------------------------------------------------------------


def propagate_direct(
    params: SystemParams,
    drive: Drive,
    initial,
    config: IntegratorConfig = IntegratorConfig(),
    n_output: int = 512,
    record_internal: bool = False,
) -> TrajectoryRecord:
    """Integrate i dc/dt = H(t) c along the drive in the bare basis.

    Records at ``n_output + 1`` uniformly spaced times (>= 512 by default);
    ``record_internal`` additionally keeps every accepted solver step.

    Raises
    ------
    StepSizeUnderflowError
        If the adaptive controller cannot meet the tolerances.
    NonFiniteError
        If amplitudes leave the representable range despite rescaling.
    """
    initial = StateVector.coerce(initial)
    if n_output < 2:
        raise ValueError("n_output must be >= 2")
    T = drive.duration_T
    d12 = complex(params.d12)
    de = params.e1 - params.e2
    dg = params.delta_gamma

    def rhs(t: float, u: np.ndarray) -> np.ndarray:
        fp = _clamped_field(drive, t)
        half_dh = 0.5 * complex(de + fp.omega, dg)
        g = 0.5 * fp.eps0 * d12
        return -1j * np.array(
            [half_dh * u[0] + g * u[1], g * u[0] - half_dh * u[1]], dtype=complex
        )

    grid = np.linspace(0.0, T, n_output + 1)
    rec = _Recorder(params, drive)
    u = initial.as_array()
    log_u = 0.0
    rec.add(0.0, (u.copy(),), log_u)
    t_now = 0.0
    gi = 1
    while t_now < T:
        first = min(config.initial_step, config.max_step, 0.5 * (T - t_now))
        solver = DOP853(
            rhs,
            t_now,
            u,
            t_bound=T,
            rtol=config.rel_tol,
            atol=config.abs_tol,
            max_step=config.max_step,
            first_step=first,
        )
        restart = False
        while solver.status == "running":
            message = solver.step()
            if solver.status == "failed":
                raise StepSizeUnderflowError(str(message))
            if not np.all(np.isfinite(solver.y.view(float))):
                raise NonFiniteError("amplitudes became non-finite during integration")
            dense = solver.dense_output()
            while gi <= n_output and grid[gi] <= solver.t:
                rec.add(grid[gi], (np.asarray(dense(grid[gi]), dtype=complex),), log_u)
                gi += 1
            if record_internal and solver.t < T:
                rec.add(solver.t, (solver.y.copy(),), log_u)
            n2 = float(abs(solver.y[0]) ** 2 + abs(solver.y[1]) ** 2)
            if n2 > 0 and not (_LOG_WORK_LO < math.log(n2) < _LOG_WORK_HI):
                u = solver.y / math.sqrt(n2)
                log_u += math.log(n2)
                t_now = solver.t
                restart = True
                break
        if not restart:
            u = solver.y
            t_now = solver.t

    def reconstruct(t: float, payload):
        return payload[0], None

    times, states, norms, logs, _ = rec.finalize(reconstruct)
    meta = {
        "method": "direct",
        "params": params,
        "drive": drive,
        "config": config,
        "n_output": n_output,
    }
    return TrajectoryRecord(times, states, norms, logs, None, None, meta)


# ---------------------------------------------------------------------------
# embedded Dormand-Prince 5(4) with PI step control (adiabatic route)
# ---------------------------------------------------------------------------

_DP_C = (0.2, 0.3, 0.8, 8.0 / 9.0, 1.0)
_DP_A = (
    (0.2,),
    (3.0 / 40.0, 9.0 / 40.0),
    (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
    (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
    (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0),
)
_DP_B5 = (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0)
_DP_B4 = (
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
)
_DP_E = tuple(b5 - b4 for b5, b4 in zip(_DP_B5, _DP_B4))


class _Dopri5:
    """Minimal embedded RK5(4) stepper with a PI controller.

    Kept independent of scipy's solvers on purpose: the adiabatic route must
    not share integration machinery with the direct route it is checked
    against.
    """

    _SAFETY = 0.9
    _MIN_FACTOR = 0.2
    _MAX_FACTOR = 5.0
    _ALPHA = 0.7 / 5.0
    _BETA = 0.4 / 5.0

    def __init__(self, rhs, config: IntegratorConfig, t_scale: float) -> None:
        self.rhs = rhs
        self.rtol = config.rel_tol
        self.atol = config.abs_tol
        self.max_step = config.max_step
        self.h = min(config.initial_step, config.max_step)
        self.err_prev = 1.0
        self.min_step = 1e-14 * t_scale

    def advance(self, t0: float, y0: np.ndarray, t1: float, on_accept=None) -> np.ndarray:
        """Integrate from t0 to exactly t1 (t1 > t0)."""
        t, y = t0, y0
        k1 = self.rhs(t, y)
        while t < t1:
            h = min(self.h, self.max_step, t1 - t)
            rejected = 0
            while True:
                if h < self.min_step:
                    raise StepSizeUnderflowError(
                        f"step size {h:.3e} below floor {self.min_step:.3e} at t = {t:.6g}"
                    )
                ks = [k1]
                for ci, ai in zip(_DP_C, _DP_A):
                    ys = y + h * sum(a * k for a, k in zip(ai, ks))
                    ks.append(self.rhs(t + ci * h, ys))
                y5 = y + h * sum(b * k for b, k in zip(_DP_B5, ks) if b != 0.0)
                k7 = self.rhs(t + h, y5)
                ks.append(k7)
                err_vec = h * sum(e * k for e, k in zip(_DP_E, ks) if e != 0.0)
                scale = self.atol + self.rtol * np.maximum(np.abs(y), np.abs(y5))
                err = math.sqrt(float(np.mean(np.abs(err_vec / scale) ** 2)))
                if not math.isfinite(err):
                    raise NonFiniteError("non-finite error estimate; amplitudes overflowed")
                if err <= 1.0:
                    break
                rejected += 1
                h *= max(self._MIN_FACTOR, self._SAFETY * err ** (-0.2))
            # PI update from the accepted error
            err = max(err, 1e-10)
            factor = self._SAFETY * err ** (-self._ALPHA) * self.err_prev**self._BETA
            factor = min(self._MAX_FACTOR if rejected == 0 else 1.0, max(self._MIN_FACTOR, factor))
            self.h = h * factor
            self.err_prev = err
            t, y, k1 = t + h, y5, k7
            if on_accept is not None:
                on_accept(t, y)
        return y


# ---------------------------------------------------------------------------
# eigenframe continuity machinery
# ---------------------------------------------------------------------------


def _aligned_next(ref_vs, h: HamiltonianMatrix, ep_tol: float, ambiguity: float = 0.9):
    """Eigen-solve h and align branches/signs to the reference vector pair.

    Returns ((e0, e1), (v0, v1), (lab0, lab1)) where slot i continues
    ref_vs[i]. Labels are the instantaneous '+'/'-' identity of each slot.
    """
    e_p, e_m, v_p, v_m, _, _ = _eigensystem(h, ep_tol)
    inst = ((e_p, v_p, "+"), (e_m, v_m, "-"))
    out_e = [None, None]
    out_v = [None, None]
    out_l = [None, None]
    taken = [False, False]
    for slot in (0, 1):
        ov = [c_product(ref_vs[slot], cand[1]) for cand in inst]
        mags = [abs(o) for o in ov]
        best = 0 if mags[0] >= mags[1] else 1
        if mags[1 - best] > ambiguity * mags[best]:
            raise AmbiguousTrackingError(
                f"branch overlaps too close to call: {mags[best]:.3f} vs {mags[1 - best]:.3f}"
            )
        if taken[best]:
            raise AmbiguousTrackingError("both tracked slots matched the same branch")
        taken[best] = True
        e_b, v_b, lab = inst[best]
        sign = 1.0 if ov[best].real >= 0.0 else -1.0
        out_e[slot] = e_b
        out_v[slot] = (sign * v_b[0], sign * v_b[1])
        out_l[slot] = lab
    return tuple(out_e), tuple(out_v), tuple(out_l)


class _FrameTracker:
    """Continuity-tracked eigenframe along a drive, for the adiabatic RHS.

    The reference frame advances only on accepted steps, so rejected trials
    and internal RK stages all match against the same anchor.
    """

    def __init__(self, params: SystemParams, drive: Drive, ep_tol: float) -> None:
        self.params = params
        self.drive = drive
        self.ep_tol = ep_tol
        h0 = build_hamiltonian(params, drive.field_at(0.0))
        e_p, e_m, v_p, v_m, _, _ = _eigensystem(h0, ep_tol)
        self.ref_vs = (v_p, v_m)
        self.labels = ("+", "-")

    def frame_at(self, t: float):
        h = build_hamiltonian(self.params, _clamped_field(self.drive, t))
        return _aligned_next(self.ref_vs, h, self.ep_tol)

    def commit(self, t: float, _y=None) -> None:
        _, vs, labels = self.frame_at(t)
        self.ref_vs = vs
        self.labels = labels


def _fd_step(fp: FieldPoint) -> float:
    return _FD_REL_STEP * max(abs(fp.omega), abs(fp.eps0), 1.0)


def _derivative_frames(params: SystemParams, fp: FieldPoint, velocity, ep_tol: float):
    """Frames at fp -/+ h*u_hat along the velocity direction, plus the dt span."""
    speed = math.hypot(velocity[0], velocity[1])
    if speed == 0.0:
        return None
    h = _fd_step(fp)
    ux, uy = velocity[0] / speed, velocity[1] / speed
    f_a = FieldPoint(fp.omega - h * ux, max(fp.eps0 - h * uy, 0.0))
    f_b = FieldPoint(fp.omega + h * ux, fp.eps0 + h * uy)
    dt = (2.0 * h) / speed
    return f_a, f_b, dt


def _coupling_from_pairs(vs_a, vs_b, dt: float) -> tuple[complex, complex]:
    """V_{0/1} and V_{1/0} from two branch/sign-aligned vector pairs."""
    mid0 = (0.5 * (vs_a[0][0] + vs_b[0][0]), 0.5 * (vs_a[0][1] + vs_b[0][1]))
    mid1 = (0.5 * (vs_a[1][0] + vs_b[1][0]), 0.5 * (vs_a[1][1] + vs_b[1][1]))
    dv0 = ((vs_b[0][0] - vs_a[0][0]) / dt, (vs_b[0][1] - vs_a[0][1]) / dt)
    dv1 = ((vs_b[1][0] - vs_a[1][0]) / dt, (vs_b[1][1] - vs_a[1][1]) / dt)
    return c_product(mid0, dv1), c_product(mid1, dv0)


def na_coupling(
    frame_a: EigenFrame,
    frame_b: EigenFrame,
    dt: float,
    velocity: tuple[float, float],
) -> tuple[complex, complex]:
    """Non-adiabatic couplings (V_{+/-}, V_{-/+}) from two nearby frames.

    ``frame_a`` and ``frame_b`` must be eigenframes at parameter points
    placed symmetrically around the evaluation point along the velocity
    direction, separated by ``velocity * dt``; the central difference
    (v_b - v_a)/dt is then the velocity-weighted parameter derivative of
    each eigenvector, and the couplings are its c-products with the opposite
    branch. Zero velocity returns (0, 0) exactly.

    The gauge convention fixes signs only piecewise, so frame_b is re-aligned
    (branch pairing and sign) to frame_a before differencing; too-ambiguous
    overlaps raise EPProximityError because that is the divergent-derivative
    signature near the EP.
    """
    if velocity[0] == 0.0 and velocity[1] == 0.0:
        return 0j, 0j
    if dt <= 0:
        raise ValueError("dt must be > 0")
    ref = (tuple(frame_a.v_plus), tuple(frame_a.v_minus))
    cand = ((frame_b.e_plus, tuple(frame_b.v_plus), "+"), (frame_b.e_minus, tuple(frame_b.v_minus), "-"))
    vs_b = [None, None]
    taken = [False, False]
    for slot in (0, 1):
        ov = [c_product(ref[slot], c[1]) for c in cand]
        mags = [abs(o) for o in ov]
        best = 0 if mags[0] >= mags[1] else 1
        if mags[1 - best] > 0.9 * mags[best] or taken[best]:
            raise EPProximityError("frames too close to the EP to pair branches")
        taken[best] = True
        sign = 1.0 if ov[best].real >= 0.0 else -1.0
        vb = cand[best][1]
        vs_b[slot] = (sign * vb[0], sign * vb[1])
    return _coupling_from_pairs(ref, tuple(vs_b), dt)


def na_coupling_at(
    params: SystemParams,
    loop: LoopSpec,
    t: float,
    ep_tol: float = 1e-8,
) -> tuple[complex, complex]:
    """Couplings at time t on a loop, with the standard derivative step."""
    fp = loop.field_at(t)
    velocity = loop.velocity_at(t)
    placed = _derivative_frames(params, fp, velocity, ep_tol)
    if placed is None:
        return 0j, 0j
    f_a, f_b, dt = placed
    # anchor branch pairing and signs on the frame at fp itself
    _, _, v_p, v_m, _, _ = _eigensystem(build_hamiltonian(params, fp), ep_tol)
    ref_v = (v_p, v_m)
    _, vs_a, _ = _aligned_next(ref_v, build_hamiltonian(params, f_a), ep_tol)
    _, vs_b, _ = _aligned_next(ref_v, build_hamiltonian(params, f_b), ep_tol)
    return _coupling_from_pairs(vs_a, vs_b, dt)


# ---------------------------------------------------------------------------
# adiabatic-frame propagation
# ---------------------------------------------------------------------------


def _scan_contour(params: SystemParams, drive: Drive, ep_tol: float, n: int = 1024) -> None:
    guard = ep_tol * ep_tol
    for k in range(n + 1):
        fp = drive.field_at(drive.duration_T * k / n)
        if abs(discriminant(build_hamiltonian(params, fp))) <= guard:
            raise EPOnContourError(
                f"contour reaches |discriminant| <= {guard:.1e} near t = {drive.duration_T * k / n:.6g}"
            )


def propagate_adiabatic(
    params: SystemParams,
    loop: Drive,
    initial,
    config: IntegratorConfig = IntegratorConfig(),
    n_output: int = 512,
    ep_tol: float = 1e-8,
    record_internal: bool = False,
) -> TrajectoryRecord:
    """Integrate in the instantaneous eigenbasis with explicit couplings.

    The state is expanded on the continuity-tracked eigenvectors; the
    coefficient equations carry the branch energies on the diagonal and the
    velocity-weighted derivative couplings off it (the couplings' relative
    exponential weight exp(+/- Im int dE dt) is what breaks the slow-drive
    limit for decaying systems). Bare-basis amplitudes are reconstructed at
    the output times.

    Raises EPOnContourError if the contour comes within the eigenframe guard
    of the EP.
    """
    initial = StateVector.coerce(initial)
    if n_output < 2:
        raise ValueError("n_output must be >= 2")
    _scan_contour(params, loop, ep_tol, n=max(1024, 2 * n_output))
    T = loop.duration_T
    d12 = complex(params.d12)
    de = params.e1 - params.e2
    dg = params.delta_gamma
    tracker = _FrameTracker(params, loop, ep_tol)

    def traceless_energies(t: float, labels) -> tuple[complex, complex]:
        fp = _clamped_field(loop, t)
        half_dh = 0.5 * complex(de + fp.omega, dg)
        g = 0.5 * fp.eps0 * d12
        w = _root_plus(4.0 * (half_dh * half_dh + g * g))  # = root of discriminant
        e0 = 0.5 * w if labels[0] == "+" else -0.5 * w
        return e0, -e0

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        _, vs, labels = tracker.frame_at(t)
        e0, e1 = traceless_energies(t, labels)
        fp = _clamped_field(loop, t)
        velocity = loop.velocity_at(min(max(t, 0.0), T))
        placed = _derivative_frames(params, fp, velocity, ep_tol)
        if placed is None:
            v01 = v10 = 0j
        else:
            f_a, f_b, dt = placed
            _, vs_a, _ = _aligned_next(vs, build_hamiltonian(params, f_a), ep_tol)
            _, vs_b, _ = _aligned_next(vs, build_hamiltonian(params, f_b), ep_tol)
            v01, v10 = _coupling_from_pairs(vs_a, vs_b, dt)
        return np.array(
            [
                -1j * e0 * y[0] - v01 * y[1],
                -1j * e1 * y[1] - v10 * y[0],
            ],
            dtype=complex,
        )

    # initial coefficients on the t = 0 frame (slot 0 = instantaneous '+')
    c0 = initial.as_array()
    vs0 = tracker.ref_vs
    b = np.array([c_product(vs0[0], c0), c_product(vs0[1], c0)], dtype=complex)
    log_b = 0.0
    rec = _Recorder(params, loop)
    rec.add(0.0, (b.copy(), vs0, tracker.labels), log_b)

    stepper = _Dopri5(rhs, config, t_scale=T)
    stepper.max_step = min(stepper.max_step, T / 64.0)
    grid = np.linspace(0.0, T, n_output + 1)
    pending: list[tuple[float, np.ndarray]] = []

    def on_accept(t: float, y: np.ndarray) -> None:
        tracker.commit(t)
        if record_internal:
            pending.append((t, y.copy()))

    for gi in range(1, n_output + 1):
        pending.clear()
        try:
            b = stepper.advance(grid[gi - 1], b, grid[gi], on_accept=on_accept)
        except EPProximityError as exc:
            raise EPOnContourError(str(exc)) from exc
        if record_internal:
            for t_in, y_in in pending:
                if t_in < grid[gi]:
                    _, vs_in, labels_in = tracker.frame_at(t_in)
                    rec.add(t_in, (y_in, vs_in, labels_in), log_b)
        n2 = float(abs(b[0]) ** 2 + abs(b[1]) ** 2)
        if n2 > 0 and not (_LOG_WORK_LO < math.log(n2) < _LOG_WORK_HI):
            b = b / math.sqrt(n2)
            log_b += math.log(n2)
        _, vs_g, labels_g = tracker.frame_at(grid[gi])
        rec.add(grid[gi], (b.copy(), vs_g, labels_g), log_b)

    labels_out = []

    def reconstruct(t: float, payload):
        bb, vs, labels = payload
        labels_out.append(labels[0])
        state = (
            bb[0] * vs[0][0] + bb[1] * vs[1][0],
            bb[0] * vs[0][1] + bb[1] * vs[1][1],
        )
        return state, (bb[0], bb[1])

    times, states, norms, logs, coeffs = rec.finalize(reconstruct)
    meta = {
        "method": "adiabatic",
        "params": params,
        "drive": loop,
        "config": config,
        "n_output": n_output,
        "ep_tol": ep_tol,
    }
    return TrajectoryRecord(
        times, states, norms, logs, coeffs, np.array(labels_out), meta
    )


# ---------------------------------------------------------------------------
# branch tracking and loop integrals
# ---------------------------------------------------------------------------


def track_branches(
    params: SystemParams,
    loop: LoopSpec,
    n_samples: int = 2048,
    ep_tol: float = 1e-8,
) -> AdiabaticFrame:
    """Continuity-tracked eigenframes at uniform samples over one traversal.

    Slot assignments follow maximal |c-product| overlap between adjacent
    samples; the ``swapped`` property reports whether one traversal exchanged
    the instantaneous branches (the EP-encircling signature).

    Raises
    ------
    AmbiguousTrackingError
        If adjacent overlaps are within 10% of each other (undersampled).
    EPOnContourError
        If any sample falls inside the eigenframe's EP guard.
    """
    if n_samples < 16:
        raise ValueError("n_samples must be >= 16")
    times = np.linspace(0.0, loop.duration_T, n_samples + 1)
    energies = np.empty((n_samples + 1, 2), dtype=complex)
    vectors = np.empty((n_samples + 1, 2, 2), dtype=complex)
    labels = np.empty((n_samples + 1, 2), dtype="<U1")
    try:
        h0 = build_hamiltonian(params, loop.field_at(0.0))
        e_p, e_m, v_p, v_m, _, _ = _eigensystem(h0, ep_tol)
        energies[0] = (e_p, e_m)
        vectors[0, 0] = v_p
        vectors[0, 1] = v_m
        labels[0] = ("+", "-")
        ref = (v_p, v_m)
        for k in range(1, n_samples + 1):
            h = build_hamiltonian(params, loop.field_at(float(times[k])))
            es, vs, labs = _aligned_next(ref, h, ep_tol)
            energies[k] = es
            vectors[k, 0] = vs[0]
            vectors[k, 1] = vs[1]
            labels[k] = labs
            ref = vs
    except EPProximityError as exc:
        raise EPOnContourError(str(exc)) from exc
    return AdiabaticFrame(times=times, energies=energies, vectors=vectors, labels=labels)


def _tracked_energy_gap(
    params: SystemParams, loop: LoopSpec, t_final: float, n_samples: int, ep_tol: float
) -> tuple[np.ndarray, np.ndarray]:
    """Tracked E_slot0 - E_slot1 on a uniform grid of [0, t_final]."""
    times = np.linspace(0.0, t_final, n_samples + 1)
    gap = np.empty(n_samples + 1, dtype=complex)
    try:
        h0 = build_hamiltonian(params, loop.field_at(0.0))
        e_p, e_m, v_p, v_m, _, _ = _eigensystem(h0, ep_tol)
        gap[0] = e_p - e_m
        ref = (v_p, v_m)
        for k in range(1, n_samples + 1):
            h = build_hamiltonian(params, loop.field_at(float(times[k])))
            es, vs, _ = _aligned_next(ref, h, ep_tol)
            gap[k] = es[0] - es[1]
            ref = vs
    except EPProximityError as exc:
        raise EPOnContourError(str(exc)) from exc
    return times, gap


def accumulated_phase(
    params: SystemParams,
    loop: LoopSpec,
    t: float,
    branch_pairing: str = "plus-minus",
    n_samples: int = 2048,
) -> complex:
    """Quadrature of the tracked branch-energy difference, int_0^t dE dt'.

    ``branch_pairing`` selects the orientation: "plus-minus" integrates
    E_a - E_b for the branches that start as '+' and '-'; "minus-plus"
    negates. The imaginary part is minus the accumulated width difference;
    over a full EP-encircling traversal it changes sign with the loop
    direction.
    """
    if branch_pairing not in ("plus-minus", "minus-plus"):
        raise ValueError("branch_pairing must be 'plus-minus' or 'minus-plus'")
    if not 0.0 <= t <= loop.duration_T:
        raise ValueError(f"t = {t} outside [0, {loop.duration_T}]")
    if t == 0.0:
        return 0j
    times, gap = _tracked_energy_gap(params, loop, t, n_samples, ep_tol=1e-8)
    result = complex(simpson(gap, x=times))
    return -result if branch_pairing == "minus-plus" else result


def average_decay_rate(
    params: SystemParams,
    loop: LoopSpec,
    branch: str = "plus",
    n_samples: int = 2048,
) -> float:
    """Loop-averaged decay rate of one tracked adiabatic branch.

    The decay rate convention is gamma = -Im E (so the bare widths are
    gamma1, gamma2 at zero drive). When the loop encircles the EP the
    tracked branches exchange, so each branch closes only after two
    traversals and its average covers both instantaneous sheets; both
    branches then share the same average, (gamma1 + gamma2)/2 in this model.
    Without the exchange each branch averages over its own single-traversal
    path.
    """
    if branch not in ("plus", "minus"):
        raise ValueError("branch must be 'plus' or 'minus'")
    frame = track_branches(params, loop, n_samples=n_samples)
    rates = -frame.energies.imag  # (m, 2)
    t = frame.times
    if frame.swapped:
        # closed circuit = two traversals covering both slots
        total = simpson(rates[:, 0], x=t) + simpson(rates[:, 1], x=t)
        return float(total / (2.0 * loop.duration_T))
    slot = 0 if branch == "plus" else 1
    return float(simpson(rates[:, slot], x=t) / loop.duration_T)
