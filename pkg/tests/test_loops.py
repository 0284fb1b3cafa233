"""Contour parameterization, winding number, and EP proximity."""

import math

import numpy as np
import pytest

from epdyn import (
    DEFAULT_PARAMS,
    Direction,
    EPOnContourError,
    FieldPoint,
    LoopSpec,
    StaticDrive,
    UndersampledError,
    contains_ep,
    field_at,
    field_velocity,
    locate_ep,
    rho,
    winding_number,
)

REF = DEFAULT_PARAMS


def make_loop(cw=1.0, ec=0.2, a=0.05, b=0.05, direction=Direction.CCW, T=10.0, sp=0.0):
    return LoopSpec(
        center=FieldPoint(cw, ec),
        semi_axis_omega=a,
        semi_axis_eps=b,
        direction=direction,
        duration_T=T,
        start_phase=sp,
    )


def random_loop(rng, direction=None):
    ec = rng.uniform(0.05, 0.6)
    return make_loop(
        cw=rng.uniform(0.7, 1.3),
        ec=ec,
        a=rng.uniform(0.01, 0.3),
        b=rng.uniform(0.01, 1.0) * ec,
        direction=direction or rng.choice([Direction.CW, Direction.CCW]),
        T=rng.uniform(1.0, 100.0),
        sp=rng.uniform(0.0, 2 * math.pi),
    )


class TestLoopSpec:
    def test_amplitude_must_stay_physical(self):
        with pytest.raises(ValueError):
            make_loop(ec=0.1, b=0.2)

    @pytest.mark.parametrize("kwargs", [dict(a=0.0), dict(b=0.0), dict(T=0.0), dict(T=-1.0)])
    def test_rejects_degenerate_geometry(self, kwargs):
        base = dict(cw=1.0, ec=0.5, a=0.05, b=0.05, T=10.0)
        base.update({{"a": "a", "b": "b", "T": "T"}.get(k, k): v for k, v in kwargs.items()})
        with pytest.raises(ValueError):
            make_loop(**base)

    def test_reversed(self):
        loop = make_loop(direction=Direction.CCW)
        assert loop.reversed().direction is Direction.CW
        assert loop.reversed().center == loop.center


class TestFieldAt:
    def test_start_point_ccw(self):
        loop = make_loop()
        f = field_at(loop, 0.0)
        assert f.omega == pytest.approx(1.05)
        assert f.eps0 == pytest.approx(0.2)

    def test_exact_closure(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            loop = random_loop(rng)
            f0 = field_at(loop, 0.0)
            fT = field_at(loop, loop.duration_T)
            assert f0.omega == fT.omega and f0.eps0 == fT.eps0

    def test_cw_quarter_equals_ccw_three_quarters(self):
        T = 8.0
        cw = make_loop(direction=Direction.CW, T=T, sp=0.3)
        ccw = make_loop(direction=Direction.CCW, T=T, sp=0.3)
        f1 = field_at(cw, T / 4)
        f2 = field_at(ccw, 3 * T / 4)
        assert f1.omega == pytest.approx(f2.omega, abs=1e-12)
        assert f1.eps0 == pytest.approx(f2.eps0, abs=1e-12)

    def test_rejects_out_of_range_time(self):
        loop = make_loop(T=5.0)
        with pytest.raises(ValueError):
            field_at(loop, -0.1)
        with pytest.raises(ValueError):
            field_at(loop, 5.1)


class TestFieldVelocity:
    def test_initial_velocity_ccw(self):
        loop = make_loop(T=10.0)
        vx, vy = field_velocity(loop, 0.0)
        assert vx == pytest.approx(0.0, abs=1e-15)
        assert vy == pytest.approx(2 * math.pi * 0.05 / 10.0)

    def test_doubling_duration_halves_speed(self):
        l1 = make_loop(T=10.0)
        l2 = make_loop(T=20.0)
        v1 = field_velocity(l1, 2.5)  # same contour angle as t = 5 on l2
        v2 = field_velocity(l2, 5.0)
        assert v1[0] == pytest.approx(2 * v2[0], abs=1e-15)
        assert v1[1] == pytest.approx(2 * v2[1], abs=1e-15)

    def test_direction_reversal_negates_velocity(self):
        T = 10.0
        cw = make_loop(direction=Direction.CW, T=T, sp=0.7)
        ccw = make_loop(direction=Direction.CCW, T=T, sp=0.7)
        # same contour point at matched angle, opposite traversal
        v_cw = field_velocity(cw, T / 4)
        v_ccw = field_velocity(ccw, 3 * T / 4)
        assert v_cw[0] == pytest.approx(-v_ccw[0], abs=1e-12)
        assert v_cw[1] == pytest.approx(-v_ccw[1], abs=1e-12)

    def test_finite_difference_agreement(self):
        loop = make_loop(T=13.0, sp=0.4)
        t, h = 3.7, 1e-6
        fa, fb = field_at(loop, t - h), field_at(loop, t + h)
        vx, vy = field_velocity(loop, t)
        assert vx == pytest.approx((fb.omega - fa.omega) / (2 * h), abs=1e-8)
        assert vy == pytest.approx((fb.eps0 - fa.eps0) / (2 * h), abs=1e-8)


class TestStaticDrive:
    def test_constant_field(self):
        drive = StaticDrive(FieldPoint(1.0, 0.3), 5.0)
        f = drive.field_at(2.0)
        assert f.omega == 1.0 and f.eps0 == 0.3
        assert drive.velocity_at(2.0) == (0.0, 0.0)

    def test_omega_integral_linear(self):
        drive = StaticDrive(FieldPoint(1.5, 0.0), 5.0)
        assert drive.omega_integral(4.0) == pytest.approx(6.0)


class TestOmegaIntegral:
    def test_matches_quadrature(self):
        # the closed form feeds the analytic trace-phase removal, so it gets
        # an independent quadrature check
        from scipy.integrate import quad

        rng = np.random.default_rng(101)
        for _ in range(10):
            loop = random_loop(rng)
            t_end = rng.uniform(0.1, loop.duration_T)
            numeric, err = quad(lambda t: field_at(loop, t).omega, 0.0, t_end, limit=200)
            assert loop.omega_integral(t_end) == pytest.approx(numeric, abs=max(1e-9, 10 * err))


class TestWindingNumber:
    def test_encircling_ccw_is_minus_one(self):
        # documented sign: the discriminant circles the origin opposite to
        # the parameter-space orientation in this model
        loop = make_loop(direction=Direction.CCW)
        assert winding_number(loop, REF, n_samples=1024) == -1

    def test_encircling_cw_is_plus_one(self):
        loop = make_loop(direction=Direction.CW)
        assert winding_number(loop, REF, n_samples=1024) == 1

    def test_non_encircling_is_zero(self):
        loop = make_loop(ec=0.5)
        assert winding_number(loop, REF, n_samples=1024) == 0

    def test_reversal_negates(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            loop = random_loop(rng, direction=Direction.CCW)
            try:
                w = winding_number(loop, REF, n_samples=2048)
            except EPOnContourError:
                continue
            assert winding_number(loop.reversed(), REF, n_samples=2048) == -w

    def test_result_stable_in_sample_count(self):
        loop = make_loop(direction=Direction.CCW)
        w1 = winding_number(loop, REF, n_samples=256)
        w2 = winding_number(loop, REF, n_samples=1024)
        w3 = winding_number(loop, REF, n_samples=8192)
        assert w1 == w2 == w3 == -1

    def test_ep_on_contour_detected(self):
        # bottom of this ellipse passes exactly through the EP (1, 0.2)
        loop = make_loop(ec=0.25, a=0.05, b=0.05, sp=0.0)
        with pytest.raises(EPOnContourError):
            winding_number(loop, REF, n_samples=1024)

    def test_undersampling_detected(self):
        # flat loop grazing the EP: the argument swing concentrates between
        # adjacent samples at n = 64
        loop = make_loop(ec=0.2499, a=0.3, b=0.05)
        with pytest.raises(UndersampledError):
            winding_number(loop, REF, n_samples=64)

    def test_rejects_tiny_sample_count(self):
        with pytest.raises(ValueError):
            winding_number(make_loop(), REF, n_samples=32)


class TestRho:
    def test_ep_at_center(self):
        ep = locate_ep(REF)
        loop = make_loop(a=0.08, b=0.05)
        assert rho(loop, ep) == pytest.approx(0.05)

    def test_ep_on_contour(self):
        ep = locate_ep(REF)
        loop = make_loop(ec=0.25, a=0.05, b=0.05)
        assert rho(loop, ep) == pytest.approx(0.0, abs=1e-15)

    def test_ep_far_outside(self):
        ep = locate_ep(REF)
        loop = make_loop(cw=1.15, a=0.05, b=0.05)
        assert rho(loop, ep) == pytest.approx(-0.1)


class TestContainsEP:
    def test_centered_loop(self):
        assert contains_ep(make_loop(), REF) is True

    def test_distant_loop(self):
        assert contains_ep(make_loop(ec=0.5), REF) is False

    def test_agreement_with_winding_on_random_loops(self):
        rng = np.random.default_rng(77)
        ep = locate_ep(REF)
        checked = 0
        while checked < 100:
            loop = random_loop(rng)
            r = rho(loop, ep)
            if abs(r) <= 0.01 * min(loop.semi_axis_omega, loop.semi_axis_eps):
                continue
            try:
                w = winding_number(loop, REF, n_samples=4096)
            except (EPOnContourError, UndersampledError):
                continue
            checked += 1
            assert (abs(w) == 1) == contains_ep(loop, REF)
