import math

import numpy as np
import pytest

from tethersim.control import (
    DLS_DEFAULT,
    ControllerB,
    DlsConfig,
    PolePlacement,
    decoupling_b,
    dls_inverse,
    gamma_a_dynamic,
    gamma_a_static,
    gamma_b,
    outer_loop,
    output_jets_a_prime,
    output_jets_b,
)
from tethersim.model import ExtendedState, Input, State, VehicleParams, link_force, state_derivative
from tethersim.sim import rk4_step

P = VehicleParams()


class TestPolePlacement:
    def test_second_order_gains(self):
        pp = PolePlacement((-1.0, -1.5))
        assert pp.gains == pytest.approx((1.5, 2.5))

    def test_fourth_order_gains_match_polynomial_oracle(self):
        poles = (-1.0, -1.5, -2.0, -2.5)
        coeffs = np.poly(poles)  # oracle: descending coefficients, leading 1
        expected = tuple(coeffs[1:][::-1])
        assert PolePlacement(poles).gains == pytest.approx(expected)
        assert PolePlacement(poles).gains == pytest.approx((7.5, 19.25, 17.75, 7.0))

    def test_unstable_poles_rejected(self):
        with pytest.raises(ValueError):
            PolePlacement((-1.0, 0.5))


class TestOuterLoop:
    def test_zero_error_passes_feedforward(self):
        pp = PolePlacement((-1.0, -2.0))
        assert outer_loop((0.3, 0.1, 0.7), (0.3, 0.1), pp) == pytest.approx(0.7)
        assert outer_loop((0.3, 0.1, 0.0), (0.3, 0.1), pp) == 0.0

    def test_error_feedback(self):
        pp = PolePlacement((-1.0, -1.5))  # gains (1.5, 2.5)
        v = outer_loop((1.0, 0.0, 0.0), (0.0, 0.0), pp)
        assert v == pytest.approx(1.5)

    def test_jet_length_mismatch(self):
        pp = PolePlacement((-1.0, -1.5))
        with pytest.raises(ValueError):
            outer_loop((1.0, 0.0), (0.0, 0.0), pp)


class TestDlsInverse:
    def test_identity_no_damping(self):
        np.testing.assert_allclose(dls_inverse(np.eye(2), 0.0), np.eye(2), atol=1e-14)

    def test_identity_unit_damping(self):
        np.testing.assert_allclose(dls_inverse(np.eye(2), 1.0), 0.5 * np.eye(2), atol=1e-14)

    def test_singular_matrix_bounded(self):
        e = np.array([[1.0, 0.0], [0.0, 0.0]])  # rank 1
        c = 0.1
        star = dls_inverse(e, c)
        assert np.all(np.isfinite(star))
        svals = np.linalg.svd(star, compute_uv=False)
        assert svals.max() <= 1.0 / (2 * c) + 1e-12


class TestGammaAStatic:
    def test_hover_command(self):
        u = gamma_a_static(P, State(math.pi / 4, 0, 0, 0), (0.0, 0.0))
        assert u.f == pytest.approx(P.m_r * P.g)
        assert u.tau == pytest.approx(0.0)

    def test_decoupled_torque_row(self):
        u = gamma_a_static(P, State(0.3, 0.1, -0.2, 0.4), (0.0, 2.0))
        assert u.tau == pytest.approx(P.j_r * 2.0)

    def test_bounded_at_singularity(self):
        x = State(math.pi / 2 - 1e-9, 0, 0, 0)
        dls = DlsConfig(damping=0.01)
        u = gamma_a_static(P, x, (0.0, 0.0), dls)
        b1 = P.a1 * math.cos(x.phi)
        rhs = math.hypot(-b1, 0.0)
        assert math.hypot(u.f, u.tau) <= rhs / (2 * dls.damping) + 1e-9


class TestGammaADynamic:
    def test_drift_vanishes_at_rest(self):
        x = State(0.4, 0.0, 0.2, 0.0)
        v = (1.0, 2.0)
        du1, tau = gamma_a_dynamic(P, x, 5.0, v)
        cz = math.cos(x.phi + x.theta)
        assert du1 == pytest.approx(v[0] / (P.a2 * cz))
        assert tau == pytest.approx(v[1] / P.a3)

    def test_zero_command_at_rest(self):
        du1, tau = gamma_a_dynamic(P, State(0.4, 0.0, 0.2, 0.0), 5.0, (0.0, 0.0))
        assert du1 == pytest.approx(0.0)
        assert tau == pytest.approx(0.0)


class TestGammaB:
    def test_decoupling_determinant(self):
        xs = ExtendedState(State(0.3, 0, 0.0, 0), 2.0, 0.0)
        e11, e12, e21, e22 = decoupling_b(P, xs)
        det = e11 * e22 - e12 * e21
        assert det == pytest.approx(P.a2 * P.a3 * 2.0, abs=1e-12)

    def test_zero_thrust_takes_damped_path(self):
        xs = ExtendedState(State(0.3, 0.1, -0.1, 0.2), 0.0, 0.0)
        du, tau = gamma_b(P, xs, (1.0, 1.0))
        assert math.isfinite(du) and math.isfinite(tau)

    def test_command_inverts_decoupling(self):
        xs = ExtendedState(State(0.5, 0.2, -0.3, 0.1), 8.0, 0.5)
        v = (0.7, -0.4)
        du, tau = gamma_b(P, xs, v)
        e11, e12, e21, e22 = decoupling_b(P, xs)
        jets = output_jets_b(P, xs)
        # reconstruct: E ubar + b = v, where b comes from the drift terms
        b1 = v[0] - (e11 * du + e12 * tau)
        b2 = v[1] - (e21 * du + e22 * tau)
        # the drift must not depend on v: recompute with a different v
        du2, tau2 = gamma_b(P, xs, (0.0, 0.0))
        assert -(e11 * du2 + e12 * tau2) == pytest.approx(b1, abs=1e-9)
        assert -(e21 * du2 + e22 * tau2) == pytest.approx(b2, abs=1e-9)


class TestOutputJetsB:
    def test_acceleration_row_matches_dynamics(self):
        xs = ExtendedState(State(0.4, 0.3, -0.1, 0.2), 7.0, 0.3)
        jets1, jets2 = output_jets_b(P, xs)
        d = state_derivative(P, xs.state, Input(xs.u1, 0.0))
        assert jets1[2] == pytest.approx(d[1], abs=1e-14)

    def test_value_rows_match_outputs(self):
        xs = ExtendedState(State(0.4, 0.3, -0.1, 0.2), 7.0, 0.3)
        jets1, jets2 = output_jets_b(P, xs)
        assert jets1[0] == xs.state.phi
        assert jets2[0] == pytest.approx(link_force(P, xs.state, Input(xs.u1, 0.0)), abs=1e-14)

    def test_jerk_and_force_rate_match_finite_differences(self):
        # integrate the extended plant under constant (u1_ddot, tau) and
        # difference the analytic jets along the trajectory
        u1_ddot, tau = 0.4, 0.05
        dt = 1e-4

        def f(y):
            xs = State(y[0], y[1], y[2], y[3])
            d = state_derivative(P, xs, Input(y[4], tau))
            return (*d, y[5], u1_ddot)

        y = (0.5, 0.2, -0.2, 0.1, 9.0, 0.2)
        series = [y]
        for _ in range(4):
            series.append(rk4_step(f, series[-1], dt))
        jets = [
            output_jets_b(P, ExtendedState(State(*s[:4]), s[4], s[5])) for s in series
        ]
        fd_jerk = (jets[3][0][2] - jets[1][0][2]) / (2 * dt)
        assert jets[2][0][3] == pytest.approx(fd_jerk, abs=1e-4)
        fd_dy2 = (jets[3][1][0] - jets[1][1][0]) / (2 * dt)
        assert jets[2][1][1] == pytest.approx(fd_dy2, abs=1e-4)


def test_output_jets_a_prime_acceleration():
    x = State(0.2, 0.4, 0.1, -0.3)
    jets1, jets2 = output_jets_a_prime(P, x, 6.0)
    d = state_derivative(P, x, Input(6.0, 0.0))
    assert jets1[2] == pytest.approx(d[1], abs=1e-14)
    assert jets2 == (x.theta, x.theta_dot)


def test_controller_b_exponential_error_decay():
    # small initial elevation offset; log-error slope during the constant
    # phase should be at least 0.8x the slowest pole
    from tethersim import config, sim

    cfg = config.scenario_gamma_b().with_params(
        init_phi_offset_rad=0.02, step_start_s=3.0, step_duration_s=1.0, post_s=0.5
    )
    tr = sim.run_closed_loop(cfg)
    e = np.abs(tr.y1 - tr.y1_ref)
    i0, i1 = np.searchsorted(tr.t, 0.5), np.searchsorted(tr.t, 1.5)
    slope = (math.log(e[i1]) - math.log(e[i0])) / (tr.t[i1] - tr.t[i0])
    assert slope <= -0.8 * 1.0
