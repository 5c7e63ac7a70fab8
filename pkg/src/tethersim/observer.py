"""IMU-only state estimation through a pair of high-gain observers.

The estimation pipeline:

1. ``transform_measure`` turns the accelerometer pair into a scalar
   ``eta = +-|t_L|/m_R`` and an angle measurement ``w = phi + theta (mod pi)``.
   The sign of ``eta`` (tension vs compression) cannot be read off the
   sensors instantaneously, so every quantity exists in two hypotheses.
2. In coordinates ``z = (phi+theta, phi_dot, phi_ddot)`` the system is an
   integrator chain with the only nonlinearity ``sigma`` in the last row and
   ``w`` measuring the first state, which is exactly the triangular form a
   high-gain observer wants.  ``hgo_step`` advances one observer copy.
3. ``recover_state`` maps the estimate back to the original state, using the
   accelerometer once more to split ``phi`` from ``theta``.
4. ``ObserverBank`` runs one observer per sign hypothesis, scores each by an
   exponentially discounted accelerometer prediction error, selects the
   lower one, and can permanently switch the loser off once the selected
   estimate has tracked well for a dwell period.

Zero link force makes the angle measurement undefined (the accelerometer
carries no link information); the bank then propagates both observers
open loop and resumes correction when the force returns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

from .model import ImuReading, State, VehicleParams, wrap_angle


class ObserverError(RuntimeError):
    """Base class for estimation failures."""


class ZeroLinkForce(ObserverError):
    """Accelerometer magnitude too small to define the angle measurement."""


class DegenerateRecovery(ObserverError):
    """Recovered direction vector has near-zero norm; elevation undefined."""


class ObserverInputs(NamedTuple):
    """Known quantities driving one observer copy."""

    u1: float
    u1_dot: float
    u3: float
    eta: float


@dataclass(frozen=True)
class HgoGains:
    """High-gain injection design: H = (alpha1/eps, alpha2/eps^2, alpha3/eps^3)."""

    epsilon: float
    alpha: tuple[float, float, float]
    h: tuple[float, float, float] = field(init=False)

    def __post_init__(self) -> None:
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        a1, a2, a3 = self.alpha
        # Routh-Hurwitz for p^3 + a1 p^2 + a2 p + a3
        if not (a1 > 0.0 and a3 > 0.0 and a1 * a2 > a3):
            raise ValueError("alpha coefficients are not Hurwitz")
        e = self.epsilon
        object.__setattr__(self, "h", (a1 / e, a2 / (e * e), a3 / (e * e * e)))

    @classmethod
    def from_roots(
        cls, roots: tuple[float, float, float], epsilon: float
    ) -> "HgoGains":
        """Gains whose error polynomial has the given (negative) roots."""
        r1, r2, r3 = roots
        a1 = -(r1 + r2 + r3)
        a2 = r1 * r2 + r1 * r3 + r2 * r3
        a3 = -(r1 * r2 * r3)
        return cls(epsilon=epsilon, alpha=(a1, a2, a3))


@dataclass
class HgoState:
    """One observer copy: estimate, discounted prediction error, sign tag."""

    z_hat: tuple[float, float, float]
    e_tilde: float = 0.0
    sign: int = 1


DEFAULT_SAT = (4.0 * math.pi, 30.0, 150.0)


def transform_measure(
    imu: ImuReading,
    u1: float,
    p: VehicleParams,
    sign: int,
    eta_min: float = 1e-6,
) -> tuple[float, float]:
    """Signed force magnitude ``eta`` and angle measurement ``w`` from the IMU.

    Removing the direct thrust term from the body-z channel leaves the
    link-force contribution ``(t_L/m_R)*(cos z1, sin z1)`` in the
    accelerometer pair; its magnitude is ``|t_L|/m_R`` and its phase is
    ``z1 = phi + theta`` up to the sign ambiguity resolved by ``sign``.
    """
    az_link = imu.a_z + u1 / p.m_r
    eta_raw = math.hypot(imu.a_x, az_link)
    if eta_raw <= eta_min:
        raise ZeroLinkForce(f"accelerometer link magnitude {eta_raw:g}")
    w = math.atan2(sign * az_link, sign * imu.a_x)
    return sign * eta_raw, w


def sin_elevation(
    z: tuple[float, float, float], zeta: ObserverInputs, p: VehicleParams
) -> float:
    """Algebraic substitution for sin(phi) from eta, clamped to [-1, 1]."""
    raw = (
        zeta.eta / p.l - z[1] * z[1] - p.a2 * math.sin(z[0]) * zeta.u1
    ) / p.a1
    return min(1.0, max(-1.0, raw))


def sigma(
    z: tuple[float, float, float], zeta: ObserverInputs, p: VehicleParams
) -> float:
    """Chain-tail nonlinearity: the time derivative of z3 in observer coordinates."""
    s1 = sin_elevation(z, zeta, p)
    sz, cz = math.sin(z[0]), math.cos(z[0])
    return (
        -p.a1 * z[1] * s1
        + p.a2 * cz * zeta.u1_dot
        - p.a2 * sz * (z[1] + zeta.u3) * zeta.u1
    )


def hgo_step(
    h: HgoState,
    g: HgoGains,
    zeta: ObserverInputs,
    w: float | None,
    dt: float,
    p: VehicleParams,
    sat: tuple[float, float, float] = DEFAULT_SAT,
) -> HgoState:
    """Advance one observer copy by dt (RK4, inputs held over the step).

    The innovation is the wrapped angle difference ``w - z1``; with ``w``
    unavailable (zero link force) the correction term is dropped and the
    model runs open loop.  The estimate is saturated to the operative bounds
    afterwards, which caps the high-gain peaking transient.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    h1, h2, h3 = g.h

    def rate(z: tuple[float, float, float]) -> tuple[float, float, float]:
        s = sigma(z, zeta, p)
        if w is None:
            return (z[1] + zeta.u3, z[2], s)
        innov = wrap_angle(w - z[0])
        return (z[1] + zeta.u3 + h1 * innov, z[2] + h2 * innov, s + h3 * innov)

    z = h.z_hat
    k1 = rate(z)
    z2 = tuple(z[i] + 0.5 * dt * k1[i] for i in range(3))
    k2 = rate(z2)
    z3 = tuple(z[i] + 0.5 * dt * k2[i] for i in range(3))
    k3 = rate(z3)
    z4 = tuple(z[i] + dt * k3[i] for i in range(3))
    k4 = rate(z4)
    nxt = tuple(
        z[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in range(3)
    )
    nxt = tuple(min(sat[i], max(-sat[i], nxt[i])) for i in range(3))
    return HgoState(z_hat=nxt, e_tilde=h.e_tilde, sign=h.sign)


def recover_state(
    z_hat: tuple[float, float, float],
    u1: float,
    eta: float,
    u3: float,
    p: VehicleParams,
) -> State:
    """Map observer coordinates back to [phi, phi_dot, theta, theta_dot].

    cos(phi) comes from the chain state z3, sin(phi) from the accelerometer
    substitution; phi is the phase of that (ideally unit) vector and theta
    follows as z1 - phi.  The gyro provides theta_dot directly.
    """
    z1, z2, z3 = z_hat
    cos_phi = (z3 - p.a2 * math.cos(z1) * u1) / p.a1
    sin_phi = (eta / p.l - z2 * z2 - p.a2 * math.sin(z1) * u1) / p.a1
    norm = math.hypot(cos_phi, sin_phi)
    if norm < 1e-9:
        raise DegenerateRecovery(f"direction vector norm {norm:g}")
    phi = math.atan2(sin_phi, cos_phi)
    return State(phi, z2, z1 - phi, u3)


def predicted_accel(
    x_hat: State, u1: float, p: VehicleParams
) -> tuple[float, float]:
    """Accelerometer pair the estimate implies (same map as the sensor model)."""
    z1 = x_hat.phi + x_hat.theta
    factor = (
        x_hat.phi_dot * x_hat.phi_dot
        + p.a1 * math.sin(x_hat.phi)
        + p.a2 * math.sin(z1) * u1
    )
    return (
        p.l * math.cos(z1) * factor,
        p.l * math.sin(z1) * factor - u1 / p.m_r,
    )


def update_prediction_error(
    e: float, residual_norm: float, lambda_: float, dt: float
) -> float:
    """One step of the discounted error filter e' = lambda (|residual| - e).

    Uses the exact zero-order-hold solution so constant residuals produce
    the textbook first-order response.
    """
    if lambda_ <= 0.0 or dt <= 0.0:
        raise ValueError("lambda_ and dt must be positive")
    decay = math.exp(-lambda_ * dt)
    return residual_norm + (e - residual_norm) * decay


def state_error_norm(x: State, x_hat: State) -> float:
    """Estimation error norm with the angle components wrapped."""
    return math.sqrt(
        wrap_angle(x.phi - x_hat.phi) ** 2
        + (x.phi_dot - x_hat.phi_dot) ** 2
        + wrap_angle(x.theta - x_hat.theta) ** 2
        + (x.theta_dot - x_hat.theta_dot) ** 2
    )


@dataclass
class ObserverBank:
    """Two sign-hypothesis observers with prediction-error disambiguation."""

    params: VehicleParams
    gains: HgoGains
    lambda_: float = 5.0
    confidence_threshold: float = 0.02
    dwell_s: float = 1.0
    eta_min: float = 1e-6
    # hypothesis switch hysteresis: leave the incumbent only when its error
    # exceeds the other by the relative factor plus the absolute floor, so
    # noise-floor fluctuations (and the statically non-discriminable case)
    # do not flap the selection
    switch_rel: float = 0.25
    switch_abs: float = 1e-9
    sat: tuple[float, float, float] = DEFAULT_SAT
    plus: HgoState = field(default_factory=lambda: HgoState((0.0, 0.0, 0.0), sign=1))
    minus: HgoState = field(default_factory=lambda: HgoState((0.0, 0.0, 0.0), sign=-1))
    selected: int = 1
    frozen: bool = False
    x_plus: State | None = None
    x_minus: State | None = None
    _dwell_accum: float = 0.0

    # -- seeding ------------------------------------------------------------

    def seed_from_measurement(self, imu: ImuReading, u1: float) -> None:
        """Initialize each hypothesis as (w(0), 0, 0) from the first reading."""
        for sign, slot in ((1, "plus"), (-1, "minus")):
            try:
                _, w = transform_measure(imu, u1, self.params, sign, self.eta_min)
            except ZeroLinkForce:
                w = 0.0
            setattr(self, slot, HgoState((w, 0.0, 0.0), sign=sign))

    def seed_from_state(self, x0: State, u1: float) -> None:
        """Initialize both hypotheses from a prior state estimate."""
        z1 = x0.phi + x0.theta
        z3 = self.params.a1 * math.cos(x0.phi) + self.params.a2 * math.cos(z1) * u1
        self.plus = HgoState((z1, x0.phi_dot, z3), sign=1)
        self.minus = HgoState((z1, x0.phi_dot, z3), sign=-1)

    # -- stepping -----------------------------------------------------------

    def _step_one(
        self,
        h: HgoState,
        imu: ImuReading,
        u1: float,
        u1_dot: float,
        w: float | None,
        eta: float,
        dt: float,
    ) -> tuple[HgoState, State | None, float | None]:
        zeta = ObserverInputs(u1, u1_dot, imu.omega, eta)
        nxt = hgo_step(h, self.gains, zeta, w, dt, self.params, self.sat)
        try:
            x_hat = recover_state(nxt.z_hat, u1, eta, imu.omega, self.params)
        except DegenerateRecovery:
            return nxt, None, None
        ax, az = predicted_accel(x_hat, u1, self.params)
        residual = math.hypot(imu.a_x - ax, imu.a_z - az)
        return nxt, x_hat, residual

    def step(
        self,
        imu: ImuReading,
        u1: float,
        u1_dot: float,
        dt: float,
        tracking_error: float | None = None,
    ) -> State:
        """Advance the bank one step and return the selected state estimate.

        ``tracking_error`` (normalized output error, supplied by the control
        loop) drives the confidence logic that permanently freezes the
        losing hypothesis.
        """
        try:
            eta_p, w_p = transform_measure(imu, u1, self.params, 1, self.eta_min)
            eta_m, w_m = transform_measure(imu, u1, self.params, -1, self.eta_min)
            gap = False
        except ZeroLinkForce:
            eta_p, w_p, eta_m, w_m = 0.0, None, 0.0, None
            gap = True

        run_minus = not (self.frozen and self.selected == 1)
        run_plus = not (self.frozen and self.selected == -1)

        if run_plus:
            nxt, x_hat, residual = self._step_one(self.plus, imu, u1, u1_dot, w_p, eta_p, dt)
            if x_hat is not None:
                self.x_plus = x_hat
            if residual is not None and not gap:
                nxt.e_tilde = update_prediction_error(nxt.e_tilde, residual, self.lambda_, dt)
            self.plus = nxt
        if run_minus:
            nxt, x_hat, residual = self._step_one(self.minus, imu, u1, u1_dot, w_m, eta_m, dt)
            if x_hat is not None:
                self.x_minus = x_hat
            if residual is not None and not gap:
                nxt.e_tilde = update_prediction_error(nxt.e_tilde, residual, self.lambda_, dt)
            self.minus = nxt

        if not self.frozen and not gap:
            e_inc = self.plus.e_tilde if self.selected == 1 else self.minus.e_tilde
            e_oth = self.minus.e_tilde if self.selected == 1 else self.plus.e_tilde
            if e_inc > e_oth * (1.0 + self.switch_rel) + self.switch_abs:
                self.selected = -self.selected
            if tracking_error is not None:
                if tracking_error < self.confidence_threshold:
                    self._dwell_accum += dt
                    if self._dwell_accum >= self.dwell_s:
                        self.frozen = True
                else:
                    self._dwell_accum = 0.0

        chosen = self.x_plus if self.selected == 1 else self.x_minus
        if chosen is None:
            # no valid recovery yet; fall back to the raw chain estimate
            h = self.plus if self.selected == 1 else self.minus
            chosen = State(h.z_hat[0], h.z_hat[1], 0.0, imu.omega)
        return chosen


def bank_step(
    bank: ObserverBank,
    imu: ImuReading,
    u1: float,
    u1_dot: float,
    dt: float,
    tracking_error: float | None = None,
) -> tuple[ObserverBank, State]:
    """Functional wrapper over :meth:`ObserverBank.step` (mutates and returns)."""
    return bank, bank.step(imu, u1, u1_dot, dt, tracking_error)
