"""Fixed-step closed-loop simulation, tracking metrics, and sweep campaigns.

One simulation couples four pieces on a common RK4 grid:

* the true plant (nominal or general variant, true parameters),
* the controller (possibly with thrust compensator states), computing its
  command from nominal, possibly perturbed, parameters,
* the IMU (optionally noisy) feeding the dual high-gain observer bank when
  measurement feedback is selected,
* an optional first-order motor model lagging the commanded thrust.

Compensator and motor states are appended to the plant state vector so one
RK4 step advances everything consistently; commands are held over each step.
"""

from __future__ import annotations

import io
import itertools
import math
from dataclasses import dataclass, fields, replace
from typing import Callable, Sequence

import numpy as np

from . import control, flatness, trajectory
from .model import (
    GeneralParams,
    ImuReading,
    Input,
    State,
    VehicleParams,
    general_accelerations,
    imu_measure,
    imu_measure_general,
    link_force,
    link_force_general,
    state_derivative,
    wrap_angle,
)
from .observer import HgoGains, ObserverBank

DEG = math.pi / 180.0

_trapz = getattr(np, "trapezoid", np.trapz)


class ConfigError(ValueError):
    """Invalid or inconsistent simulation configuration."""


class NonFiniteState(RuntimeError):
    """Integrator produced a non-finite component."""


class DegenerateReference(ValueError):
    """Tracking-error metric would divide by a (near-)zero reference."""


def rk4_step(
    f: Callable[[tuple[float, ...]], tuple[float, ...]],
    y: tuple[float, ...],
    dt: float,
) -> tuple[float, ...]:
    """Classical fourth-order Runge-Kutta step for a small state tuple."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    n = len(y)
    k1 = f(y)
    k2 = f(tuple(y[i] + 0.5 * dt * k1[i] for i in range(n)))
    k3 = f(tuple(y[i] + 0.5 * dt * k2[i] for i in range(n)))
    k4 = f(tuple(y[i] + dt * k3[i] for i in range(n)))
    out = tuple(
        y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in range(n)
    )
    if not all(math.isfinite(v) for v in out):
        raise NonFiniteState("non-finite state after RK4 step")
    return out


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean white Gaussian sensor noise, held over each step."""

    var_acc: float = 0.1
    var_gyro: float = 0.01
    seed: int = 42

    def __post_init__(self) -> None:
        if self.var_acc < 0.0 or self.var_gyro < 0.0:
            raise ConfigError("noise variances must be non-negative")


def sensor_noise_array(model: NoiseModel, n: int) -> np.ndarray:
    """(n, 3) noise samples for (a_x, a_z, omega); counter-based RNG for
    reproducibility across runs and parallel sweep cells."""
    rng = np.random.Generator(np.random.Philox(model.seed))
    noise = rng.standard_normal((n, 3))
    noise[:, 0] *= math.sqrt(model.var_acc)
    noise[:, 1] *= math.sqrt(model.var_acc)
    noise[:, 2] *= math.sqrt(model.var_gyro)
    return noise


@dataclass
class MotorModel:
    """First-order thrust lag: thrust' = (command - thrust)/tau_m."""

    tau_m: float
    thrust_state: float = 0.0

    def __post_init__(self) -> None:
        if self.tau_m <= 0.0:
            raise ConfigError("motor time constant must be positive")


CONTROLLERS = ("gammaA", "gammaAPrime", "gammaB")
FEEDBACKS = ("true_state", "observer")

# relative degree per output channel, keyed by controller
_REL_DEG = {"gammaA": (2, 2), "gammaAPrime": (3, 2), "gammaB": (4, 2)}
# smooth-step continuity order per channel
_STEP_ORDER = {"gammaA": (2, 2), "gammaAPrime": (3, 2), "gammaB": (4, 2)}


@dataclass(frozen=True)
class SimConfig:
    """Plain-data description of one closed-loop experiment.

    Field names double as the plain-text config file keys; quantities carry
    their unit in the name.  Defaults reproduce the nominal
    (elevation, link force) scenario: smooth step 45 deg -> 135 deg and
    3 N -> 5 N over 5 s, poles (-1,-1.5,-2,-2.5)/(-1,-1.5).
    """

    # vehicle (true values)
    m_r_kg: float = 1.0
    j_r_kgm2: float = 0.25
    l_m: float = 2.0
    g_mps2: float = 9.81
    # run basics
    dt_s: float = 1e-3
    controller: str = "gammaB"
    feedback: str = "true_state"
    seed: int = 42
    divergence_bound: float = 1e3
    # reference trajectory (degrees / newtons); theta_* used by the A laws,
    # tl_* by the B law
    phi_start_deg: float = 45.0
    phi_end_deg: float = 135.0
    tl_start_n: float = 3.0
    tl_end_n: float = 5.0
    theta_start_deg: float = 30.0
    theta_end_deg: float = 5.0
    step_start_s: float = 2.0
    step_duration_s: float = 5.0
    post_s: float = 3.0
    # outer-loop poles (length must match the controller's relative degrees)
    poles_y1: tuple[float, ...] = (-1.0, -1.5, -2.0, -2.5)
    poles_y2: tuple[float, ...] = (-1.0, -1.5)
    # damped least-squares inversion
    dls_damping: float = 0.05
    dls_det_threshold: float = 1e-3
    # observer
    hgo_epsilon: float = 0.1
    hgo_roots: tuple[float, ...] = (-6.0, -4.5, -3.0)
    lambda_smooth_1s: float = 5.0
    confidence_threshold: float = 0.02
    confidence_dwell_s: float = 1.0
    sat_z1: float = 4.0 * math.pi
    sat_z2: float = 30.0
    sat_z3: float = 150.0
    eta_min: float = 1e-6
    # sensor noise (0 disables)
    var_acc_m2s4: float = 0.0
    var_gyro_rad2s2: float = 0.0
    # motor lag (0 disables)
    tau_m_s: float = 0.0
    # relative parametric variation applied to the controller/observer params
    delta_m_r: float = 0.0
    delta_l: float = 0.0
    delta_j_r: float = 0.0
    # general-plant non-idealities (all zero selects the nominal plant)
    m_l_kg: float = 0.0
    r_bl_x_m: float = 0.0
    r_bl_z_m: float = 0.0
    # initial true-state offsets from the reference-consistent start
    init_phi_offset_rad: float = 0.0
    init_phi_dot_offset_rads: float = 0.0
    init_theta_offset_rad: float = 0.0
    init_theta_dot_offset_rads: float = 0.0
    # observer initialization: "measurement" seeds from the first reading,
    # "state" seeds from the true initial state plus the offsets below
    est_init: str = "measurement"
    est_phi_offset_rad: float = 0.0
    est_phi_dot_offset_rads: float = 0.0
    est_theta_offset_rad: float = 0.0
    est_theta_dot_offset_rads: float = 0.0
    # initial hypothesis sign for the bank (+1 or -1)
    est_initial_sign: int = 1

    def __post_init__(self) -> None:
        if self.controller not in CONTROLLERS:
            raise ConfigError(f"unknown controller {self.controller!r}")
        if self.feedback not in FEEDBACKS:
            raise ConfigError(f"unknown feedback {self.feedback!r}")
        if self.controller == "gammaA" and self.feedback == "observer":
            raise ConfigError(
                "the static gammaA law cannot close the loop on the observer; "
                "it provides no thrust derivative (use gammaAPrime)"
            )
        if self.dt_s <= 0.0:
            raise ConfigError("dt_s must be positive")
        if self.step_start_s < 0.0 or self.step_duration_s <= 0.0 or self.post_s < 0.0:
            raise ConfigError("phase durations must be non-negative (step > 0)")
        r1, r2 = _REL_DEG[self.controller]
        if len(self.poles_y1) != r1 or len(self.poles_y2) != r2:
            raise ConfigError(
                f"{self.controller} needs {r1}/{r2} poles per channel, "
                f"got {len(self.poles_y1)}/{len(self.poles_y2)}"
            )
        if self.duration_s < self.dt_s:
            raise ConfigError("duration must cover at least one step")
        if self.tau_m_s > 0.0 and self.dt_s > 2.5 * self.tau_m_s:
            raise ConfigError(
                "dt_s too coarse for the motor time constant (RK4 stability); "
                "need dt_s <= 2.5 * tau_m_s"
            )
        if self.est_initial_sign not in (1, -1):
            raise ConfigError("est_initial_sign must be +1 or -1")

    @property
    def duration_s(self) -> float:
        return self.step_start_s + self.step_duration_s + self.post_s

    @property
    def phases(self) -> tuple[tuple[float, float], ...]:
        s, e = self.step_start_s, self.step_start_s + self.step_duration_s
        return ((0.0, s), (s, e), (e, self.duration_s))

    @property
    def params(self) -> VehicleParams:
        return VehicleParams(m_r=self.m_r_kg, j_r=self.j_r_kgm2, l=self.l_m, g=self.g_mps2)

    @property
    def controller_params(self) -> VehicleParams:
        return self.params.perturbed(self.delta_m_r, self.delta_l, self.delta_j_r)

    @property
    def general_params(self) -> GeneralParams | None:
        if self.m_l_kg == 0.0 and self.r_bl_x_m == 0.0 and self.r_bl_z_m == 0.0:
            return None
        return GeneralParams.thin_rod(self.m_l_kg, self.l_m, self.r_bl_x_m, self.r_bl_z_m)

    @property
    def noise(self) -> NoiseModel | None:
        if self.var_acc_m2s4 == 0.0 and self.var_gyro_rad2s2 == 0.0:
            return None
        return NoiseModel(self.var_acc_m2s4, self.var_gyro_rad2s2, self.seed)

    def with_params(self, **overrides: float) -> "SimConfig":
        unknown = set(overrides) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return replace(self, **overrides)

    def references(self) -> tuple[trajectory.SmoothStep, trajectory.SmoothStep]:
        k1, k2 = _STEP_ORDER[self.controller]
        t0, tf = self.step_start_s, self.step_start_s + self.step_duration_s
        y1 = trajectory.SmoothStep(
            t0, tf, self.phi_start_deg * DEG, self.phi_end_deg * DEG, k=k1
        )
        if self.controller == "gammaB":
            y2 = trajectory.SmoothStep(t0, tf, self.tl_start_n, self.tl_end_n, k=k2)
        else:
            y2 = trajectory.SmoothStep(
                t0, tf, self.theta_start_deg * DEG, self.theta_end_deg * DEG, k=k2
            )
        return y1, y2


@dataclass(frozen=True)
class PhaseMetrics:
    name: str
    t_start: float
    t_end: float
    e_mean: float
    e_std: float


@dataclass(frozen=True)
class Metrics:
    phases: tuple[PhaseMetrics, ...]
    overall: PhaseMetrics

    def phase(self, name: str) -> PhaseMetrics:
        for ph in self.phases:
            if ph.name == name:
                return ph
        raise KeyError(name)


_CSV_COLUMNS = (
    "t,x1,x2,x3,x4,xhat1,xhat2,xhat3,xhat4,u1_cmd,u1_real,u2,"
    "y1,y1_ref,y2,y2_ref,etilde_plus,etilde_minus,selected"
)

_CSV_UNITS = (
    "# units: t[s] x1[rad] x2[rad/s] x3[rad] x4[rad/s] xhat[same] "
    "u1_cmd[N] u1_real[N] u2[N m] y1,y1_ref[rad] y2,y2_ref[rad or N] "
    "etilde[m/s^2] selected[-1/0/+1]"
)


@dataclass
class Trace:
    """Uniform-grid record of one closed-loop run."""

    t: np.ndarray
    x: np.ndarray
    x_hat: np.ndarray
    u1_cmd: np.ndarray
    u1_real: np.ndarray
    u2: np.ndarray
    y1: np.ndarray
    y1_ref: np.ndarray
    y2: np.ndarray
    y2_ref: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    etilde_plus: np.ndarray
    etilde_minus: np.ndarray
    selected: np.ndarray
    phases: tuple[tuple[float, float], ...]
    seed: int
    diverged: bool = False
    abort_time: float | None = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"{_CSV_UNITS}; seed={self.seed}\n")
        buf.write(_CSV_COLUMNS + "\n")
        cols = (
            self.t,
            self.x[:, 0], self.x[:, 1], self.x[:, 2], self.x[:, 3],
            self.x_hat[:, 0], self.x_hat[:, 1], self.x_hat[:, 2], self.x_hat[:, 3],
            self.u1_cmd, self.u1_real, self.u2,
            self.y1, self.y1_ref, self.y2, self.y2_ref,
            self.etilde_plus, self.etilde_minus, self.selected,
        )
        for row in zip(*cols):
            buf.write(",".join(f"{v:.9g}" for v in row) + "\n")
        return buf.getvalue()

    def write_csv(self, path: str) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(self.to_csv())


def tracking_metrics(
    trace: Trace,
    phases: Sequence[tuple[float, float]] | None = None,
    eps_ref: float = 1e-6,
) -> Metrics:
    """Per-phase mean/std of the normalized tracking error.

    e(t) = |y1_ref - y1|/|y1_ref| + |y2_ref - y2|/|y2_ref|, integrated with
    the trapezoidal rule over each phase.
    """
    if phases is None:
        phases = trace.phases
    t = trace.t
    if np.min(np.abs(trace.y1_ref)) < eps_ref or np.min(np.abs(trace.y2_ref)) < eps_ref:
        raise DegenerateReference("reference magnitude below eps_ref")
    e = np.abs(trace.y1_ref - trace.y1) / np.abs(trace.y1_ref) + np.abs(
        trace.y2_ref - trace.y2
    ) / np.abs(trace.y2_ref)

    def integrate(name: str, a: float, b: float) -> PhaseMetrics:
        b_eff = min(b, float(t[-1]))
        i0 = int(np.searchsorted(t, a, side="left"))
        i1 = int(np.searchsorted(t, b_eff, side="right"))
        if i1 - i0 < 2:
            return PhaseMetrics(name, a, b, float("nan"), float("nan"))
        ts, es = t[i0:i1], e[i0:i1]
        span = ts[-1] - ts[0]
        mean = float(_trapz(es, ts) / span)
        var = float(_trapz((es - mean) ** 2, ts) / span)
        return PhaseMetrics(name, a, b, mean, math.sqrt(max(var, 0.0)))

    per_phase = tuple(
        integrate(f"phase{i + 1}", a, b) for i, (a, b) in enumerate(phases)
    )
    overall = integrate("overall", phases[0][0], phases[-1][1])
    return Metrics(per_phase, overall)


# -- closed loop --------------------------------------------------------------


def _initial_flat_sample(
    cfg: SimConfig, p: VehicleParams
) -> flatness.FlatSample:
    """Reference-consistent state/input at t = 0 for the given parameter set."""
    phi0 = cfg.phi_start_deg * DEG
    if cfg.controller == "gammaB":
        pt = flatness.OutputPointB((phi0, 0.0, 0.0, 0.0, 0.0), (cfg.tl_start_n, 0.0, 0.0))
        return flatness.flat_map_b(p, pt)
    theta0 = cfg.theta_start_deg * DEG
    pta = flatness.OutputPointA((phi0, 0.0, 0.0, 0.0), (theta0, 0.0, 0.0))
    return flatness.flat_map_a(p, pta)


def _build_controller(cfg: SimConfig):
    dls = control.DlsConfig(cfg.dls_damping, cfg.dls_det_threshold)
    g1 = control.PolePlacement(cfg.poles_y1)
    g2 = control.PolePlacement(cfg.poles_y2)
    if cfg.controller == "gammaA":
        return control.ControllerA(g1, g2, dls)
    if cfg.controller == "gammaAPrime":
        return control.ControllerAPrime(g1, g2, dls)
    return control.ControllerB(g1, g2, dls)


def run_closed_loop(cfg: SimConfig) -> Trace:
    """Simulate one experiment; divergence is recorded, not raised."""
    dt = cfg.dt_s
    n = round(cfg.duration_s / dt)
    p_true = cfg.params
    p_ctrl = cfg.controller_params
    gp = cfg.general_params
    ref1_step, ref2_step = cfg.references()
    r1, r2 = _REL_DEG[cfg.controller]

    ctrl = _build_controller(cfg)
    flat_ctrl = _initial_flat_sample(cfg, p_ctrl)
    flat_true = _initial_flat_sample(cfg, p_true)

    x = State(
        flat_true.state.phi + cfg.init_phi_offset_rad,
        flat_true.state.phi_dot + cfg.init_phi_dot_offset_rads,
        flat_true.state.theta + cfg.init_theta_offset_rad,
        flat_true.state.theta_dot + cfg.init_theta_dot_offset_rads,
    )
    u1_c = flat_ctrl.input.f
    u1_dot_c = flat_ctrl.u1_dot
    if isinstance(ctrl, control.ControllerAPrime):
        ctrl.u1 = u1_c
    elif isinstance(ctrl, control.ControllerB):
        ctrl.u1, ctrl.u1_dot = u1_c, u1_dot_c

    motor = MotorModel(cfg.tau_m_s, u1_c) if cfg.tau_m_s > 0.0 else None

    use_observer = cfg.feedback == "observer"
    bank: ObserverBank | None = None
    if use_observer:
        bank = ObserverBank(
            params=p_ctrl,
            gains=HgoGains.from_roots(tuple(cfg.hgo_roots), cfg.hgo_epsilon),
            lambda_=cfg.lambda_smooth_1s,
            confidence_threshold=cfg.confidence_threshold,
            dwell_s=cfg.confidence_dwell_s,
            eta_min=cfg.eta_min,
            sat=(cfg.sat_z1, cfg.sat_z2, cfg.sat_z3),
            selected=cfg.est_initial_sign,
        )

    noise_model = cfg.noise
    noise = sensor_noise_array(noise_model, n + 1) if noise_model else None

    rows: list[tuple[float, ...]] = []
    tau_prev = flat_true.input.tau
    u1_dot_cmd_prev = 0.0
    track_err_prev: float | None = None
    diverged = False
    abort_time: float | None = None

    # commanded thrust of the previous step; only the static law applies its
    # command directly, the dynamic laws go through the compensator state
    static_cmd_prev = flat_ctrl.input.f

    for k in range(n + 1):
        t = k * dt
        u1_now = u1_c if cfg.controller != "gammaA" else static_cmd_prev
        thrust_applied = motor.thrust_state if motor else u1_now

        # true outputs (for the trace/metrics)
        if gp is None:
            y2_true = (
                link_force(p_true, x, Input(thrust_applied, tau_prev))
                if cfg.controller == "gammaB"
                else x.theta
            )
        else:
            q_ddot = general_accelerations(p_true, gp, x, Input(thrust_applied, tau_prev))
            y2_true = (
                link_force_general(p_true, gp, x, Input(thrust_applied, tau_prev), q_ddot)
                if cfg.controller == "gammaB"
                else x.theta
            )

        # feedback path
        if use_observer:
            if gp is None:
                imu = imu_measure(p_true, x, Input(thrust_applied, tau_prev))
            else:
                imu = imu_measure_general(p_true, gp, x, q_ddot)
            if noise is not None:
                imu = ImuReading(
                    imu.a_x + noise[k, 0], imu.a_z + noise[k, 1], imu.omega + noise[k, 2]
                )
            obs_u1_dot = u1_dot_c if cfg.controller == "gammaB" else u1_dot_cmd_prev
            if k == 0:
                if cfg.est_init == "state":
                    seed_state = State(
                        x.phi + cfg.est_phi_offset_rad,
                        x.phi_dot + cfg.est_phi_dot_offset_rads,
                        x.theta + cfg.est_theta_offset_rad,
                        x.theta_dot + cfg.est_theta_dot_offset_rads,
                    )
                    bank.seed_from_state(seed_state, u1_now)
                else:
                    bank.seed_from_measurement(imu, u1_now)
            x_fb = bank.step(imu, u1_now, obs_u1_dot, dt, track_err_prev)
        else:
            x_fb = x

        ref1 = ref1_step.eval(t, r1)
        ref2 = ref2_step.eval(t, r2)
        cmd, v = ctrl.command(p_ctrl, x_fb, ref1, ref2)

        # normalized output error as seen by the controller (freeze logic)
        if cfg.controller == "gammaB":
            y2_fb = link_force(p_ctrl, x_fb, Input(u1_now, 0.0))
        else:
            y2_fb = x_fb.theta
        if abs(ref1[0]) > 1e-9 and abs(ref2[0]) > 1e-9:
            track_err_prev = abs(ref1[0] - x_fb.phi) / abs(ref1[0]) + abs(
                ref2[0] - y2_fb
            ) / abs(ref2[0])

        u1_cmd_now = cmd.f if cfg.controller == "gammaA" else u1_c
        rows.append(
            (
                t,
                x.phi, x.phi_dot, x.theta, x.theta_dot,
                x_fb.phi, x_fb.phi_dot, x_fb.theta, x_fb.theta_dot,
                u1_cmd_now,
                thrust_applied if motor else u1_cmd_now,
                cmd.tau if cfg.controller == "gammaA" else cmd[1],
                x.phi, ref1[0], y2_true, ref2[0],
                bank.plus.e_tilde if bank else 0.0,
                bank.minus.e_tilde if bank else 0.0,
                float(bank.selected) if bank else 0.0,
                v[0], v[1],
            )
        )
        if k == n:
            break

        # -- integrate the extended true system over [t, t+dt] ---------------
        if cfg.controller == "gammaA":
            tau_now = cmd.tau
            f_cmd = cmd.f
            static_cmd_prev = cmd.f

            def deriv(y: tuple[float, ...]) -> tuple[float, ...]:
                xs = State(y[0], y[1], y[2], y[3])
                thrust = y[4] if motor else f_cmd
                u = Input(thrust, tau_now)
                if gp is None:
                    xd = state_derivative(p_true, xs, u)
                else:
                    acc = general_accelerations(p_true, gp, xs, u)
                    xd = (xs.phi_dot, acc[0], xs.theta_dot, acc[1])
                if motor:
                    return (*xd, (f_cmd - y[4]) / motor.tau_m)
                return xd

            y0: tuple[float, ...] = (*x, motor.thrust_state) if motor else tuple(x)
        elif cfg.controller == "gammaAPrime":
            u1_dot_cmd, tau_now = cmd
            idx_m = 5

            def deriv(y: tuple[float, ...]) -> tuple[float, ...]:
                xs = State(y[0], y[1], y[2], y[3])
                thrust = y[idx_m] if motor else y[4]
                u = Input(thrust, tau_now)
                if gp is None:
                    xd = state_derivative(p_true, xs, u)
                else:
                    acc = general_accelerations(p_true, gp, xs, u)
                    xd = (xs.phi_dot, acc[0], xs.theta_dot, acc[1])
                if motor:
                    return (*xd, u1_dot_cmd, (y[4] - y[idx_m]) / motor.tau_m)
                return (*xd, u1_dot_cmd)

            y0 = (*x, u1_c, motor.thrust_state) if motor else (*x, u1_c)
        else:
            u1_ddot_cmd, tau_now = cmd
            idx_m = 6

            def deriv(y: tuple[float, ...]) -> tuple[float, ...]:
                xs = State(y[0], y[1], y[2], y[3])
                thrust = y[idx_m] if motor else y[4]
                u = Input(thrust, tau_now)
                if gp is None:
                    xd = state_derivative(p_true, xs, u)
                else:
                    acc = general_accelerations(p_true, gp, xs, u)
                    xd = (xs.phi_dot, acc[0], xs.theta_dot, acc[1])
                if motor:
                    return (*xd, y[5], u1_ddot_cmd, (y[4] - y[idx_m]) / motor.tau_m)
                return (*xd, y[5], u1_ddot_cmd)

            y0 = (*x, u1_c, u1_dot_c, motor.thrust_state) if motor else (*x, u1_c, u1_dot_c)

        try:
            y1v = rk4_step(deriv, y0, dt)
        except NonFiniteState:
            diverged = True
            abort_time = t + dt
            break

        x = State(y1v[0], y1v[1], y1v[2], y1v[3])
        if cfg.controller == "gammaAPrime":
            u1_c = y1v[4]
            if motor:
                motor.thrust_state = y1v[5]
            ctrl.u1 = u1_c
            u1_dot_cmd_prev = u1_dot_cmd
        elif cfg.controller == "gammaB":
            u1_c, u1_dot_c = y1v[4], y1v[5]
            if motor:
                motor.thrust_state = y1v[6]
            ctrl.u1, ctrl.u1_dot = u1_c, u1_dot_c
        elif motor:
            motor.thrust_state = y1v[4]
        tau_prev = tau_now

        if max(abs(x.phi), abs(x.phi_dot), abs(x.theta), abs(x.theta_dot)) > cfg.divergence_bound:
            diverged = True
            abort_time = t + dt
            break

    arr = np.asarray(rows, dtype=float)
    return Trace(
        t=arr[:, 0],
        x=arr[:, 1:5],
        x_hat=arr[:, 5:9],
        u1_cmd=arr[:, 9],
        u1_real=arr[:, 10],
        u2=arr[:, 11],
        y1=arr[:, 12],
        y1_ref=arr[:, 13],
        y2=arr[:, 14],
        y2_ref=arr[:, 15],
        etilde_plus=arr[:, 16],
        etilde_minus=arr[:, 17],
        selected=arr[:, 18],
        v1=arr[:, 19],
        v2=arr[:, 20],
        phases=cfg.phases,
        seed=cfg.seed,
        diverged=diverged,
        abort_time=abort_time,
    )


# -- sweeps -------------------------------------------------------------------


@dataclass(frozen=True)
class SweepCell:
    params: dict[str, float]
    seed: int
    diverged: bool
    metrics: Metrics | None
    abort_time: float | None


def sweep(
    base: SimConfig,
    grid: dict[str, Sequence[float]],
    seeds: Sequence[int] | None = None,
) -> list[SweepCell]:
    """Run one simulation per grid cell (cartesian product, given key order).

    Divergence in a cell is recorded in the result table rather than raised.
    """
    if not grid:
        raise ConfigError("sweep grid is empty")
    names = list(grid)
    combos = list(itertools.product(*(grid[k] for k in names)))
    cells: list[SweepCell] = []
    for i, combo in enumerate(combos):
        seed = seeds[i] if seeds is not None else base.seed + i
        overrides = dict(zip(names, combo))
        cfg = base.with_params(seed=seed, **overrides)
        trace = run_closed_loop(cfg)
        metrics = None
        if not trace.diverged:
            metrics = tracking_metrics(trace)
        cells.append(
            SweepCell(
                params={k: float(v) for k, v in overrides.items()},
                seed=seed,
                diverged=trace.diverged,
                metrics=metrics,
                abort_time=trace.abort_time,
            )
        )
    return cells


def sweep_csv(cells: Sequence[SweepCell]) -> str:
    """Long-format table: one row per cell per phase."""
    if not cells:
        return ""
    names = list(cells[0].params)
    buf = io.StringIO()
    buf.write("# sweep results; e_mean/e_std per phase; diverged cells carry nan\n")
    buf.write(",".join(names) + ",seed,phase,e_mean,e_std,diverged\n")
    for cell in cells:
        prefix = ",".join(f"{cell.params[k]:.9g}" for k in names)
        if cell.metrics is None:
            phase_rows = [(f"phase{i+1}", float("nan"), float("nan")) for i in range(3)]
        else:
            phase_rows = [(ph.name, ph.e_mean, ph.e_std) for ph in cell.metrics.phases]
        for name, e_mean, e_std in phase_rows:
            buf.write(
                f"{prefix},{cell.seed},{name},{e_mean:.9g},{e_std:.9g},{int(cell.diverged)}\n"
            )
    return buf.getvalue()


# -- flatness demonstration runs ----------------------------------------------


@dataclass(frozen=True)
class FlatnessScenario:
    name: str
    kind: str  # "a" or "b"
    y1: trajectory.SmoothStep
    y2: trajectory.SmoothStep
    duration: float
    tol_y1: float = 1e-3
    tol_y2: float = 1e-2


def flatness_scenarios() -> dict[str, FlatnessScenario]:
    return {
        "gamma_a_step": FlatnessScenario(
            "gamma_a_step", "a",
            trajectory.SmoothStep(0.5, 4.5, 10.0 * DEG, 50.0 * DEG, k=3),
            trajectory.SmoothStep(0.5, 4.5, 30.0 * DEG, 5.0 * DEG, k=2),
            5.0, tol_y2=1e-3,
        ),
        "gamma_b_step": FlatnessScenario(
            "gamma_b_step", "b",
            trajectory.SmoothStep(0.5, 4.5, 45.0 * DEG, 135.0 * DEG, k=4),
            trajectory.SmoothStep(0.5, 4.5, 3.0, 5.0, k=2),
            5.0,
        ),
        "gamma_b_near_singular": FlatnessScenario(
            "gamma_b_near_singular", "b",
            trajectory.SmoothStep(0.5, 4.5, 85.0 * DEG, 95.0 * DEG, k=4),
            trajectory.SmoothStep(0.5, 4.5, 3.0, -9.3, k=2),
            5.0,
        ),
    }


def run_flatness_check(
    scenario: str | FlatnessScenario,
    dt: float = 1e-3,
    p: VehicleParams | None = None,
) -> dict[str, float | str | bool]:
    """Open-loop round trip: integrate the plant on the flat inputs and
    report the worst output deviation from the reference."""
    if isinstance(scenario, str):
        try:
            sc = flatness_scenarios()[scenario]
        except KeyError:
            raise ConfigError(f"unknown flatness scenario {scenario!r}") from None
    else:
        sc = scenario
    if p is None:
        p = VehicleParams()

    prev: flatness.FlatSample | None = None

    def sample(t: float) -> flatness.FlatSample:
        nonlocal prev
        if sc.kind == "a":
            pt = flatness.OutputPointA(sc.y1.eval(t, 3), sc.y2.eval(t, 2))
            s = flatness.flat_map_a(p, pt)
        else:
            ptb = flatness.OutputPointB(sc.y1.eval(t, 4), sc.y2.eval(t, 2))
            s = flatness.flat_map_b(p, ptb, prev)
        return s

    s0 = sample(0.0)
    prev = s0
    x = s0.state
    n = round(sc.duration / dt)
    dev1 = 0.0
    dev2 = 0.0
    for k in range(n):
        t = k * dt
        # input evaluated at the RK4 stage times for full fourth-order accuracy
        sm = sample(t + 0.5 * dt)
        se = sample(t + dt)
        sb = prev if prev is not None else sm
        ss = sample(t)
        stages = (ss, sm, sm, se)

        def deriv_at(xs: State, fs: flatness.FlatSample) -> tuple[float, ...]:
            return state_derivative(p, xs, fs.input)

        k1 = deriv_at(x, stages[0])
        xk = State(*(x[i] + 0.5 * dt * k1[i] for i in range(4)))
        k2 = deriv_at(xk, stages[1])
        xk = State(*(x[i] + 0.5 * dt * k2[i] for i in range(4)))
        k3 = deriv_at(xk, stages[2])
        xk = State(*(x[i] + dt * k3[i] for i in range(4)))
        k4 = deriv_at(xk, stages[3])
        x = State(
            *(x[i] + dt / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]) for i in range(4))
        )
        prev = se

        tn = t + dt
        dev1 = max(dev1, abs(x.phi - sc.y1.eval(tn, 0)[0]))
        if sc.kind == "a":
            dev2 = max(dev2, abs(x.theta - sc.y2.eval(tn, 0)[0]))
        else:
            tl = link_force(p, x, se.input)
            dev2 = max(dev2, abs(tl - sc.y2.eval(tn, 0)[0]))

    return {
        "scenario": sc.name,
        "max_dev_y1": dev1,
        "max_dev_y2": dev2,
        "tol_y1": sc.tol_y1,
        "tol_y2": sc.tol_y2,
        "passed": bool(dev1 <= sc.tol_y1 and dev2 <= sc.tol_y2),
    }


# -- observer demonstration ----------------------------------------------------


def run_observer_demo(cfg: SimConfig) -> dict[str, object]:
    """Closed-loop observer run reporting convergence and selection timing."""
    if cfg.feedback != "observer":
        cfg = cfg.with_params(feedback="observer")
    trace = run_closed_loop(cfg)
    err = np.array(
        [
            math.sqrt(
                wrap_angle(a[0] - b[0]) ** 2
                + (a[1] - b[1]) ** 2
                + wrap_angle(a[2] - b[2]) ** 2
                + (a[3] - b[3]) ** 2
            )
            for a, b in zip(trace.x, trace.x_hat)
        ]
    )
    norm = np.maximum(np.linalg.norm(trace.x, axis=1), 1e-9)
    rel = err / norm
    conv_time: float | None = None
    below = rel <= 0.01
    for i in range(len(below)):
        if below[i:].all():
            conv_time = float(trace.t[i])
            break
    correct_sign = 1.0 if np.median(trace.y2_ref) >= 0 else -1.0
    sel = trace.selected
    settle: float | None = None
    for i in range(len(sel)):
        if (sel[i:] == correct_sign).all():
            settle = float(trace.t[i])
            break
    return {
        "diverged": trace.diverged,
        "convergence_time_s": conv_time,
        "selection_settle_time_s": settle,
        "final_rel_error": float(rel[-1]),
        "final_etilde_plus": float(trace.etilde_plus[-1]),
        "final_etilde_minus": float(trace.etilde_minus[-1]),
        "trace": trace,
    }
