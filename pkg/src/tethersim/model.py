"""Rigid-body model of a planar aerial vehicle tethered to the ground.

The vehicle moves in the vertical x-z plane at the end of a passive link
(cable or bar) of fixed length ``l`` pinned at the world origin.  The
configuration is ``q = (phi, theta)`` where ``phi`` is the link elevation
relative to the horizontal world x axis and ``theta`` is the vehicle pitch.

Frame and sign conventions
--------------------------
* world: ``x_W`` horizontal, ``z_W`` up; the vehicle CoM sits on the circle
  ``p = l * d(phi)`` with ``d = [cos(phi), sin(phi)]``.
* body axes (in world coordinates): ``x_B = [-cos(theta), sin(theta)]``,
  ``z_B = [-sin(theta), -cos(theta)]``.  The thrust force is ``-f * z_B``,
  so at ``theta = 0`` the body z axis points down and positive thrust
  pushes straight up.
* link force ``t_L`` is positive in tension (cable taut) and negative in
  compression (bar pushed).

State-space form, with ``a1 = -g/l``, ``a2 = 1/(m_R*l)``, ``a3 = 1/J_R``::

    x = [phi, phi_dot, theta, theta_dot]
    x1' = x2
    x2' = a1*cos(x1) + a2*cos(x1+x3)*f
    x3' = x4
    x4' = a3*tau

The onboard IMU provides the specific acceleration of the CoM expressed in
body axes (two-axis accelerometer) plus the pitch rate (gyroscope).

A more general plant variant adds a uniform link mass ``m_L`` and a CoM to
attachment-point offset ``r_BL = (r_x, r_z)`` in body axes.  Its terms are
derived from the Lagrangian of the two-body system and reduce exactly to
the nominal model when the extra parameters vanish.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

GRAVITY = 9.81


def wrap_angle(a: float) -> float:
    """Unique representative of ``a`` in (-pi, pi].

    State angles stay unwrapped everywhere; only innovation and metric
    computations reduce differences to the principal interval.
    """
    r = math.remainder(a, math.tau)
    if r <= -math.pi:
        r += math.tau
    return r


class ModelError(ValueError):
    """Base class for model construction/evaluation failures."""


class SingularMassMatrix(ModelError):
    """Combined mass matrix of the general plant is numerically singular."""


class State(NamedTuple):
    """Plant state [phi, phi_dot, theta, theta_dot] (rad, rad/s)."""

    phi: float
    phi_dot: float
    theta: float
    theta_dot: float


class Input(NamedTuple):
    """Control input: thrust intensity f (N) and pitch torque tau (N m)."""

    f: float
    tau: float


class ExtendedState(NamedTuple):
    """State extended with the thrust compensator (u1, u1_dot)."""

    state: State
    u1: float
    u1_dot: float


class ImuReading(NamedTuple):
    """Body-axis specific accelerations (m/s^2) and pitch rate (rad/s)."""

    a_x: float
    a_z: float
    omega: float


@dataclass(frozen=True)
class VehicleParams:
    """Physical constants with the derived coefficients a1, a2, a3 attached.

    The derived values are computed once at construction so hot loops never
    recompute them; use :func:`dataclasses.replace` (or :meth:`perturbed`)
    to mutate, which re-establishes the invariants.
    """

    m_r: float = 1.0
    j_r: float = 0.25
    l: float = 2.0
    g: float = GRAVITY
    a1: float = field(init=False, repr=False)
    a2: float = field(init=False, repr=False)
    a3: float = field(init=False, repr=False)

    def __post_init__(self) -> None:
        for name in ("m_r", "j_r", "l", "g"):
            if not getattr(self, name) > 0.0:
                raise ModelError(f"{name} must be positive")
        object.__setattr__(self, "a1", -self.g / self.l)
        object.__setattr__(self, "a2", 1.0 / (self.m_r * self.l))
        object.__setattr__(self, "a3", 1.0 / self.j_r)

    def perturbed(
        self, delta_m_r: float = 0.0, delta_l: float = 0.0, delta_j_r: float = 0.0
    ) -> "VehicleParams":
        """Relative parameter variation: the returned params are (1+delta)*true."""
        return replace(
            self,
            m_r=(1.0 + delta_m_r) * self.m_r,
            l=(1.0 + delta_l) * self.l,
            j_r=(1.0 + delta_j_r) * self.j_r,
        )


@dataclass(frozen=True)
class GeneralParams:
    """Non-idealities: link mass/inertia and CoM to attachment offset (body axes)."""

    m_l: float = 0.0
    j_l: float = 0.0
    r_x: float = 0.0
    r_z: float = 0.0

    def __post_init__(self) -> None:
        if self.m_l < 0.0 or self.j_l < 0.0:
            raise ModelError("link mass and inertia must be non-negative")

    @classmethod
    def thin_rod(
        cls, m_l: float, l: float, r_x: float = 0.0, r_z: float = 0.0
    ) -> "GeneralParams":
        """Uniform thin-rod link of mass ``m_l``: j_l = m_l*l^2/12."""
        return cls(m_l=m_l, j_l=m_l * l * l / 12.0, r_x=r_x, r_z=r_z)

    @property
    def is_zero(self) -> bool:
        return self.m_l == 0.0 and self.j_l == 0.0 and self.r_x == 0.0 and self.r_z == 0.0


def state_derivative(p: VehicleParams, x: State, u: Input) -> tuple[float, float, float, float]:
    """Nominal plant dynamics, returned as (phi', phi'', theta', theta'')."""
    return (
        x.phi_dot,
        p.a1 * math.cos(x.phi) + p.a2 * math.cos(x.phi + x.theta) * u.f,
        x.theta_dot,
        p.a3 * u.tau,
    )


def link_force(p: VehicleParams, x: State, u: Input) -> float:
    """Axial internal link force t_L; positive = tension, negative = compression."""
    return (
        x.phi_dot * x.phi_dot / p.a2
        + (p.a1 / p.a2) * math.sin(x.phi)
        + math.sin(x.phi + x.theta) * u.f
    )


def imu_measure(p: VehicleParams, x: State, u: Input) -> ImuReading:
    """Noise-free IMU reading for the nominal plant.

    The accelerometer pair is the CoM specific acceleration expressed in
    body axes.  Both components share the factor
    ``F = phi_dot^2 + a1*sin(phi) + a2*sin(phi+theta)*f`` (which equals
    ``a2 * t_L``); the thrust adds ``-f/m_R`` along the body z axis.
    """
    z1 = x.phi + x.theta
    factor = (
        x.phi_dot * x.phi_dot
        + p.a1 * math.sin(x.phi)
        + p.a2 * math.sin(z1) * u.f
    )
    a_x = p.l * math.cos(z1) * factor
    a_z = p.l * math.sin(z1) * factor - u.f / p.m_r
    return ImuReading(a_x, a_z, x.theta_dot)


def _general_mass_and_rhs(
    p: VehicleParams, gp: GeneralParams, x: State, u: Input
) -> tuple[float, float, float, float, float]:
    """Assemble the combined 2x2 mass matrix and force vector of the general plant."""
    z1 = x.phi + x.theta
    sz, cz = math.sin(z1), math.cos(z1)
    st, ct = math.sin(x.theta), math.cos(x.theta)

    m11 = p.m_r * p.l * p.l + gp.m_l * p.l * p.l / 4.0 + gp.j_l
    m12 = -p.m_r * p.l * (gp.r_x * cz + gp.r_z * sz)
    m22 = p.j_r + p.m_r * (gp.r_x * gp.r_x + gp.r_z * gp.r_z)

    # Coriolis/centrifugal coupling, gravity, and input maps.
    cbar = p.m_r * p.l * (gp.r_x * sz - gp.r_z * cz)
    g1 = (p.m_r + gp.m_l / 2.0) * p.l * p.g * math.cos(x.phi)
    g2 = -p.m_r * p.g * (gp.r_x * ct + gp.r_z * st)
    q1 = p.l * cz * u.f
    q2 = -gp.r_x * u.f + u.tau

    rhs1 = q1 - cbar * x.theta_dot * x.theta_dot - g1
    rhs2 = q2 - cbar * x.phi_dot * x.phi_dot - g2
    return m11, m12, m22, rhs1, rhs2


def general_accelerations(
    p: VehicleParams, gp: GeneralParams, x: State, u: Input
) -> tuple[float, float]:
    """Solve the general plant for (phi_ddot, theta_ddot) via the 2x2 inverse."""
    m11, m12, m22, rhs1, rhs2 = _general_mass_and_rhs(p, gp, x, u)
    det = m11 * m22 - m12 * m12
    if abs(det) < 1e-12:
        raise SingularMassMatrix(f"combined mass matrix determinant {det:g}")
    phi_dd = (m22 * rhs1 - m12 * rhs2) / det
    theta_dd = (m11 * rhs2 - m12 * rhs1) / det
    return phi_dd, theta_dd


def general_state_derivative(
    p: VehicleParams, gp: GeneralParams, x: State, u: Input
) -> tuple[float, float, float, float]:
    """General plant dynamics; equals :func:`state_derivative` when gp is zero."""
    phi_dd, theta_dd = general_accelerations(p, gp, x, u)
    return (x.phi_dot, phi_dd, x.theta_dot, theta_dd)


def imu_measure_general(
    p: VehicleParams,
    gp: GeneralParams,
    x: State,
    q_ddot: tuple[float, float],
) -> ImuReading:
    """IMU reading under the general plant given its accelerations ``q_ddot``.

    The CoM sits at ``p_B = l*d(phi) - R(theta)*r_BL``; differentiating twice
    and projecting the specific acceleration onto the body axes gives::

        a_x =  l*sin(z1)*phi'' + l*cos(z1)*phi'^2 + r_x*theta'^2
               - r_z*theta'' + g*sin(theta)
        a_z = -l*cos(z1)*phi'' + l*sin(z1)*phi'^2 + r_z*theta'^2
               + r_x*theta'' - g*cos(theta)

    with ``z1 = phi + theta``; reduces to :func:`imu_measure` for zero gp.
    """
    phi_dd, theta_dd = q_ddot
    z1 = x.phi + x.theta
    sz, cz = math.sin(z1), math.cos(z1)
    w2 = x.phi_dot * x.phi_dot
    t2 = x.theta_dot * x.theta_dot
    a_x = p.l * sz * phi_dd + p.l * cz * w2 + gp.r_x * t2 - gp.r_z * theta_dd + p.g * math.sin(x.theta)
    a_z = -p.l * cz * phi_dd + p.l * sz * w2 + gp.r_z * t2 + gp.r_x * theta_dd - p.g * math.cos(x.theta)
    return ImuReading(a_x, a_z, x.theta_dot)


def link_force_general(
    p: VehicleParams,
    gp: GeneralParams,
    x: State,
    u: Input,
    q_ddot: tuple[float, float] | None = None,
) -> float:
    """Axial component of the attachment-point constraint force, general plant.

    Obtained from the vehicle translational balance
    ``F_A = m_R*p_B'' + f*z_B + m_R*g*z_W`` projected on ``-d``;  reduces to
    :func:`link_force` when gp is zero.
    """
    if q_ddot is None:
        q_ddot = general_accelerations(p, gp, x, u)
    phi_dd, theta_dd = q_ddot
    z1 = x.phi + x.theta
    sp_, cp_ = math.sin(x.phi), math.cos(x.phi)
    st, ct = math.sin(x.theta), math.cos(x.theta)
    # p_B'' = l*dperp*phi'' - l*d*phi'^2 + R*r_BL*theta'^2 - Rbar*r_BL*theta''
    rx_w = -gp.r_x * ct - gp.r_z * st  # (R*r_BL) world x
    rz_w = gp.r_x * st - gp.r_z * ct  # (R*r_BL) world z
    rbx_w = gp.r_x * st - gp.r_z * ct  # (Rbar*r_BL) world x
    rbz_w = gp.r_x * ct + gp.r_z * st  # (Rbar*r_BL) world z
    w2 = x.phi_dot * x.phi_dot
    t2 = x.theta_dot * x.theta_dot
    acc_x = -p.l * sp_ * phi_dd - p.l * cp_ * w2 + rx_w * t2 - rbx_w * theta_dd
    acc_z = p.l * cp_ * phi_dd - p.l * sp_ * w2 + rz_w * t2 - rbz_w * theta_dd
    f_ax = p.m_r * acc_x - u.f * st
    f_az = p.m_r * acc_z - u.f * ct + p.m_r * p.g
    return -(cp_ * f_ax + sp_ * f_az)


def pendulum_energy(p: VehicleParams, x: State) -> float:
    """Mechanical energy of the elevation subsystem (zero-input invariant)."""
    return 0.5 * p.m_r * p.l * p.l * x.phi_dot * x.phi_dot + p.m_r * p.g * p.l * math.sin(x.phi)
