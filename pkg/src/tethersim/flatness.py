"""Differential-flatness maps from output trajectories to states and inputs.

Two flat output pairs are supported:

* pair A: (elevation, attitude).  The state is read off directly and the
  inputs follow from inverting the dynamics; singular whenever
  ``phi + theta = pi/2 + k*pi`` (thrust parallel to the link).
* pair B: (elevation, link force).  The force balance
  ``f * z_B = r(y1, y1', y1'', y2)`` determines thrust magnitude and
  attitude up to a facing-up/facing-down branch; attitude rate, torque and
  thrust rate follow by differentiating that relation along the output jets.

Derivative propagation for pair B uses second-order truncated jets
(value, d/dt, d2/dt2), so the chain rule is applied mechanically instead of
maintaining page-long hand expansions; finite-difference tests pin the
results down.
"""

from __future__ import annotations

import math
from typing import NamedTuple

from .model import Input, State, VehicleParams


class FlatnessError(ValueError):
    """Base class for flat-map failures."""


class FlatSingularityA(FlatnessError):
    """Output pair A hit the structural singularity phi + theta = pi/2 + k*pi."""


class VanishingThrust(FlatnessError):
    """Force vector and its first derivative both vanish; attitude undetermined."""


class OutputPointA(NamedTuple):
    """Output jets for pair A: y1 = elevation to order 3, y2 = attitude to order 2."""

    y1: tuple[float, float, float, float]
    y2: tuple[float, float, float]


class OutputPointB(NamedTuple):
    """Output jets for pair B: y1 = elevation to order 4, y2 = link force to order 2."""

    y1: tuple[float, float, float, float, float]
    y2: tuple[float, float, float]


class FlatSample(NamedTuple):
    """State/input sample consistent with an output point.

    ``u1_sign`` tags the facing-up (+1) / facing-down (-1) branch used for
    pair B; pair A has no branch and simply records the sign of the thrust.
    """

    state: State
    input: Input
    u1_dot: float
    u1_sign: int


# -- order-2 jet arithmetic (value, first and second time derivative) --------

Jet = tuple[float, float, float]


def _jconst(c: float) -> Jet:
    return (c, 0.0, 0.0)


def _jadd(a: Jet, b: Jet) -> Jet:
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def _jsub(a: Jet, b: Jet) -> Jet:
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def _jscale(a: Jet, c: float) -> Jet:
    return (a[0] * c, a[1] * c, a[2] * c)


def _jmul(a: Jet, b: Jet) -> Jet:
    return (
        a[0] * b[0],
        a[1] * b[0] + a[0] * b[1],
        a[2] * b[0] + 2.0 * a[1] * b[1] + a[0] * b[2],
    )


def _jsin(a: Jet) -> Jet:
    s, c = math.sin(a[0]), math.cos(a[0])
    return (s, c * a[1], -s * a[1] * a[1] + c * a[2])


def _jcos(a: Jet) -> Jet:
    s, c = math.sin(a[0]), math.cos(a[0])
    return (c, -s * a[1], -c * a[1] * a[1] - s * a[2])


def _jsqrt(a: Jet) -> Jet:
    root = math.sqrt(a[0])
    d1 = a[1] / (2.0 * root)
    d2 = a[2] / (2.0 * root) - a[1] * a[1] / (4.0 * root ** 3)
    return (root, d1, d2)


def r_jets(p: VehicleParams, pt: OutputPointB) -> tuple[Jet, Jet]:
    """Jets (value, d/dt, d2/dt2) of the planar force-vector components r1, r3."""
    y1 = (pt.y1[0], pt.y1[1], pt.y1[2])
    y1_d = (pt.y1[1], pt.y1[2], pt.y1[3])
    y1_dd = (pt.y1[2], pt.y1[3], pt.y1[4])
    y2 = pt.y2

    c = _jcos(y1)
    s = _jsin(y1)
    ml = p.m_r * p.l
    # P = m_R*l*y1'^2 - y2 multiplies d; the y1'' term rides on dperp.
    pterm = _jsub(_jscale(_jmul(y1_d, y1_d), ml), y2)
    r1 = _jadd(_jmul(pterm, c), _jscale(_jmul(y1_dd, s), ml))
    r3 = _jsub(_jmul(pterm, s), _jscale(_jmul(y1_dd, c), ml))
    r3 = _jsub(r3, _jconst(p.m_r * p.g))
    return r1, r3


def r_vector(p: VehicleParams, pt: OutputPointB) -> tuple[float, float, float]:
    """Force vector r = -m_R*p'' - y2*d - m_R*g*z_W; planar, so r2 = 0."""
    r1, r3 = r_jets(p, pt)
    return (r1[0], 0.0, r3[0])


def flat_map_a(
    p: VehicleParams, pt: OutputPointA, eps_sing: float = 1e-6
) -> FlatSample:
    """State and input consistent with an (elevation, attitude) output point."""
    y1, dy1, ddy1, d3y1 = pt.y1
    y2, dy2, ddy2 = pt.y2
    denom_angle = y1 + y2
    cd = math.cos(denom_angle)
    if abs(cd) <= eps_sing:
        raise FlatSingularityA(f"cos(phi+theta) = {cd:g}")
    num = ddy1 - p.a1 * math.cos(y1)
    den = p.a2 * cd
    u1 = num / den
    # quotient rule for u1_dot; needs y1 jet order 3 and y2 jet order 1
    num_dot = d3y1 + p.a1 * math.sin(y1) * dy1
    den_dot = -p.a2 * math.sin(denom_angle) * (dy1 + dy2)
    u1_dot = (num_dot * den - num * den_dot) / (den * den)
    u2 = ddy2 / p.a3
    state = State(y1, dy1, y2, dy2)
    return FlatSample(state, Input(u1, u2), u1_dot, 1 if u1 >= 0.0 else -1)


def _branch_sign(theta_candidate: float, prev_theta: float | None) -> int:
    """Pick the branch whose attitude is closest (mod 2*pi) to the previous one."""
    if prev_theta is None:
        return 1
    d = math.remainder(theta_candidate - prev_theta, math.tau)
    return 1 if abs(d) <= math.pi / 2.0 else -1


def _unwrap_near(theta: float, prev_theta: float | None) -> float:
    """Shift theta by a whole number of turns to sit next to the previous one."""
    if prev_theta is None:
        return theta
    return theta + math.tau * round((prev_theta - theta) / math.tau)


def flat_map_b(
    p: VehicleParams,
    pt: OutputPointB,
    prev: FlatSample | None = None,
    eps_r: float = 1e-9,
) -> FlatSample:
    """State and input consistent with an (elevation, link force) output point.

    The two solutions (facing up / facing down) share the physical force
    vector ``u1 * z_B = r``; the branch is seeded facing up (positive
    thrust) and thereafter follows the previous sample's attitude.  When
    ``r`` vanishes but ``r'`` does not, the direction of ``r'`` defines the
    attitude and thrust rate (order-1 fallback); if both vanish the
    rotational motion is undetermined and :class:`VanishingThrust` is raised.
    """
    r1, r3 = r_jets(p, pt)
    rho = r1[0] * r1[0] + r3[0] * r3[0]
    norm = math.sqrt(rho)

    if norm <= eps_r:
        dnorm2 = r1[1] * r1[1] + r3[1] * r3[1]
        if math.sqrt(dnorm2) <= eps_r:
            raise VanishingThrust("force vector and its rate both vanish")
        # order-1 fallback: u1 = 0, u1' * z_B = r'
        sign = 1
        theta = math.atan2(-r1[1], -r3[1])
        if prev is not None:
            sign = _branch_sign(theta, prev.state.theta)
            if sign < 0:
                theta = math.atan2(r1[1], r3[1])
            theta = _unwrap_near(theta, prev.state.theta)
        u1_dot = sign * math.sqrt(dnorm2)
        theta_dot = (r1[2] * r3[1] - r1[1] * r3[2]) / dnorm2
        state = State(pt.y1[0], pt.y1[1], theta, theta_dot)
        # torque would need the third derivative of r, beyond the carried jets
        return FlatSample(state, Input(0.0, 0.0), u1_dot, sign)

    theta_plus = math.atan2(-r1[0], -r3[0])
    sign = _branch_sign(theta_plus, prev.state.theta if prev is not None else None)
    theta = theta_plus if sign > 0 else math.atan2(r1[0], r3[0])
    theta = _unwrap_near(theta, prev.state.theta if prev is not None else None)
    u1 = sign * norm
    u1_dot = sign * (r1[0] * r1[1] + r3[0] * r3[1]) / norm

    num = r1[1] * r3[0] - r1[0] * r3[1]
    theta_dot = num / rho
    num_dot = r1[2] * r3[0] - r1[0] * r3[2]
    rho_dot = 2.0 * (r1[0] * r1[1] + r3[0] * r3[1])
    theta_ddot = num_dot / rho - num * rho_dot / (rho * rho)
    u2 = theta_ddot / p.a3

    state = State(pt.y1[0], pt.y1[1], theta, theta_dot)
    return FlatSample(state, Input(u1, u2), u1_dot, sign)
