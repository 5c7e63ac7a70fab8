"""Feedback-linearizing tracking controllers with pole-placement outer loops.

Three laws are provided:

* ``gamma_a_static``  -- static linearization of (elevation, attitude);
  commands (f, tau) directly.
* ``gamma_a_dynamic`` -- same outputs with the thrust rate as input, so the
  thrust stays continuous; commands (f', tau) and the caller integrates the
  thrust compensator.
* ``gamma_b``         -- (elevation, link force) outputs; needs a double
  thrust compensator and commands (f'', tau).

Each law inverts a 2x2 decoupling matrix; near its singularity
(thrust parallel to the link for the A laws, zero thrust for B) the inverse
is replaced by a damped least-squares approximation that trades inversion
accuracy for a bounded command.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import ExtendedState, Input, State, VehicleParams


@dataclass(frozen=True)
class PolePlacement:
    """Error-dynamics poles and the induced feedback gains.

    ``gains[i]`` multiplies the i-th error derivative; they are the
    coefficients of ``prod(s - p_i)`` in ascending order, leading 1 dropped.
    """

    poles: tuple[float, ...]
    gains: tuple[float, ...] = field(init=False)

    def __post_init__(self) -> None:
        if not self.poles:
            raise ValueError("need at least one pole")
        if any(p >= 0.0 for p in self.poles):
            raise ValueError("poles must have negative real part")
        coeffs = np.poly(self.poles)  # descending, leading 1
        object.__setattr__(self, "gains", tuple(float(c) for c in coeffs[1:][::-1]))

    @property
    def order(self) -> int:
        return len(self.poles)


@dataclass(frozen=True)
class DlsConfig:
    """Damped least-squares activation threshold and damping factor.

    Blending engages when ``|det E| < det_threshold * ||E||_F^2``; the damped
    inverse bounds the command gain by ``1/(2*damping)`` along singular
    directions.
    """

    damping: float = 0.05
    det_threshold: float = 1e-3


DLS_DEFAULT = DlsConfig()


def dls_inverse(e: Sequence[Sequence[float]], c: float) -> np.ndarray:
    """Damped least-squares inverse E^T (E E^T + c^2 I)^-1 of a 2x2 matrix."""
    e = np.asarray(e, dtype=float)
    return e.T @ np.linalg.inv(e @ e.T + c * c * np.eye(2))


def _solve_2x2(
    e11: float, e12: float, e21: float, e22: float,
    b1: float, b2: float, dls: DlsConfig,
) -> tuple[float, float]:
    """Solve E u = b exactly, or via the damped inverse near singularity."""
    det = e11 * e22 - e12 * e21
    fro2 = e11 * e11 + e12 * e12 + e21 * e21 + e22 * e22
    if abs(det) >= dls.det_threshold * fro2:
        return (e22 * b1 - e12 * b2) / det, (e11 * b2 - e21 * b1) / det
    c2 = dls.damping * dls.damping
    # E* b = E^T (E E^T + c^2 I)^-1 b, written out for the 2x2 case
    g11 = e11 * e11 + e12 * e12 + c2
    g12 = e11 * e21 + e12 * e22
    g22 = e21 * e21 + e22 * e22 + c2
    gdet = g11 * g22 - g12 * g12
    w1 = (g22 * b1 - g12 * b2) / gdet
    w2 = (g11 * b2 - g12 * b1) / gdet
    return e11 * w1 + e21 * w2, e12 * w1 + e22 * w2


def outer_loop(
    ref_jet: Sequence[float], meas_jet: Sequence[float], gains: PolePlacement
) -> float:
    """Virtual input v = y_d^(r) + sum_i k_i (y_d^(i) - y^(i)).

    ``ref_jet`` carries orders 0..r of the reference, ``meas_jet`` orders
    0..r-1 of the measured output, with r the channel's relative degree.
    """
    r = gains.order
    if len(ref_jet) != r + 1 or len(meas_jet) != r:
        raise ValueError(f"jet orders do not match relative degree {r}")
    v = ref_jet[r]
    for i, k in enumerate(gains.gains):
        v += k * (ref_jet[i] - meas_jet[i])
    return v


def gamma_a_static(
    p: VehicleParams, x: State, v: tuple[float, float], dls: DlsConfig = DLS_DEFAULT
) -> Input:
    """Static law for (elevation, attitude): u = E^-1 (v - b)."""
    cz = math.cos(x.phi + x.theta)
    b1 = p.a1 * math.cos(x.phi)
    f, tau = _solve_2x2(p.a2 * cz, 0.0, 0.0, p.a3, v[0] - b1, v[1], dls)
    return Input(f, tau)


def gamma_a_dynamic(
    p: VehicleParams,
    x: State,
    u1: float,
    v: tuple[float, float],
    dls: DlsConfig = DLS_DEFAULT,
) -> tuple[float, float]:
    """Dynamic law for (elevation, attitude): returns (u1_dot, tau).

    The elevation channel is linearized at order 3 through the thrust-rate
    input; the drift is b = -a1*sin(x1)*x2 - a2*sin(x1+x3)*(x2+x4)*u1.
    """
    z1 = x.phi + x.theta
    b1 = -p.a1 * math.sin(x.phi) * x.phi_dot - p.a2 * math.sin(z1) * (
        x.phi_dot + x.theta_dot
    ) * u1
    return _solve_2x2(
        p.a2 * math.cos(z1), 0.0, 0.0, p.a3, v[0] - b1, v[1], dls
    )


def _drift_b(p: VehicleParams, xs: ExtendedState) -> tuple[float, float]:
    """Drift of (y1^(4), y2^(2)) for the extended (elevation, link force) system.

    Hard-coded from offline symbolic differentiation of the output chain
    along the plant dynamics; the finite-difference decoupling tests keep it
    honest.
    """
    x = xs.state
    u1, du1 = xs.u1, xs.u1_dot
    z1 = x.phi + x.theta
    s1, c1 = math.sin(x.phi), math.cos(x.phi)
    sz, cz = math.sin(z1), math.cos(z1)
    w = x.phi_dot
    zr = x.phi_dot + x.theta_dot

    acc = p.a1 * c1 + p.a2 * cz * u1  # y1''
    jerk = -p.a1 * s1 * w - p.a2 * sz * zr * u1 + p.a2 * cz * du1  # y1^(3)

    b1 = (
        -p.a1 * c1 * w * w
        - (p.a1 * s1 + p.a2 * sz * u1) * acc
        - p.a2 * cz * zr * zr * u1
        - 2.0 * p.a2 * sz * zr * du1
    )
    b2 = (
        (2.0 / p.a2) * (acc * acc + w * jerk)
        + (p.a1 / p.a2) * (-s1 * w * w + c1 * acc)
        - sz * zr * zr * u1
        + cz * u1 * acc
        + 2.0 * cz * zr * du1
    )
    return b1, b2


def decoupling_b(p: VehicleParams, xs: ExtendedState) -> tuple[float, float, float, float]:
    """Rows of the (elevation, link force) decoupling matrix; det = a2*a3*u1."""
    z1 = xs.state.phi + xs.state.theta
    sz, cz = math.sin(z1), math.cos(z1)
    return p.a2 * cz, -p.a2 * p.a3 * sz * xs.u1, sz, p.a3 * cz * xs.u1


def gamma_b(
    p: VehicleParams,
    xs: ExtendedState,
    v: tuple[float, float],
    dls: DlsConfig = DLS_DEFAULT,
) -> tuple[float, float]:
    """Dynamic law for (elevation, link force): returns (u1_ddot, tau)."""
    b1, b2 = _drift_b(p, xs)
    e11, e12, e21, e22 = decoupling_b(p, xs)
    return _solve_2x2(e11, e12, e21, e22, v[0] - b1, v[1] - b2, dls)


def output_jets_a(p: VehicleParams, x: State) -> tuple[tuple[float, float], tuple[float, float]]:
    """Measured jets (orders 0..1 per channel) for the static A law."""
    return (x.phi, x.phi_dot), (x.theta, x.theta_dot)


def output_jets_a_prime(
    p: VehicleParams, x: State, u1: float
) -> tuple[tuple[float, float, float], tuple[float, float]]:
    """Measured jets (orders 0..2 / 0..1) for the dynamic A law."""
    acc = p.a1 * math.cos(x.phi) + p.a2 * math.cos(x.phi + x.theta) * u1
    return (x.phi, x.phi_dot, acc), (x.theta, x.theta_dot)


def output_jets_b(
    p: VehicleParams, xs: ExtendedState
) -> tuple[tuple[float, float, float, float], tuple[float, float]]:
    """Measured jets (orders 0..3 / 0..1) for the B law, closed form in x-bar."""
    x = xs.state
    u1, du1 = xs.u1, xs.u1_dot
    z1 = x.phi + x.theta
    s1, c1 = math.sin(x.phi), math.cos(x.phi)
    sz, cz = math.sin(z1), math.cos(z1)
    w = x.phi_dot
    zr = x.phi_dot + x.theta_dot

    acc = p.a1 * c1 + p.a2 * cz * u1
    jerk = -p.a1 * s1 * w - p.a2 * sz * zr * u1 + p.a2 * cz * du1
    y2 = w * w / p.a2 + (p.a1 / p.a2) * s1 + sz * u1
    dy2 = 2.0 * w * acc / p.a2 + (p.a1 / p.a2) * c1 * w + cz * zr * u1 + sz * du1
    return (x.phi, w, acc, jerk), (y2, dy2)


@dataclass
class ControllerA:
    """Static (elevation, attitude) tracker; no internal state."""

    gains_y1: PolePlacement
    gains_y2: PolePlacement
    dls: DlsConfig = DLS_DEFAULT

    def command(
        self,
        p: VehicleParams,
        x: State,
        ref1: Sequence[float],
        ref2: Sequence[float],
    ) -> tuple[Input, tuple[float, float]]:
        jets1, jets2 = output_jets_a(p, x)
        v = (outer_loop(ref1, jets1, self.gains_y1), outer_loop(ref2, jets2, self.gains_y2))
        return gamma_a_static(p, x, v, self.dls), v


@dataclass
class ControllerAPrime:
    """Dynamic (elevation, attitude) tracker with a thrust compensator ``u1``."""

    gains_y1: PolePlacement
    gains_y2: PolePlacement
    dls: DlsConfig = DLS_DEFAULT
    u1: float = 0.0

    def command(
        self,
        p: VehicleParams,
        x: State,
        ref1: Sequence[float],
        ref2: Sequence[float],
    ) -> tuple[tuple[float, float], tuple[float, float]]:
        jets1, jets2 = output_jets_a_prime(p, x, self.u1)
        v = (outer_loop(ref1, jets1, self.gains_y1), outer_loop(ref2, jets2, self.gains_y2))
        return gamma_a_dynamic(p, x, self.u1, v, self.dls), v


@dataclass
class ControllerB:
    """Dynamic (elevation, link force) tracker with compensator ``(u1, u1_dot)``."""

    gains_y1: PolePlacement
    gains_y2: PolePlacement
    dls: DlsConfig = DLS_DEFAULT
    u1: float = 0.0
    u1_dot: float = 0.0

    def command(
        self,
        p: VehicleParams,
        x: State,
        ref1: Sequence[float],
        ref2: Sequence[float],
    ) -> tuple[tuple[float, float], tuple[float, float]]:
        xs = ExtendedState(x, self.u1, self.u1_dot)
        jets1, jets2 = output_jets_b(p, xs)
        v = (outer_loop(ref1, jets1, self.gains_y1), outer_loop(ref2, jets2, self.gains_y2))
        return gamma_b(p, xs, v, self.dls), v
