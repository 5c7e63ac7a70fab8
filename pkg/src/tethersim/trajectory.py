"""Smooth-step references: polynomial blends with exact derivatives.

A step of continuity order ``k`` blends two constants with the minimal-order
odd polynomial (degree ``2k+1``) whose derivatives 1..k vanish at both ends,
so the reference is C^k on the whole real line and analytically
differentiable to any order in between.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction


class OrderUnavailable(ValueError):
    """Requested a derivative order beyond what the step's continuity supports."""


def _blend_coefficients(k: int) -> list[float]:
    """Coefficients (ascending powers) of B(s) = N * integral s^k (1-s)^k ds."""
    norm = Fraction(math.factorial(2 * k + 1), math.factorial(k) ** 2)
    coeffs = [Fraction(0)] * (2 * k + 2)
    for j in range(k + 1):
        c = norm * Fraction((-1) ** j * math.comb(k, j), k + j + 1)
        coeffs[k + j + 1] = c
    return [float(c) for c in coeffs]


def _poly_derivative(coeffs: list[float]) -> list[float]:
    return [i * c for i, c in enumerate(coeffs)][1:]


def _horner(coeffs: list[float], s: float) -> float:
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * s + c
    return acc


@dataclass(frozen=True)
class SmoothStep:
    """C^k step from ``y0`` at ``t0`` to ``yf`` at ``tf``.

    ``eval`` returns the jet (value, d/dt, ..., d^max_order/dt^max_order);
    orders up to ``k+1`` are available, all higher endpoint derivatives of
    the blend vanish through order ``k`` so the jet is continuous.
    """

    t0: float
    tf: float
    y0: float
    yf: float
    k: int = 4
    _derivs: tuple[tuple[float, ...], ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.tf <= self.t0:
            raise ValueError("tf must exceed t0")
        if self.k < 1:
            raise ValueError("continuity order k must be >= 1")
        table = [_blend_coefficients(self.k)]
        for _ in range(self.k + 1):
            table.append(_poly_derivative(table[-1]))
        object.__setattr__(self, "_derivs", tuple(tuple(c) for c in table))

    @property
    def duration(self) -> float:
        return self.tf - self.t0

    def eval(self, t: float, max_order: int) -> tuple[float, ...]:
        if max_order > self.k + 1:
            raise OrderUnavailable(
                f"order {max_order} unavailable for continuity k={self.k}"
            )
        if t <= self.t0:
            return (self.y0,) + (0.0,) * max_order
        if t >= self.tf:
            return (self.yf,) + (0.0,) * max_order
        span = self.tf - self.t0
        s = (t - self.t0) / span
        dy = self.yf - self.y0
        jet = [self.y0 + dy * _horner(self._derivs[0], s)]
        scale = 1.0
        for n in range(1, max_order + 1):
            scale /= span
            jet.append(dy * _horner(self._derivs[n], s) * scale)
        return tuple(jet)


@dataclass(frozen=True)
class ConstantReference:
    """Degenerate reference holding a fixed value (all derivatives zero)."""

    value: float

    def eval(self, t: float, max_order: int) -> tuple[float, ...]:
        return (self.value,) + (0.0,) * max_order
