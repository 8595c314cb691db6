"""Digamma, trigamma and log-gamma for positive real arguments.

Digamma and trigamma shift the argument upward with the unit recurrence
until it reaches ``_ASYMPTOTIC_FROM`` and then evaluate the Bernoulli-number
asymptotic expansion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class MathConstants:
    euler_gamma: float = 0.5772156649015329
    pi_sq_over_6: float = math.pi**2 / 6.0


CONSTANTS = MathConstants()
EULER_GAMMA = CONSTANTS.euler_gamma
PI_SQ_OVER_6 = CONSTANTS.pi_sq_over_6

_ASYMPTOTIC_FROM = 10.0

# B_{2k} / (2k) for k = 1..7
_DIGAMMA_COEFFS = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)
# B_{2k} for k = 1..7
_TRIGAMMA_COEFFS = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
)


class DomainError(ValueError):
    """Argument outside the positive real axis."""


def _check(x, name):
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"{name} requires a finite x > 0, got {x!r}")
    return x


def digamma(x: float) -> float:
    """Logarithmic derivative of the gamma function, psi(x), for x > 0."""
    x = _check(x, "digamma")
    shift = []
    while x < _ASYMPTOTIC_FROM:
        shift.append(1.0 / x)
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = 0.0
    for c in reversed(_DIGAMMA_COEFFS):
        series = series * inv2 + c
    series *= inv2
    asym = math.log(x) - 0.5 / x - series
    if not shift:
        return asym
    return math.fsum([asym] + [-s for s in shift])


def trigamma(x: float) -> float:
    """Derivative of digamma, psi'(x), for x > 0. Always positive."""
    x = _check(x, "trigamma")
    shift = []
    while x < _ASYMPTOTIC_FROM:
        shift.append(1.0 / (x * x))
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    series = 0.0
    for c in reversed(_TRIGAMMA_COEFFS):
        series = series * inv2 + c
    series *= inv2 * inv
    asym = inv + 0.5 * inv2 + series
    if not shift:
        return asym
    return math.fsum([asym] + shift)


def log_gamma(x: float) -> float:
    """Natural log of the gamma function for x > 0."""
    x = _check(x, "log_gamma")
    return math.lgamma(x)


def log_beta(a: float, b: float) -> float:
    """log B(a, b) for a, b > 0."""
    return log_gamma(a) + log_gamma(b) - log_gamma(a + b)
