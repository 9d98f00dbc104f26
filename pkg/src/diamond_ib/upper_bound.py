"""Informed-receiver upper bound with cooperating relays.

Granting the destination full channel knowledge and letting both relays pool
their observations turns the diamond into a single ``(N1 + N2) x M`` MIMO
link behind a ``C1 + C2`` bottleneck. The bound is then an integral over the
unordered eigenvalue of ``H H^H`` with a water level ``nu`` chosen so that
the compression rate equals the total fronthaul capacity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelConfig
from .matrix_stat import DEFAULT_QUAD, EigSpec, Quadrature, integrate_semi_infinite

__all__ = [
    "BracketError",
    "UpperBoundResult",
    "bottleneck_residual",
    "solve_nu",
    "unconstrained_capacity",
    "upper_bound_rate",
]

NU_BRACKET = (1e-12, 1e12)


class BracketError(RuntimeError):
    """No sign change of the bottleneck residual inside the allowed range."""


@dataclass(frozen=True)
class UpperBoundResult:
    rate: float
    nu: float
    spec: EigSpec


def _cutoff(spec: EigSpec) -> float:
    return spec.tail_point(1e-17)


def _bulk_points(spec: EigSpec, lower: float, upper: float):
    pts = [lower * m for m in (2.0, 10.0, 100.0)] + [0.1, 1.0, float(spec.S), 2.0 * spec.S]
    return [p for p in pts if lower < p < upper]


def bottleneck_residual(spec: EigSpec, sigma2: float, nu: float, c_sum: float,
                        quad: Quadrature = DEFAULT_QUAD) -> float:
    """Per-eigenvalue compression rate at water level ``nu`` minus ``c_sum / T``."""
    if nu <= 0:
        raise ValueError("nu must be positive")
    lo = nu * sigma2
    hi = _cutoff(spec)
    if lo >= hi:
        return -c_sum / spec.T
    val = integrate_semi_infinite(
        lambda x: math.log2(x / lo) * spec.pdf(x), lo, quad, upper=hi,
        points=_bulk_points(spec, lo, hi))
    return val - c_sum / spec.T


def solve_nu(spec: EigSpec, sigma2: float, c_sum: float, tol: float = 1e-10,
             quad: Quadrature = DEFAULT_QUAD) -> float:
    """Water level meeting the bottleneck constraint, by bisection in ``log nu``.

    The bracket starts at ``NU_BRACKET`` and is widened geometrically (up to
    1e-300 on the left) until the residual changes sign.
    """
    if c_sum <= 0:
        raise ValueError("c_sum must be positive")

    def g(log_nu):
        return bottleneck_residual(spec, sigma2, math.exp(log_nu), c_sum, quad)

    a, b = math.log(NU_BRACKET[0]), math.log(NU_BRACKET[1])
    ga, gb = g(a), g(b)
    while ga < 0:
        a -= 10.0
        if a < math.log(1e-300):
            raise BracketError(f"residual negative down to nu=1e-300 (c_sum={c_sum})")
        ga = g(a)
    while gb > 0:
        b += 10.0
        if b > math.log(1e300):
            raise BracketError("residual positive up to nu=1e300")
        gb = g(b)
    for _ in range(200):
        m = 0.5 * (a + b)
        gm = g(m)
        if abs(gm) <= tol or b - a < 1e-15:
            return math.exp(m)
        if gm > 0:
            a = m
        else:
            b = m
    return math.exp(0.5 * (a + b))


def _rate_integral(spec: EigSpec, sigma2: float, nu: float, quad: Quadrature) -> float:
    lo = nu * sigma2
    hi = _cutoff(spec)
    if lo >= hi:
        return 0.0
    off = math.log2(1.0 + nu)
    val = integrate_semi_infinite(
        lambda x: (math.log2(1.0 + x / sigma2) - off) * spec.pdf(x), lo, quad,
        upper=hi, points=_bulk_points(spec, lo, hi))
    return spec.T * val


def upper_bound_rate(cfg: ChannelConfig, quad: Quadrature = DEFAULT_QUAD,
                     tol: float = 1e-10) -> UpperBoundResult:
    """Upper bound on the bottleneck rate in bits per complex channel use."""
    spec = EigSpec.for_matrix(cfg.N1 + cfg.N2, cfg.M)
    c_sum = cfg.C1 + cfg.C2
    if c_sum == 0:
        return UpperBoundResult(rate=0.0, nu=math.inf, spec=spec)
    nu = solve_nu(spec, cfg.sigma2, c_sum, tol, quad)
    rate = _rate_integral(spec, cfg.sigma2, nu, quad)
    return UpperBoundResult(rate=max(rate, 0.0), nu=nu, spec=spec)


def unconstrained_capacity(cfg: ChannelConfig, quad: Quadrature = DEFAULT_QUAD) -> float:
    """Ergodic capacity ``T E[log2(1 + lambda / sigma2)]`` without a bottleneck."""
    spec = EigSpec.for_matrix(cfg.N1 + cfg.N2, cfg.M)
    hi = _cutoff(spec)
    return spec.T * integrate_semi_infinite(
        lambda x: math.log2(1.0 + x / cfg.sigma2) * spec.pdf(x), 0.0, quad,
        upper=hi, points=_bulk_points(spec, cfg.sigma2, hi))
