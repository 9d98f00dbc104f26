"""Brute-force reference computations used by the unit and acceptance tests.

These deliberately avoid the package's solvers: they only evaluate the
defining formulas on grids or on random samples.
"""

import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import digamma


def subset_values(rho1, rho2, c1, c2, r1, r2):
    u1 = rho1 * (1.0 - 2.0 ** (-r1))
    u2 = rho2 * (1.0 - 2.0 ** (-r2))
    return np.stack([
        np.log2(1.0 + u1 + u2),
        c1 - r1 + np.log2(1.0 + u2),
        c2 - r2 + np.log2(1.0 + u1),
        c1 + c2 - r1 - r2,
    ])


def grid_rate(rho1, rho2, c1, c2, step_frac=0.005, step=None):
    """Exhaustive search over ``[0,c1] x [0,c2]``; both endpoints included."""
    axes = []
    for c in (c1, c2):
        h = step if step is not None else step_frac * c
        n = 1 if c == 0 else int(math.ceil(c / h - 1e-9)) + 1
        axes.append(np.linspace(0.0, c, n))
    X, Y = np.meshgrid(*axes, indexing="ij")
    return float(subset_values(rho1, rho2, c1, c2, X, Y).min(axis=0).max())


def _zoom_max(fun, lo, hi, n=201, levels=6):
    """Maximize a unimodal function of one variable by repeated grid zooming."""
    best = -np.inf
    for _ in range(levels):
        xs = np.linspace(lo, hi, n)
        vals = fun(xs)
        k = int(np.argmax(vals))
        best = max(best, float(vals[k]))
        h = (hi - lo) / (n - 1)
        lo, hi = max(lo, xs[k] - h), min(hi, xs[k] + h)
        if hi - lo <= 0:
            break
    return best


def zoom_rate(rho1, rho2, c1, c2):
    """Nested 1-D zoom grids: outer over r1 (concave), inner over r2 (unimodal)."""
    def inner(r1):
        return _zoom_max(lambda y: subset_values(rho1, rho2, c1, c2, r1, y).min(axis=0), 0.0, c2)

    return _zoom_max(lambda xs: np.array([inner(x) for x in xs]), 0.0, c1, n=41, levels=12)


def golden_single_relay(rho, c, iters=200):
    """1-D golden-section maximum of ``min(log2(1 + rho(1 - 2^-r)), c - r)``."""
    def f(r):
        return min(math.log2(1.0 + rho * (1.0 - 2.0 ** (-r))), c - r)

    g = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = 0.0, c
    for _ in range(iters):
        x1, x2 = b - g * (b - a), a + g * (b - a)
        if f(x1) >= f(x2):
            b = x2
        else:
            a = x1
    return max(f(0.5 * (a + b)), f(0.0), f(c))


def qci_brute_force_two_level(M, grid1, grid2, budgets, step=0.01):
    """Exhaustive search over the single finite-level capacity of each relay (J = 2)."""
    from diamond_ib.scalar_dib import scalar_rate

    (p1, q1), (p2, q2) = grid1.probs, grid2.probs
    rho1, rho2 = grid1.snr_hat[0], grid2.snr_hat[0]
    axes = []
    for b, p in zip(budgets, (p1, p2)):
        cap = b / p
        n = int(math.ceil(cap / step - 1e-9)) + 1
        axes.append(np.linspace(0.0, cap, n))
    X, Y = np.meshgrid(*axes, indexing="ij")
    # only the (finite, finite) level pair carries rate; any pair with the
    # catch-all level has zero SNR and zero capacity on that side
    r11 = scalar_rate(rho1, rho2, X, Y, 1e-10)
    r10 = scalar_rate(rho1, 0.0, X, 0.0, 1e-10)
    r01 = scalar_rate(0.0, rho2, 0.0, Y, 1e-10)
    obj = M * (p1 * p2 * r11 + p1 * q2 * r10 + q1 * p2 * r01)
    return float(obj.max())


def wishart_log_mean(S, T):
    """``E[ln lambda]`` of the unordered eigenvalue: average digamma over the spectrum."""
    return float(np.mean([digamma(S - i) for i in range(T)]))


def upper_bound_monte_carlo(lam, S, T, sigma2, c_sum):
    """Upper bound evaluated on sampled eigenvalues, with a log-moment control variate.

    The water level is solved on the same samples; the control variate
    ``T (log2 lam - E[log2 lam])`` has an exact mean of zero.
    """
    def res(log_nu):
        return T * np.mean(np.maximum(np.log2(lam / (math.exp(log_nu) * sigma2)), 0.0)) - c_sum

    nu = math.exp(brentq(res, -80.0, 80.0, xtol=1e-14))
    v = T * np.maximum(np.log2(1.0 + lam / sigma2) - np.log2(1.0 + nu), 0.0)
    cv = T * (np.log2(lam) - wishart_log_mean(S, T) / math.log(2.0))
    beta = np.cov(v, cv)[0, 1] / np.var(cv, ddof=1)
    y = v - beta * cv
    return float(y.mean()), float(y.std(ddof=1) / math.sqrt(y.size)), nu
