"""Two-relay scalar bottleneck rate ``R(rho, C)``.

The rate is the optimum of ``max_{0<=r_k<=c_k} min_T f_T(r)`` over the four
relay subsets ``T``, with

    f_T(r) = log2(1 + sum_{k not in T} rho_k (1 - 2^-r_k)) + sum_{k in T} (c_k - r_k).

Every ``f_T`` is concave, so the objective is concave and a 1-D search over
``r1`` suffices once the best ``r2`` for a fixed ``r1`` is known. That inner
step has a closed form: as functions of ``r2``, ``f_{}`` and ``f_{1}`` increase
while ``f_{2}`` and ``f_{1,2}`` decrease with slope -1, so the maximizer sits
where the increasing envelope meets the decreasing one, and both crossings
solve in ``2^-r2`` explicitly.

All routines broadcast over array arguments, which is how the QCI allocator
evaluates every quantization-level pair at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SUBSETS",
    "ScalarDibInstance",
    "ScalarDibSolution",
    "scalar_rate",
    "scalar_rate_grad",
    "solve_scalar_rate",
    "subset_objective",
]

SUBSETS: tuple[frozenset, ...] = (frozenset(), frozenset({1}), frozenset({2}), frozenset({1, 2}))

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ScalarDibInstance:
    rho1: float
    rho2: float
    c1: float
    c2: float

    def __post_init__(self):
        for name in ("rho1", "rho2", "c1", "c2"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")


@dataclass(frozen=True)
class ScalarDibSolution:
    rate: float
    r1: float
    r2: float
    beta: float
    subset_values: dict


def _gain(rho, r):
    # rho * (1 - 2^-r), exact zero when rho == 0
    return rho * -np.expm1(-np.log(2.0) * r)


def _four_values(rho1, rho2, c1, c2, r1, r2):
    u1 = _gain(rho1, r1)
    u2 = _gain(rho2, r2)
    f_empty = np.log2(1.0 + u1 + u2)
    f_1 = c1 - r1 + np.log2(1.0 + u2)
    f_2 = c2 - r2 + np.log2(1.0 + u1)
    f_12 = c1 + c2 - r1 - r2
    return f_empty, f_1, f_2, f_12


def subset_objective(inst: ScalarDibInstance, r1: float, r2: float, subset) -> float:
    """Constraint value of one relay subset at ``(r1, r2)``."""
    subset = frozenset(subset)
    if subset not in SUBSETS:
        raise ValueError(f"subset must be one of {sorted(map(sorted, SUBSETS))}")
    vals = _four_values(inst.rho1, inst.rho2, inst.c1, inst.c2, r1, r2)
    return float(vals[SUBSETS.index(subset)])


def _best_r2(rho1, rho2, c1, c2, r1):
    """Optimal ``r2`` for fixed ``r1`` and the resulting min-subset value."""
    a = _gain(rho1, r1)
    # decreasing branch: c2 - r2 + min(log2(1 + a), c1 - r1)
    K = c2 + np.minimum(np.log2(1.0 + a), c1 - r1)
    # log2(1 + a + rho2 (1 - t)) - log2(t) = K  with  t = 2^-r2
    root_joint = np.logaddexp2(K, np.log2(np.maximum(rho2, 1e-300))) - np.log2(1.0 + a + rho2)
    # c1 - r1 + log2(1 + rho2 (1 - t)) - log2(t) = K
    K1 = K - c1 + r1
    root_single = np.logaddexp2(K1, np.log2(np.maximum(rho2, 1e-300))) - np.log2(1.0 + rho2)
    r2 = np.clip(np.maximum(root_joint, root_single), 0.0, c2)
    r2 = np.where(rho2 > 0, r2, 0.0)
    vals = _four_values(rho1, rho2, c1, c2, r1, r2)
    return r2, np.minimum(np.minimum(vals[0], vals[1]), np.minimum(vals[2], vals[3]))


def _solve(rho1, rho2, c1, c2, tol: float):
    rho1, rho2, c1, c2 = np.broadcast_arrays(*(np.asarray(v, dtype=float)
                                               for v in (rho1, rho2, c1, c2)))
    if np.any(rho1 < 0) or np.any(rho2 < 0) or np.any(c1 < 0) or np.any(c2 < 0):
        raise ValueError("SNRs and capacities must be nonnegative")
    # golden-section over r1 on [0, c1]; the inner value is concave in r1
    lo = np.zeros_like(c1)
    hi = np.where(rho1 > 0, c1, 0.0)
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    v1 = _best_r2(rho1, rho2, c1, c2, x1)[1]
    v2 = _best_r2(rho1, rho2, c1, c2, x2)[1]
    width = float(np.max(hi - lo, initial=0.0))
    n_iter = 0 if width <= tol else int(np.ceil(np.log(tol / width) / np.log(_GOLDEN))) + 1
    for _ in range(n_iter):
        left = v1 >= v2
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        nx1 = hi - _GOLDEN * (hi - lo)
        nx2 = lo + _GOLDEN * (hi - lo)
        # reuse the surviving interior point
        new_x = np.where(left, nx1, nx2)
        new_v = _best_r2(rho1, rho2, c1, c2, new_x)[1]
        x1, x2, v1, v2 = (np.where(left, new_x, x2), np.where(left, x1, new_x),
                          np.where(left, new_v, v2), np.where(left, v1, new_v))
    # endpoints can win for monotone pieces; compare all candidates
    cands = np.stack([lo, hi, x1, x2, np.zeros_like(lo), np.where(rho1 > 0, c1, 0.0)])
    vals = np.stack([_best_r2(rho1, rho2, c1, c2, x)[1] for x in cands])
    best = np.argmax(vals, axis=0)
    r1 = np.take_along_axis(cands, best[None], axis=0)[0]
    r2, rate = _best_r2(rho1, rho2, c1, c2, r1)
    return np.maximum(rate, 0.0), r1, r2


def scalar_rate(rho1, rho2, c1, c2, tol: float = 1e-12):
    """Vectorized bottleneck rate for broadcastable arrays of instances."""
    return _solve(rho1, rho2, c1, c2, tol)[0]


def solve_scalar_rate(inst: ScalarDibInstance, tol: float = 1e-12) -> ScalarDibSolution:
    """Maximize the minimum subset constraint over the box ``[0,c1] x [0,c2]``.

    ``tol`` bounds the width of the final bracket on ``r1``; the returned rate
    is within ``tol`` (times the unit objective slope) of the optimum.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    rate, r1, r2 = _solve(inst.rho1, inst.rho2, inst.c1, inst.c2, tol)
    r1, r2 = float(r1), float(r2)
    vals = _four_values(inst.rho1, inst.rho2, inst.c1, inst.c2, r1, r2)
    subset_values = {s: float(v) for s, v in zip(SUBSETS, vals)}
    beta = min(subset_values.values())
    return ScalarDibSolution(rate=float(rate), r1=r1, r2=r2, beta=beta,
                             subset_values=subset_values)


def _active_gradients(rho1, rho2, r1, r2):
    """Gradients of the four subset functions w.r.t. ``(r1, r2)``."""
    e1 = rho1 * np.exp2(-r1)
    e2 = rho2 * np.exp2(-r2)
    u1 = _gain(rho1, r1)
    u2 = _gain(rho2, r2)
    j = 1.0 + u1 + u2
    return np.array([[e1 / j, e2 / j],
                     [-1.0, e2 / (1.0 + u2)],
                     [e1 / (1.0 + u1), -1.0],
                     [-1.0, -1.0]])


def scalar_rate_grad(rho1, rho2, c1, c2, tol: float = 1e-12, active_tol: float = 1e-9):
    """Rates and capacity supergradients ``(R, dR/dc1, dR/dc2)``.

    The derivative is read off the multipliers of the epigraph form: with
    ``lambda_T`` on the binding subset constraints and ``mu_k`` on binding
    upper bounds ``r_k <= c_k``, ``dR/dc_k = sum_{T ni k} lambda_T + mu_k``.
    The multipliers come from a nonnegative least-squares fit of the
    stationarity conditions; at points where they are not unique any
    solution is a valid supergradient.
    """
    from scipy.optimize import nnls

    rate, r1, r2 = _solve(rho1, rho2, c1, c2, tol)
    rho1, rho2, c1, c2 = np.broadcast_arrays(*(np.asarray(v, dtype=float)
                                               for v in (rho1, rho2, c1, c2)))
    shape = rate.shape
    flat = [np.ravel(v) for v in (rho1, rho2, c1, c2, r1, r2, rate)]
    d1 = np.empty(flat[0].size)
    d2 = np.empty(flat[0].size)
    member = np.array([[0, 0], [1, 0], [0, 1], [1, 1]], dtype=float)
    for n, (p1, p2, k1, k2, x1, x2, v) in enumerate(zip(*flat)):
        vals = np.array(_four_values(p1, p2, k1, k2, x1, x2))
        grads = _active_gradients(p1, p2, x1, x2)
        gmax = 1.0 + np.abs(grads).max()
        # r1 is only known to ``tol``; a steep constraint can sit slope * tol
        # above the minimum and still bind, so widen the slack until the
        # stationarity system is solvable
        slack = active_tol * max(1.0, abs(v)) + 100.0 * tol * gmax
        for _ in range(8):
            act = np.flatnonzero(vals - vals.min() <= slack)
            cols = [np.concatenate([[1.0], grads[t]]) for t in act]
            kinds = [("T", t) for t in act]
            btol = 1e-10 * max(1.0, k1, k2)
            for k, (x, c) in enumerate(((x1, k1), (x2, k2))):
                e = np.zeros(3)
                if x <= btol:
                    e[1 + k] = 1.0
                    cols.append(e.copy())
                    kinds.append(("lo", k))
                if x >= c - btol:
                    e[1 + k] = -1.0
                    cols.append(e)
                    kinds.append(("hi", k))
            z, res = nnls(np.array(cols).T, np.array([1.0, 0.0, 0.0]))
            if res <= 1e-9 * gmax or act.size == 4:
                break
            slack *= 10.0
        g = np.zeros(2)
        for zi, (kind, idx) in zip(z, kinds):
            if kind == "T":
                g += zi * member[idx]
            elif kind == "hi":
                g[idx] += zi
        d1[n], d2[n] = g
    return rate, d1.reshape(shape), d2.reshape(shape)
