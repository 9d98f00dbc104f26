"""Random-matrix sampling, Wishart eigenvalue density and quadrature helpers.

Every bound in the package reduces to expectations over the unordered
eigenvalue of a complex Wishart matrix ``H H^H`` with ``H`` i.i.d. CN(0, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

__all__ = [
    "EigSpec",
    "IntegrationError",
    "Quadrature",
    "expected_snr_shrinkage",
    "hermitian_eigenvalues",
    "integrate_semi_infinite",
    "laguerre",
    "sample_complex_gaussian",
    "shrinkage_pair",
    "substream",
    "unordered_eigenvalues",
    "wishart_eig_cdf",
    "wishart_eig_pdf",
]


class IntegrationError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------


def substream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for task ``key`` under the root ``seed``.

    Splitting rule: ``SeedSequence(seed, spawn_key=key)``. A task always
    receives the same stream regardless of which worker runs it or in what
    order, which keeps parallel and serial runs identical.
    """
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def sample_complex_gaussian(rows: int, cols: int, rng: np.random.Generator,
                            size: int | None = None) -> np.ndarray:
    """Draw i.i.d. CN(0, 1) entries: real and imaginary parts each N(0, 1/2).

    With ``size`` given the result has shape ``(size, rows, cols)``.
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    shape = (rows, cols) if size is None else (size, rows, cols)
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * math.sqrt(0.5)


# ---------------------------------------------------------------------------
# Linear algebra
# ---------------------------------------------------------------------------


def hermitian_eigenvalues(A, return_vectors: bool = False, atol: float = 1e-10):
    """Ascending eigenvalues of a Hermitian matrix.

    Raises ``ValueError`` for non-square input or when ``A`` deviates from its
    conjugate transpose by more than ``atol`` (scaled by ``max(1, |A|)``).
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if np.max(np.abs(A - A.conj().T), initial=0.0) > atol * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    Ah = 0.5 * (A + A.conj().T)
    if return_vectors:
        return np.linalg.eigh(Ah)
    return np.linalg.eigvalsh(Ah)


def unordered_eigenvalues(rows: int, cols: int, n: int,
                          rng: np.random.Generator) -> np.ndarray:
    """Flattened nonzero eigenvalues of ``H H^H`` for ``n`` draws of ``H``.

    Each draw contributes ``min(rows, cols)`` samples of the unordered
    eigenvalue. The Gram matrix on the smaller side is used, since it has the
    same nonzero spectrum.
    """
    H = sample_complex_gaussian(rows, cols, rng, size=n)
    if rows <= cols:
        W = H @ np.conj(np.swapaxes(H, -1, -2))
    else:
        W = np.conj(np.swapaxes(H, -1, -2)) @ H
    return np.linalg.eigvalsh(W).ravel()


# ---------------------------------------------------------------------------
# Laguerre polynomials and the unordered-eigenvalue density
# ---------------------------------------------------------------------------


def laguerre(i: int, alpha: int, x):
    """Generalized Laguerre polynomial ``L_i^alpha(x)`` by three-term recurrence."""
    if i < 0 or alpha < 0:
        raise ValueError("degree and alpha must be nonnegative")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if i == 0:
        return prev if prev.ndim else float(prev)
    cur = 1.0 + alpha - x
    for k in range(1, i):
        prev, cur = cur, ((2 * k + 1 + alpha - x) * cur - (k + alpha) * prev) / (k + 1)
    return cur if cur.ndim else float(cur)


@dataclass(frozen=True)
class EigSpec:
    """Shape parameters of the unordered eigenvalue of ``H H^H``.

    ``S`` is the larger and ``T`` the smaller dimension of ``H``.
    """

    S: int
    T: int

    def __post_init__(self):
        if not (self.S >= self.T >= 1):
            raise ValueError(f"need S >= T >= 1, got S={self.S}, T={self.T}")

    @classmethod
    def for_matrix(cls, rows: int, cols: int) -> "EigSpec":
        return cls(max(rows, cols), min(rows, cols))

    def pdf(self, lam):
        return wishart_eig_pdf(self, lam)

    def cdf(self, lam):
        return wishart_eig_cdf(self, lam)

    def tail_point(self, rel: float = 1e-14) -> float:
        """Point beyond which the density envelope is below ``rel`` of its peak."""
        return _tail_point(self, rel)


def wishart_eig_pdf(spec: EigSpec, lam):
    """Density of the unordered eigenvalue at ``lam`` (vectorized)."""
    lam = np.asarray(lam, dtype=float)
    a = spec.S - spec.T
    out = np.zeros_like(lam)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        loglam = np.where(lam > 0, np.log(np.where(lam > 0, lam, 1.0)), -np.inf)
        for i in range(spec.T):
            logcoef = math.lgamma(i + 1) - math.lgamma(i + a + 1)
            if a == 0:
                logw = logcoef - lam
            else:
                logw = logcoef + a * loglam - lam
            out = out + np.exp(logw) * laguerre(i, a, lam) ** 2
    out = np.where(lam >= 0, out / spec.T, 0.0)
    return out if out.ndim else float(out)


def _density_poly(spec: EigSpec) -> np.ndarray:
    """Ascending coefficients ``p`` with ``pdf(x) = e^{-x} * sum_n p[n] x^n``.

    Built from the explicit finite-sum form of the Laguerre polynomials, so it
    is an independent route to the recurrence used by ``wishart_eig_pdf``.
    """
    a = spec.S - spec.T
    total = np.zeros(2 * (spec.T - 1) + a + 1)
    for i in range(spec.T):
        li = np.array([(-1) ** k * math.comb(i + a, i - k) / math.factorial(k)
                       for k in range(i + 1)])
        sq = np.polynomial.polynomial.polymul(li, li)
        coef = math.factorial(i) / math.factorial(i + a)
        total[a:a + sq.size] += coef * sq
    return total / spec.T


def wishart_eig_cdf(spec: EigSpec, lam):
    """Distribution function of the unordered eigenvalue.

    Integrates the polynomial-times-exponential form term by term with the
    regularized incomplete gamma function.
    """
    lam = np.asarray(lam, dtype=float)
    p = _density_poly(spec)
    x = np.clip(lam, 0.0, None)
    out = np.zeros_like(x)
    for n, pn in enumerate(p):
        if pn != 0.0:
            out = out + pn * math.factorial(n) * special.gammainc(n + 1, x)
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


def _tail_point(spec: EigSpec, rel: float) -> float:
    grid = np.linspace(0.0, 4.0 * spec.S + 10.0, 400)
    peak = float(np.max(wishart_eig_pdf(spec, grid)))
    x = float(grid[int(np.argmax(wishart_eig_pdf(spec, grid)))])
    step = 1.0
    while wishart_eig_pdf(spec, x) > rel * peak:
        x += step
        step *= 1.25
    return x


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Quadrature:
    epsabs: float = 1e-13
    epsrel: float = 1e-11
    limit: int = 400

    def __post_init__(self):
        if self.epsabs <= 0 or self.epsrel <= 0:
            raise ValueError("quadrature tolerances must be positive")
        if self.limit < 1:
            raise ValueError("limit must be >= 1")


DEFAULT_QUAD = Quadrature()


def _find_cutoff(f: Callable[[float], float], lower: float, rel: float) -> float:
    # Scan a geometric grid past the bulk and stop once the integrand has
    # fallen below rel * peak on two consecutive nodes.
    xs = lower + np.concatenate([[0.0], 2.0 ** np.arange(-6, 12, 0.5)])
    vals = np.abs([f(x) for x in xs])
    peak = float(np.max(vals))
    if peak == 0.0:
        return lower
    ipk = int(np.argmax(vals))
    for k in range(ipk + 1, xs.size - 1):
        if vals[k] < rel * peak and vals[k + 1] < rel * peak:
            return float(xs[k + 1])
    return float(xs[-1])


def integrate_semi_infinite(f: Callable[[float], float], lower: float = 0.0,
                            quad: Quadrature = DEFAULT_QUAD,
                            upper: float | None = None,
                            points: Sequence[float] | None = None,
                            tail_rel: float = 1e-16) -> float:
    """Integrate ``f`` over ``[lower, inf)`` for integrands with exponential decay.

    The tail is truncated where ``|f|`` drops below ``tail_rel`` of its peak
    (or at ``upper`` when the caller knows a safe cutoff) and the remaining
    finite interval is handled by adaptive Gauss-Kronrod.
    """
    if lower < 0:
        raise ValueError("lower limit must be >= 0")
    hi = _find_cutoff(f, lower, tail_rel) if upper is None else float(upper)
    if hi <= lower:
        return 0.0
    brk = None
    if points is not None:
        # breakpoints within rounding of an endpoint leave degenerate pieces
        gap = 1e-9 * (hi - lower)
        brk = sorted(p for p in points if lower + gap < p < hi - gap) or None
    val, err, _info, *msg = integrate.quad(
        f, lower, hi, epsabs=quad.epsabs, epsrel=quad.epsrel,
        limit=quad.limit, points=brk, full_output=1)
    # QUADPACK warns when it cannot certify the requested tolerance; only a
    # large miss is treated as failure.
    if msg and err > 100 * max(quad.epsabs, quad.epsrel * abs(val)):
        raise IntegrationError(f"quadrature did not converge: {msg[0]} (err={err:.3g})")
    return float(val)


# ---------------------------------------------------------------------------
# MMSE shrinkage factor
# ---------------------------------------------------------------------------


def shrinkage_pair(T_k: int, S_k: int, sigma2: float,
                   quad: Quadrature = DEFAULT_QUAD) -> tuple[float, float]:
    """Return ``(E[l/(l+s2)], E[s2/(l+s2)])``, each integrated directly.

    The complement is needed separately: at high SNR the MMSE error terms are
    differences like ``s - s**2`` that cancel catastrophically otherwise.
    """
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    spec = EigSpec(S_k, T_k)
    hi = spec.tail_point(1e-16)
    # the weights vary on the scale sigma2 while the density varies on the
    # scale 1, so integrate decade by decade between the two
    edges = [0.0]
    e = sigma2
    while e < hi:
        edges.append(e)
        e *= 10.0
    edges.append(hi)
    comp = shr = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        comp += integrate_semi_infinite(
            lambda x: sigma2 / (x + sigma2) * wishart_eig_pdf(spec, x), a, quad, upper=b)
        shr += integrate_semi_infinite(
            lambda x: x / (x + sigma2) * wishart_eig_pdf(spec, x), a, quad, upper=b)
    return shr, comp


def expected_snr_shrinkage(T_k: int, S_k: int, sigma2: float,
                           quad: Quadrature = DEFAULT_QUAD) -> float:
    """Average MMSE signal retention ``E[lambda / (lambda + sigma2)]``."""
    return shrinkage_pair(T_k, S_k, sigma2, quad)[0]
