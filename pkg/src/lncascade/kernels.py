"""Covariance kernels of the magnitude and of the renormalized magnitude.

Conventions
-----------
The renormalized magnitude ``Omega`` has covariance density ``ln(T/|u - v|)`` on
``|u - v| < T`` and zero beyond; it does not depend on ``lambda2``. All interval
covariances below are obtained from the even function

    G(x) = x**2 / 2 * ln(T / |x|) + 3 x**2 / 4      for |x| < T
    G(x) = T |x| - T**2 / 4                         for |x| >= T

which satisfies ``G'' = ln(T/|x|)_+`` and ``G(0) = 0``, so that

    int_a1^b1 int_a2^b2 ln(T/|u - v|)_+ du dv
        = G(b1 - a2) + G(a1 - b2) - G(b1 - b2) - G(a1 - a2).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

from .core_model import ModelParams

Interval = tuple[float, float]


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested accuracy."""

    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(f"{message} (value={estimate!r}, error estimate={error!r})")
        self.estimate = estimate
        self.error = error


@dataclass(frozen=True)
class MagnitudeKernel:
    """Mean and covariance of the stationary magnitude ``omega_{l,T}``."""

    l: float
    T: float
    lambda2: float

    def __post_init__(self):
        if not 0 < self.l < self.T:
            raise ValueError(f"need 0 < l < T, got l={self.l}, T={self.T}")

    @classmethod
    def from_params(cls, params: ModelParams) -> "MagnitudeKernel":
        return cls(l=params.cutoff, T=params.T, lambda2=params.lambda2)

    @property
    def mean(self) -> float:
        return omega_mean(self)

    def __call__(self, lag):
        return rho_lt(lag, self)


@dataclass(frozen=True)
class OmegaIncrementCov:
    """``h -> Cov[d_tau Omega(t) / tau, d_tau Omega(t + h) / tau]``."""

    tau: float
    T: float

    def __call__(self, h):
        return omega_increment_cov(self.tau, h, self.T)


def rho_lt(tau_lag, kernel: MagnitudeKernel):
    """Covariance ``rho_{l,T}`` of the magnitude at a lag (symmetric in the lag)."""
    lag = np.abs(np.asarray(tau_lag, dtype=float))
    l, T, lam2 = kernel.l, kernel.T, kernel.lambda2
    with np.errstate(divide="ignore"):
        out = np.where(
            lag < l,
            lam2 * (math.log(T / l) + 1.0 - lag / l),
            np.where(lag < T, lam2 * np.log(T / np.maximum(lag, l)), 0.0),
        )
    return out if out.ndim else float(out)


def omega_mean(kernel: MagnitudeKernel) -> float:
    return -kernel.lambda2 * (math.log(kernel.T / kernel.l) + 1.0)


def rho_limit(t_lag, T: float, lambda2: float):
    """Limit kernel ``lambda2 * ln(T/|t|)`` on ``|t| < T``; log-divergent at 0."""
    t = np.abs(np.asarray(t_lag, dtype=float))
    if np.any(t == 0):
        raise ValueError("rho_limit diverges at lag 0 (integrable singularity)")
    with np.errstate(divide="ignore"):
        out = np.where(t < T, lambda2 * np.log(T / t), 0.0)
    return out if out.ndim else float(out)


def _xlogx2(x):
    """``x**2 * ln|x|`` with the 0 limit at the origin."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(ax > 0, x * x * np.log(np.where(ax > 0, ax, 1.0)), 0.0)


def _second_difference_log(u):
    """``E[ln|u + D|]`` for ``D`` triangular on [-1, 1], i.e. the unit-square
    average of ``ln|u + x - y|``."""
    u = np.asarray(u, dtype=float)

    def phi2(x):
        return 0.5 * _xlogx2(x) - 0.75 * np.square(x)

    return phi2(u + 1.0) - 2.0 * phi2(u) + phi2(u - 1.0)


def log_kernel_antiderivative(x, T: float):
    """The function ``G`` of the module docstring (second antiderivative of
    ``ln(T/|x|)_+``)."""
    ax = np.abs(np.asarray(x, dtype=float))
    inside = ax < T
    with np.errstate(divide="ignore", invalid="ignore"):
        g_in = np.where(ax > 0, 0.5 * ax**2 * (math.log(T) - np.log(np.where(ax > 0, ax, 1.0))), 0.0) + 0.75 * ax**2
    out = np.where(inside, g_in, T * ax - 0.25 * T * T)
    return out if out.ndim else float(out)


_SERIES_K = np.arange(3, 60, dtype=float)
_SERIES_C = 1.0 / (_SERIES_K * (_SERIES_K - 1.0) * (_SERIES_K - 2.0))


def log_kernel_remainder(x, T: float):
    """``G(x) - (T|x| - T^2/4)``, zero for ``|x| >= T``.

    Near ``|x| = T`` it equals ``T^2 sum_{k>=3} e^k / (k(k-1)(k-2))`` with
    ``e = 1 - |x|/T``; the series avoids the cancellation of the direct form.
    """
    r = np.minimum(np.abs(np.asarray(x, dtype=float)) / T, 1.0)
    e = 1.0 - r
    series = np.power.outer(np.minimum(e, 0.5), _SERIES_K) @ _SERIES_C
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = 0.25 - r + 0.75 * r * r - 0.5 * r * r * np.log(np.where(r > 0, r, 1.0))
    out = T * T * np.where(e <= 0.5, series, direct)
    return out if out.ndim else float(out)


def f_shape(u):
    """Shape function of the renormalized-magnitude increment covariance.

    For ``u >= 1`` the closed form
    ``-(u+1)^2/2 ln(1 + 1/u) - (u-1)^2/2 ln(1 - 1/u)`` is used (equal to ``-2 ln 2``
    at ``u = 1``); ``f(0) = 0``; for ``0 < u < 1`` the exact overlapping-window
    value ``ln u - 3/2 - E[ln|u + D|]`` is returned.
    """
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("f_shape is defined for u >= 0")
    big = u >= 1.0
    safe = np.where(big, u, 2.0)
    closed = -0.5 * (safe + 1.0) ** 2 * np.log1p(1.0 / safe)
    # (u-1)^2 ln(1-1/u) -> 0 at u = 1
    above = safe > 1.0
    closed -= 0.5 * np.where(above, (safe - 1.0) ** 2 * np.log1p(-1.0 / np.where(above, safe, 2.0)), 0.0)
    small = np.where((u > 0) & ~big, u, 0.5)
    overlap = np.log(small) - 1.5 - _second_difference_log(small)
    out = np.where(big, closed, np.where(u == 0, 0.0, overlap))
    return out if out.ndim else float(out)


def interval_cov(I: Interval, J: Interval, T: float) -> float:
    """``Cov[Omega(I) / |I|, Omega(J) / |J|]`` for intervals ``I = (a1, b1)``, ``J = (a2, b2)``."""
    a1, b1 = I
    a2, b2 = J
    if not (b1 > a1 and b2 > a2):
        raise ValueError(f"intervals must have positive length, got {I}, {J}")
    D = log_kernel_remainder
    raw = D(b1 - a2, T) + D(a1 - b2, T) - D(b1 - b2, T) - D(a1 - a2, T)
    if b1 > a2 and b2 > a1:
        # the linear parts of G cancel exactly for disjoint intervals
        raw += T * (abs(b1 - a2) + abs(a1 - b2) - abs(b1 - b2) - abs(a1 - a2))
    return float(raw) / ((b1 - a1) * (b2 - a2))


def omega_increment_cov(tau: float, h, T: float):
    """``Cov[d_tau Omega(t)/tau, d_tau Omega(t+h)/tau]`` (lambda-free units).

    ``h = 0`` gives the variance ``ln(T e^{3/2} / tau)`` (when ``tau <= T``);
    ``tau <= h`` with ``h + tau <= T`` uses ``ln(T e^{3/2} / h) + f(h / tau)``;
    ``h >= T + tau`` gives 0; the remaining bands (overlapping windows and the
    transition near ``T``) use the exact double integral through ``G``.
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    h = np.asarray(h, dtype=float)
    if np.any(h < 0):
        raise ValueError("h must be nonnegative")
    G, D = log_kernel_antiderivative, log_kernel_remainder
    # for h >= tau all three points share a sign and the linear part of G drops out
    exact = np.where(h >= tau, D(h + tau, T) - 2.0 * D(h, T) + D(h - tau, T),
                     G(h + tau, T) - 2.0 * G(h, T) + G(h - tau, T)) / tau**2
    with np.errstate(divide="ignore", invalid="ignore"):
        safe_h = np.where(h > 0, h, tau)
        closed = np.log(T * math.exp(1.5) / safe_h) + f_shape(np.where(h >= tau, h / tau, 1.0))
    variance = math.log(T * math.exp(1.5) / tau) if tau <= T else math.nan
    out = np.where(h >= T + tau, 0.0,
                   np.where((h >= tau) & (h + tau <= T), closed,
                            np.where((h == 0) & (tau <= T), variance, exact)))
    return out if out.ndim else float(out)


def omega_cov_matrix(times: Sequence[float], T: float) -> np.ndarray:
    """Covariance matrix of ``(Omega(t_1), ..., Omega(t_n))``."""
    t = np.asarray(times, dtype=float)
    if np.any(t < 0):
        raise ValueError("times must be nonnegative")
    G = log_kernel_antiderivative
    g = G(t, T)
    return np.atleast_2d(g[:, None] + g[None, :] - G(t[:, None] - t[None, :], T))


def _pairings(items: list[int]):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for i, other in enumerate(rest):
        for tail in _pairings(rest[:i] + rest[i + 1:]):
            yield [(first, other)] + tail


def omega_wick_moment(intervals: Sequence[Interval], T: float) -> float:
    """``E[prod_j Omega(I_j) / |I_j|]`` by summing over pair partitions."""
    n = len(intervals)
    if n == 0:
        raise ValueError("need at least one interval")
    for a, b in intervals:
        if not b > a:
            raise ValueError(f"empty interval ({a}, {b})")
    if n % 2:
        return 0.0
    cov = np.empty((n, n))
    for i, j in itertools.combinations_with_replacement(range(n), 2):
        cov[i, j] = cov[j, i] = interval_cov(intervals[i], intervals[j], T)
    return float(sum(math.prod(cov[i, j] for i, j in p) for p in _pairings(list(range(n)))))


def _pair_factor(w, lambda2: float, T: float):
    """``exp(4 lambda2 ln(T/|w|)_+)``."""
    aw = abs(w)
    if aw >= T:
        return 1.0
    if aw == 0.0:
        return math.inf
    return (T / aw) ** (4.0 * lambda2)


def _overlap_length(w: float, I: Interval, J: Interval) -> float:
    """Length of ``{u in I : u - w in J}``."""
    return max(0.0, min(I[1], J[1] + w) - max(I[0], J[0] + w))


def mrm_moment_integral(intervals: Sequence[Interval], params: ModelParams,
                        epsabs: float = 1e-10, epsrel: float = 1e-10) -> float:
    """``E[prod_j M(I_j) / |I_j|]`` for up to three intervals by adaptive quadrature.

    The integrand is ``exp(4 lambda2 sum_{i<j} ln(T/|u_i - u_j|)_+)``. Two intervals
    reduce exactly to a one-dimensional integral against the overlap length;
    three intervals use nested quadrature with breakpoints at the diagonals.
    """
    n = len(intervals)
    if not 1 <= n <= 3:
        raise ValueError(f"mrm_moment_integral supports 1 to 3 intervals, got {n}")
    for a, b in intervals:
        if not b > a:
            raise ValueError(f"empty interval ({a}, {b})")
    lam2, T = params.lambda2, params.T
    if n == 1 or lam2 == 0:
        return 1.0
    if n == 2:
        I, J = intervals
        lo, hi = I[0] - J[1], I[1] - J[0]
        cuts = sorted({lo, hi, I[0] - J[0], I[1] - J[1], 0.0, T, -T})
        cuts = [c for c in cuts if lo <= c <= hi]
        total, err = 0.0, 0.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            if b <= a:
                continue
            val, e = integrate.quad(lambda w: _pair_factor(w, lam2, T) * _overlap_length(w, I, J),
                                    a, b, epsabs=epsabs, epsrel=epsrel, limit=200)
            total += val
            err += e
        norm = (I[1] - I[0]) * (J[1] - J[0])
        if err > max(epsabs, epsrel * abs(total)) * 100:
            raise QuadratureError("two-interval moment did not converge", total / norm, err / norm)
        return total / norm

    # x = u1 - u2, y = u2 - u3; the remaining u1 integral is the length of
    # I1 & (I2 + x) & (I3 + x + y), piecewise linear in (x, y)
    (a1, b1), (a2, b2), (a3, b3) = intervals

    def weight(x, y):
        return max(0.0, min(b1, b2 + x, b3 + x + y) - max(a1, a2 + x, a3 + x + y))

    err_acc = [0.0]

    def segments(lo, hi, pts):
        edges = sorted({lo, hi} | {p for p in pts if lo < p < hi})
        return zip(edges[:-1], edges[1:])

    def inner(x):
        lo, hi = min(a1, a2 + x) - b3 - x, max(b1, b2 + x) - a3 - x
        pts = (0.0, -x, T, -T, -x + T, -x - T,
               b1 - b3 - x, b2 - b3, a1 - a3 - x, a2 - a3,
               a1 - b3 - x, a2 - b3, b1 - a3 - x, b2 - a3)
        total = 0.0
        for s0, s1 in segments(lo, hi, pts):
            v, e = integrate.quad(lambda y: _pair_factor(y, lam2, T) * _pair_factor(x + y, lam2, T) * weight(x, y),
                                  s0, s1, epsabs=epsabs, epsrel=epsrel, limit=200)
            total += v
            err_acc[0] += e
        return total * _pair_factor(x, lam2, T)

    pts = (0.0, T, -T, b1 - b2, a1 - a2, a1 - b2, b1 - a2,
           b1 - b2 - (b3 - a3), a1 - a2 + (b3 - a3))
    total = 0.0
    for s0, s1 in segments(a1 - b2, b1 - a2, pts):
        v, e = integrate.quad(inner, s0, s1, epsabs=epsabs, epsrel=epsrel, limit=200)
        total += v
        err_acc[0] += e
    norm = (b1 - a1) * (b2 - a2) * (b3 - a3)
    if not math.isfinite(total):
        raise QuadratureError("three-interval moment did not converge", total / norm, err_acc[0] / norm)
    return total / norm
