"""First-order (small ``lambda2``) moments of MRM/MRW increments.

To first order in ``lambda2`` an MRW increment over an interval ``I`` behaves like

    dX(I) ~ sigma * sqrt(|I|) * eps_I * exp(lambda * Omega(I)/|I| - lambda2 * V_I)

with ``eps_I`` standard normal, independent across disjoint intervals and of
``Omega``, and ``V_I = Var[Omega(I)/|I|]``. Every moment below follows from this
log-normal representation and from the exact ``Omega`` covariances in
:mod:`lncascade.kernels`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .core_model import ModelParams
from .kernels import log_kernel_remainder, omega_increment_cov

EULER_GAMMA = float(np.euler_gamma)
LOG_ABS_NORMAL_MEAN = -(EULER_GAMMA + math.log(2.0)) / 2.0
LOG_ABS_NORMAL_VAR = math.pi**2 / 8.0

Kind = Literal["Lin", "Sq", "Log"]


def _log_scale(T: float, tau: float) -> float:
    return math.log(T * math.exp(1.5) / tau)


@dataclass(frozen=True)
class LogIncrementModel:
    """Mean and covariance of ``ln|d_tau X|`` for a fixed parameter set."""

    params: ModelParams

    @property
    def mean(self) -> float:
        return log_absinc_mean(self.params.tau, self.params)

    def cov(self, h):
        return log_absinc_cov(self.params.tau, h, self.params)


def log_mrm_stats(tau: float, h, params: ModelParams):
    """Mean of ``ln(d_tau M / tau)`` and covariance of two such logs ``h`` apart."""
    lam2 = params.lambda2
    mean = -2.0 * lam2 * _log_scale(params.T, tau)
    cov = 4.0 * lam2 * omega_increment_cov(tau, h, params.T)
    return mean, cov


def log_absinc_mean(tau: float, params: ModelParams) -> float:
    """``E[ln|d_tau X|]``.

    Includes ``ln(sigma) + ln(tau)/2`` so that the mean follows the noise scale
    ``sigma * sqrt(tau)``; at ``sigma = tau = 1`` both terms vanish.
    """
    return (math.log(params.sigma) + 0.5 * math.log(tau) + LOG_ABS_NORMAL_MEAN
            - params.lambda2 * _log_scale(params.T, tau))


def log_absinc_cov(tau: float, h, params: ModelParams):
    """``Cov[ln|d_tau X(t)|, ln|d_tau X(t+h)|]``; the noise adds ``pi^2/8`` at ``h = 0``."""
    h_arr = np.asarray(h, dtype=float)
    out = params.lambda2 * np.asarray(omega_increment_cov(tau, h_arr, params.T))
    out = out + np.where(h_arr == 0, LOG_ABS_NORMAL_VAR, 0.0)
    return out if out.ndim else float(out)


def sq_increment_cov(tau: float, h, params: ModelParams):
    """``Cov[d_tau X(t)^2, d_tau X(t+h)^2]`` under the log-normal approximation."""
    h_arr = np.asarray(h, dtype=float)
    c = np.asarray(omega_increment_cov(tau, h_arr, params.T))
    growth = np.exp(4.0 * params.lambda2 * c)
    scale = params.sigma**4 * tau**2
    out = scale * np.where(h_arr == 0, 3.0 * growth - 1.0, growth - 1.0)
    return out if out.ndim else float(out)


def abs_increment_mean(tau: float, params: ModelParams) -> float:
    """``E|d_tau X| = sigma sqrt(2 tau / pi) exp(-lambda2 V / 2)``."""
    v = _log_scale(params.T, tau)
    return params.sigma * math.sqrt(2.0 * tau / math.pi) * math.exp(-0.5 * params.lambda2 * v)


def abs_increment_cov(tau: float, h, params: ModelParams):
    """``Cov[|d_tau X(t)|, |d_tau X(t+h)|]`` under the log-normal approximation."""
    h_arr = np.asarray(h, dtype=float)
    lam2 = params.lambda2
    v = _log_scale(params.T, tau)
    c = np.asarray(omega_increment_cov(tau, h_arr, params.T))
    base = params.sigma**2 * tau
    cross = base * (2.0 / math.pi) * math.exp(-lam2 * v) * np.expm1(lam2 * c)
    var = base * (1.0 - (2.0 / math.pi) * math.exp(-lam2 * v))
    out = np.where(h_arr == 0, var, cross)
    return out if out.ndim else float(out)


# -- interval-level moments (targets at scale s against past tau increments) --

def omega_interval_cov(len_i: float, len_j: float, offset, T: float):
    """``Cov[Omega(I)/|I|, Omega(J)/|J|]`` for ``I = [0, len_i]``, ``J = offset + [0, len_j]``.

    Vectorized over ``offset``.
    """
    d = np.asarray(offset, dtype=float)
    D = log_kernel_remainder
    raw = D(len_i - d, T) + D(d + len_j, T) - D(len_i - d - len_j, T) - D(d, T)
    # linear part of the antiderivative; exactly zero for disjoint intervals
    linear = T * (np.abs(len_i - d) + np.abs(d + len_j) - np.abs(len_i - d - len_j) - np.abs(d))
    raw = raw + np.where((d < len_i) & (d + len_j > 0), linear, 0.0)
    out = np.asarray(raw) / (len_i * len_j)
    return out if out.ndim else float(out)


def transform_mean(kind: Kind, length: float, params: ModelParams) -> float:
    """Mean of ``|dX|``, ``dX^2`` or ``ln|dX|`` over an interval of the given length."""
    v = float(omega_interval_cov(length, length, 0.0, params.T))
    lam2, sigma = params.lambda2, params.sigma
    if kind == "Log":
        return math.log(sigma) + 0.5 * math.log(length) + LOG_ABS_NORMAL_MEAN - lam2 * v
    if kind == "Sq":
        return sigma**2 * length
    if kind == "Lin":
        return sigma * math.sqrt(2.0 * length / math.pi) * math.exp(-0.5 * lam2 * v)
    raise ValueError(f"unknown transform kind {kind!r}")


def transform_variance(kind: Kind, length: float, params: ModelParams) -> float:
    v = float(omega_interval_cov(length, length, 0.0, params.T))
    lam2, sigma = params.lambda2, params.sigma
    if kind == "Log":
        return LOG_ABS_NORMAL_VAR + lam2 * v
    if kind == "Sq":
        return sigma**4 * length**2 * (3.0 * math.exp(4.0 * lam2 * v) - 1.0)
    if kind == "Lin":
        return sigma**2 * length * (1.0 - (2.0 / math.pi) * math.exp(-lam2 * v))
    raise ValueError(f"unknown transform kind {kind!r}")


def transform_cross_cov(kind: Kind, len_i: float, len_j: float, offset, params: ModelParams):
    """Covariance of the transform over two *disjoint* intervals.

    ``I = [0, len_i]`` and ``J = offset + [0, len_j]`` with ``offset >= len_i`` or
    ``offset + len_j <= 0``; the Gaussian factors are then independent.
    """
    d = np.asarray(offset, dtype=float)
    if np.any((d < len_i) & (d + len_j > 0)):
        raise ValueError("transform_cross_cov needs non-overlapping intervals")
    lam2, sigma, T = params.lambda2, params.sigma, params.T
    c = np.asarray(omega_interval_cov(len_i, len_j, d, T))
    if kind == "Log":
        out = lam2 * c
    elif kind == "Sq":
        out = sigma**4 * len_i * len_j * np.expm1(4.0 * lam2 * c)
    elif kind == "Lin":
        vi = float(omega_interval_cov(len_i, len_i, 0.0, T))
        vj = float(omega_interval_cov(len_j, len_j, 0.0, T))
        out = (sigma**2 * math.sqrt(len_i * len_j) * (2.0 / math.pi)
               * math.exp(-0.5 * lam2 * (vi + vj)) * np.expm1(lam2 * c))
    else:
        raise ValueError(f"unknown transform kind {kind!r}")
    return out if out.ndim else float(out)


def hf_expected_empirical_cov(h, L: float, lambda2: float):
    """Expected empirical log-increment covariance at lag ``h`` over a window ``L``
    when ``T >> L`` (does not involve ``T``)."""
    h = np.asarray(h, dtype=float)
    if np.any(h <= 0) or np.any(h >= L):
        raise ValueError("need 0 < h < L")
    r = h / L
    a = np.log(L / (h * math.exp(1.5)))
    out = (lambda2 * (a - r * a + r**2 * np.log(r) + 0.5 * (1.0 - r) ** 2 * np.log1p(-r))
           - (1.0 - r) * LOG_ABS_NORMAL_VAR / L)
    return out if out.ndim else float(out)


def cov_table(tau: float, params: ModelParams, h_max: int) -> np.ndarray:
    """Rows ``(h, model covariance, leading-order lambda2 ln(T/h))`` for ``h = 1..h_max`` (in tau units)."""
    h = tau * np.arange(1, h_max + 1, dtype=float)
    model = np.asarray(log_absinc_cov(tau, h, params))
    with np.errstate(divide="ignore"):
        leading = np.where(h < params.T, params.lambda2 * np.log(params.T / h), 0.0)
    return np.column_stack([h / tau, model, leading])
