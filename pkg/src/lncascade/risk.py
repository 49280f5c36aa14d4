"""Conditional Value-at-Risk and coverage backtests.

To first order an increment at scale ``s`` reads ``sigma sqrt(s) eps exp(G)`` with
``eps`` standard normal and ``G`` Gaussian, independent. Projecting
``ln|d_s X|`` on past log-absolute increments yields the conditional law
``G ~ N(m, v)``; the VaR then solves

    E_G[ Phi(-VaR / (sigma sqrt(s) exp(G))) ] = p.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special, stats

from .approx import LOG_ABS_NORMAL_MEAN, LOG_ABS_NORMAL_VAR
from .core_model import ModelParams
from .forecast import LinearPredictor, PredictorSpec, build_predictor, forecast_series, target_increments

GH_NODES = 64


@dataclass(frozen=True)
class ConditionalMagnitudeLaw:
    """Gaussian law ``N(mean_m, variance_v)`` of the log-volatility factor at the target."""

    mean_m: float
    variance_v: float

    def __post_init__(self):
        if not (math.isfinite(self.mean_m) and math.isfinite(self.variance_v)):
            raise ValueError("non-finite conditional law")
        if self.variance_v < 0:
            raise ValueError("variance_v must be nonnegative")


def _log_predictor(params: ModelParams, s: float, h: float, window_P: int) -> LinearPredictor:
    return build_predictor(PredictorSpec("Log", params, scale_s=s, horizon_h=h, window_P=window_P))


def _noise_offset(params: ModelParams, s: float) -> float:
    return math.log(params.sigma) + 0.5 * math.log(s) + LOG_ABS_NORMAL_MEAN


def conditional_magnitude_law(Z_history, params: ModelParams, s: float | None = None,
                              h: float | None = None, window_P: int = 512,
                              predictor: LinearPredictor | None = None) -> ConditionalMagnitudeLaw:
    """Conditional law of the magnitude factor given the last ``window_P`` values of
    ``ln|d_tau X|`` (most recent last)."""
    s = params.tau if s is None else s
    h = s if h is None else h
    z = np.asarray(Z_history, dtype=float)
    if z.size < window_P:
        raise ValueError(f"need at least {window_P} past values, got {z.size}")
    pred = predictor or _log_predictor(params, s, h, window_P)
    mean = pred.intercept + float(pred.weights @ z[::-1][:window_P])
    return ConditionalMagnitudeLaw(mean - _noise_offset(params, s),
                                   max(0.0, pred.prediction_variance - LOG_ABS_NORMAL_VAR))


@functools.lru_cache(maxsize=8)
def _hermite(nodes: int):
    return special.roots_hermite(nodes)


def _tail_prob(u: float, m: float, v: float, nodes: int) -> float:
    """``P[eps exp(G) < -u]`` for ``G ~ N(m, v)``."""
    if v == 0:
        return float(special.ndtr(-u * math.exp(-m)))
    x, w = _hermite(nodes)
    g = m + math.sqrt(2.0 * v) * x
    return float(w @ special.ndtr(-u * np.exp(-g)) / math.sqrt(math.pi))


def standardized_var(p: float, m: float, v: float, nodes: int = GH_NODES) -> float:
    """VaR of ``eps exp(G)`` (unit ``sigma`` and ``s``)."""
    if v == 0:
        return float(-special.ndtri(p) * math.exp(m))
    f = lambda u: _tail_prob(u, m, v, nodes) - p
    hi = -special.ndtri(p) * math.exp(m + 8.0 * math.sqrt(v)) + 1.0
    return float(optimize.brentq(f, 0.0, hi, rtol=1e-10, xtol=1e-300))


def var_forecast(law: ConditionalMagnitudeLaw, p: float, sigma: float = 1.0, s: float = 1.0,
                 allow_upper: bool = False, nodes: int = GH_NODES) -> float:
    """Positive loss level exceeded with probability ``p`` (``0 < p < 1/2``).

    ``allow_upper=True`` accepts ``p >= 1/2`` and returns the symmetric value, which
    is then zero or negative.
    """
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    if p >= 0.5 and not allow_upper:
        raise ValueError("p must be below 1/2 (loss tail); pass allow_upper=True for the other tail")
    if sigma <= 0 or s <= 0:
        raise ValueError("sigma and s must be positive")
    if p >= 0.5:
        return -sigma * math.sqrt(s) * standardized_var(1.0 - p, law.mean_m, law.variance_v, nodes)
    return sigma * math.sqrt(s) * standardized_var(p, law.mean_m, law.variance_v, nodes)


def var_forecast_mc(law: ConditionalMagnitudeLaw, p: float, sigma: float = 1.0, s: float = 1.0,
                    n_draws: int = 1_000_000, rng: np.random.Generator | None = None) -> tuple[float, float]:
    """Monte-Carlo VaR and its standard error (sparsity estimate of the quantile density)."""
    rng = rng or np.random.default_rng(0)
    g = law.mean_m + math.sqrt(law.variance_v) * rng.standard_normal(n_draws)
    y = sigma * math.sqrt(s) * rng.standard_normal(n_draws) * np.exp(g)
    q = float(np.quantile(y, p))
    d = 2.0 * n_draws ** (-1.0 / 3.0)
    lo, hi = np.quantile(y, [max(p - d, 1e-9), min(p + d, 1 - 1e-9)])
    density = (min(p + d, 1 - 1e-9) - max(p - d, 1e-9)) / (hi - lo)
    se = math.sqrt(p * (1.0 - p) / n_draws) / density
    return -q, se


# -- backtests ----------------------------------------------------------------

@dataclass(frozen=True)
class CoverageTest:
    """Likelihood-ratio coverage test; iterates as ``(stat, passed)``."""

    stat: float
    passed: bool
    df: int
    p_value: float
    fallback: bool = False

    def __iter__(self):
        return iter((self.stat, self.passed))


def _binary(violations) -> np.ndarray:
    v = np.asarray(violations)
    if v.size == 0:
        raise ValueError("empty violation series")
    if not np.all((v == 0) | (v == 1)):
        raise ValueError("violations must be 0/1")
    return v.astype(int)


def _bernoulli_loglik(ones: int, zeros: int, prob: float) -> float:
    return float(special.xlogy(ones, prob) + special.xlog1py(zeros, -prob))


def kupiec_lr(violations, p: float) -> float:
    v = _binary(violations)
    x, n = int(v.sum()), v.size
    return max(0.0, -2.0 * (_bernoulli_loglik(x, n - x, p) - _bernoulli_loglik(x, n - x, x / n)))


def kupiec_test(violations, p: float, level: float = 0.95) -> CoverageTest:
    """Unconditional coverage (1 degree of freedom)."""
    stat = kupiec_lr(violations, p)
    pval = float(stats.chi2.sf(stat, 1))
    return CoverageTest(stat, bool(stat <= stats.chi2.ppf(level, 1)), 1, pval)


def transition_counts(violations) -> np.ndarray:
    v = _binary(violations)
    counts = np.zeros((2, 2), dtype=int)
    np.add.at(counts, (v[:-1], v[1:]), 1)
    return counts


def christoffersen_test(violations, p: float, level: float = 0.95) -> CoverageTest:
    """Conditional coverage: unconditional coverage plus first-order Markov independence
    (2 degrees of freedom). Falls back to the Kupiec test when a row of the
    transition table is empty."""
    v = _binary(violations)
    if v.size < 2:
        raise ValueError("need at least two observations")
    (n00, n01), (n10, n11) = transition_counts(v)
    if n00 + n01 == 0 or n10 + n11 == 0:
        k = kupiec_test(v, p, level)
        return CoverageTest(k.stat, k.passed, 1, k.p_value, fallback=True)
    pi01 = n01 / (n00 + n01)
    pi11 = n11 / (n10 + n11)
    pi = (n01 + n11) / (n00 + n01 + n10 + n11)
    ind = -2.0 * (_bernoulli_loglik(n01 + n11, n00 + n10, pi)
                  - _bernoulli_loglik(n01, n00, pi01) - _bernoulli_loglik(n11, n10, pi11))
    stat = kupiec_lr(v, p) + max(0.0, ind)
    pval = float(stats.chi2.sf(stat, 2))
    return CoverageTest(stat, bool(stat <= stats.chi2.ppf(level, 2)), 2, pval)


@dataclass
class VarBacktestReport:
    p: float
    violations: np.ndarray
    var: np.ndarray
    kupiec_stat: float
    kupiec_pass: bool
    christoffersen_stat: float
    christoffersen_pass: bool
    n_obs: int
    notes: dict = field(default_factory=dict)

    @property
    def violation_rate(self) -> float:
        return float(self.violations.mean())

    def summary(self) -> dict:
        return {"p": self.p, "n_obs": self.n_obs, "violations": int(self.violations.sum()),
                "violation_rate": self.violation_rate,
                "kupiec_stat": self.kupiec_stat, "kupiec_pass": bool(self.kupiec_pass),
                "christoffersen_stat": self.christoffersen_stat,
                "christoffersen_pass": bool(self.christoffersen_pass), **self.notes}


def rolling_var(returns, params: ModelParams, p: float, s: float | None = None,
                h: float | None = None, window_P: int = 512):
    """VaR forecast at every origin with a full window. Returns ``(origins, var)``.

    Only the conditional mean moves with the data, so the VaR is
    ``sigma sqrt(s) exp(m_t) * VaR_1(p, 0, v)``.
    """
    s = params.tau if s is None else s
    h = s if h is None else h
    pred = _log_predictor(params, s, h, window_P)
    fc = forecast_series(returns, pred)
    m = fc.values - _noise_offset(params, s)
    v = max(0.0, pred.prediction_variance - LOG_ABS_NORMAL_VAR)
    unit = standardized_var(p, 0.0, v)
    return fc.origins, params.sigma * math.sqrt(s) * np.exp(m) * unit


def run_var_backtest(returns, params: ModelParams, p: float, s: float | None = None,
                     h: float | None = None, window_P: int = 512, level: float = 0.95) -> VarBacktestReport:
    """Rolling VaR forecasts, violation indicators and both coverage tests."""
    x = np.asarray(returns, dtype=float)
    s = params.tau if s is None else s
    h = s if h is None else h
    if x.size <= window_P:
        raise ValueError("series must be longer than the window")
    origins, var = rolling_var(x, params, p, s, h, window_P)
    keep, signed = target_increments(x, int(round(s / params.tau)), int(round(h / params.tau)), origins)
    if signed.size == 0:
        raise ValueError("no evaluation point after the first window")
    viol = (signed < -var[keep]).astype(int)
    k = kupiec_test(viol, p, level)
    c = christoffersen_test(viol, p, level) if viol.size >= 2 else CoverageTest(k.stat, k.passed, 1, k.p_value, True)
    return VarBacktestReport(p, viol, var[keep], k.stat, bool(k.passed), c.stat, bool(c.passed), int(viol.size),
                             {"christoffersen_fallback": c.fallback})
