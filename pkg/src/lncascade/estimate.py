"""Parameter estimation from log-absolute increments.

Three estimators share the series ``Z[k] = ln|dX[k]|``:

* ``gmm_estimate``: iterated GMM on the mean of ``exp(2Z)`` and the lagged
  cross-moments of ``Z`` around the model mean, with model moments from
  :mod:`lncascade.approx` (first order in ``lambda2``, hence misspecified).
* ``hf_lambda2`` / ``hf_lambda2_ols``: ``lambda2`` from differences of empirical
  covariances, which cancel the unknown ``T`` and ``tau``.
* ``mc_confidence_interval``: percentile intervals from simulated replicas.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy import linalg, optimize

from .approx import log_absinc_cov, log_absinc_mean
from .core_model import ModelParams
from .kernels import f_shape

Regime = Literal["low_frequency", "high_frequency", "indeterminate"]


class ZeroIncrementError(ValueError):
    """A zero increment has no logarithm; apply the tick rule at ingestion."""


def log_abs_series(increments) -> np.ndarray:
    x = np.asarray(increments, dtype=float)
    zero = np.flatnonzero(x == 0)
    if zero.size:
        raise ZeroIncrementError(
            f"{zero.size} zero increment(s), first at index {zero[0]}; "
            "perturb equal consecutive prices by one tick (lncascade.io.ingest_prices)")
    return np.log(np.abs(x))


def empirical_log_cov(Z, lags) -> np.ndarray:
    """``R[n] = (1/N) sum_k (Z[k] - mu)(Z[k+n] - mu)`` with the global sample mean ``mu``."""
    z = np.asarray(Z, dtype=float)
    lags = np.atleast_1d(np.asarray(lags, dtype=int))
    N = z.size
    if np.any(lags < 0) or np.any(lags >= N):
        raise ValueError(f"lags must lie in [0, {N - 1}]")
    d = z - z.mean()
    return np.array([np.dot(d[: N - n], d[n:]) / N for n in lags])


def default_lags(count: int = 43, hi: int = 150) -> tuple[int, ...]:
    """``count`` distinct integers spread roughly log-uniformly over ``[1, hi]``."""
    for m in range(count, 10 * count):
        lags = np.unique(np.rint(np.geomspace(1, hi, m)).astype(int))
        if lags.size >= count:
            return tuple(int(v) for v in lags[:count]) if lags.size == count else _thin(lags, count)
    raise ValueError(f"cannot place {count} distinct lags in [1, {hi}]")


def _thin(lags: np.ndarray, count: int) -> tuple[int, ...]:
    keep = np.unique(np.rint(np.linspace(0, lags.size - 1, count)).astype(int))
    return tuple(int(v) for v in lags[keep])


@dataclass(frozen=True)
class GmmConfig:
    """Settings of :func:`gmm_estimate`.

    ``lambda2_bounds`` and the ``ln T`` range ``[ln tau, ln(logT_upper_factor * L)]``
    bound the simplex search; ``ln sigma`` is free.
    """

    lags: tuple[int, ...] = field(default_factory=default_lags)
    max_outer_iterations: int = 10
    outer_tolerance: float = 1e-6
    restarts: int = 3
    max_evals: int = 3000
    lambda2_bounds: tuple[float, float] = (1e-6, 0.49)
    logT_upper_factor: float = 100.0
    regime_band: float = 1.0
    hac_bandwidth: int | None = None
    seed: int = 0

    def __post_init__(self):
        lags = tuple(int(v) for v in self.lags)
        object.__setattr__(self, "lags", lags)
        if len(lags) <= 3:
            raise ValueError("need more than 3 lags (over-identification)")
        if any(b <= a for a, b in zip(lags, lags[1:])) or lags[0] < 1:
            raise ValueError("lags must be positive and strictly increasing")


@dataclass
class GmmResult:
    theta_hat: tuple[float, float, float]
    objective: float
    iterations: int
    weighting: str
    regime: Regime
    tau: float
    L: float
    notes: dict = field(default_factory=dict)

    @property
    def params(self) -> ModelParams:
        return ModelParams.from_theta(self.theta_hat, tau=self.tau)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["theta_hat"] = {"ln_sigma": self.theta_hat[0], "lambda2": self.theta_hat[1], "ln_T": self.theta_hat[2]}
        return d


@dataclass(frozen=True)
class MomentStats:
    """Sufficient statistics of the sample moment vector.

    Rows ``k = h_max .. N-1`` enter every component so that all moments are averaged
    over the same observations.
    """

    Z: np.ndarray
    lags: np.ndarray
    tau: float
    mean_e2z: float
    cross: np.ndarray  # mean Z[k] Z[k-h]
    lead: float  # mean Z[k]
    lagged: np.ndarray  # mean Z[k-h]

    @classmethod
    def from_series(cls, Z, lags, tau: float) -> "MomentStats":
        z = np.asarray(Z, dtype=float)
        lags = np.asarray(lags, dtype=int)
        hmax = int(lags.max())
        if z.size <= hmax + 1:
            raise ValueError("series shorter than the largest lag")
        cur = z[hmax:]
        cross = np.array([np.mean(cur * z[hmax - h: z.size - h]) for h in lags])
        lagged = np.array([np.mean(z[hmax - h: z.size - h]) for h in lags])
        return cls(z, lags, tau, float(np.mean(np.exp(2.0 * cur))), cross, float(cur.mean()), lagged)

    def rows(self, theta) -> np.ndarray:
        """Per-observation moment vectors, shape ``(N - h_max, K + 1)``."""
        ln_sigma, _, _ = theta
        mu, c = model_log_moments(theta, self.lags, self.tau)
        z, hmax = self.Z, int(self.lags.max())
        cur = z[hmax:] - mu
        out = np.empty((cur.size, self.lags.size + 1))
        out[:, 0] = np.exp(2.0 * z[hmax:]) - math.exp(2.0 * ln_sigma) * self.tau
        for j, h in enumerate(self.lags):
            out[:, j + 1] = cur * (z[hmax - h: z.size - h] - mu) - c[j]
        return out


def model_log_moments(theta, lags, tau: float):
    """Model mean ``mu_theta`` and covariances ``C_theta[h]`` (lags in ``tau`` units)."""
    params = ModelParams.from_theta(theta, tau=tau)
    h = np.asarray(lags, dtype=float) * tau
    return log_absinc_mean(tau, params), np.asarray(log_absinc_cov(tau, h, params))


def gmm_moment_function(stats: MomentStats, theta) -> np.ndarray:
    """Sample moment vector ``g_N(theta)`` of length ``K + 1``."""
    ln_sigma = theta[0]
    mu, c = model_log_moments(theta, stats.lags, stats.tau)
    g = np.empty(stats.lags.size + 1)
    g[0] = stats.mean_e2z - math.exp(2.0 * ln_sigma) * stats.tau
    g[1:] = stats.cross - mu * (stats.lead + stats.lagged) + mu * mu - c
    return g


def hac_covariance(rows: np.ndarray, bandwidth: int) -> np.ndarray:
    """Bartlett-kernel long-run covariance of the (demeaned) moment rows."""
    u = rows - rows.mean(axis=0)
    n = u.shape[0]
    V = u.T @ u / n
    for j in range(1, min(bandwidth, n - 1) + 1):
        gam = u[j:].T @ u[:-j] / n
        V += (1.0 - j / (bandwidth + 1.0)) * (gam + gam.T)
    return V


def _inverse_weighting(V: np.ndarray) -> tuple[np.ndarray, bool]:
    try:
        c = linalg.cho_factor(V)
        return linalg.cho_solve(c, np.eye(V.shape[0])), False
    except linalg.LinAlgError:
        ridge = 1e-8 * np.trace(V)
        c = linalg.cho_factor(V + ridge * np.eye(V.shape[0]))
        return linalg.cho_solve(c, np.eye(V.shape[0])), True


def regression_start(Z, lags, tau: float, bounds) -> tuple[float, float, float]:
    """Starting point from the mean of ``exp(2Z)`` and an OLS fit of the log covariances."""
    z = np.asarray(Z, dtype=float)
    lags = np.asarray(lags)
    ln_sigma = 0.5 * math.log(np.mean(np.exp(2.0 * z)) / tau)
    r = empirical_log_cov(z, lags)
    x = f_shape(lags.astype(float)) - np.log(lags)
    slope, icpt = np.polyfit(x, r, 1)
    lam2 = float(np.clip(slope, 1e-3, 0.3))
    ln_T = float(np.clip(icpt / lam2 - 1.5 + math.log(tau), bounds[2][0], bounds[2][1]))
    return ln_sigma, lam2, ln_T


def gmm_estimate(returns, tau: float = 1.0, config: GmmConfig | None = None) -> GmmResult:
    """Iterated GMM estimate of ``(ln sigma, lambda2, ln T)`` from increments.

    Stage 0 uses the identity weighting; each later stage weights with the inverse
    HAC covariance of the moment rows at the previous estimate. Stops when no
    coordinate moves by more than ``outer_tolerance``.
    """
    config = config or GmmConfig()
    Z = log_abs_series(returns)
    N = Z.size
    lags = np.asarray(config.lags)
    if N < 4 * lags.max():
        raise ValueError(f"need at least {4 * lags.max()} increments, got {N}")
    L = N * tau
    bounds = [(None, None), config.lambda2_bounds,
              (math.log(tau), math.log(config.logT_upper_factor * L))]
    stats = MomentStats.from_series(Z, lags, tau)
    bandwidth = config.hac_bandwidth or int(math.floor(1.3 * N ** (1.0 / 3.0)))
    rng = np.random.default_rng(config.seed)

    W = np.eye(lags.size + 1)
    theta = np.array(regression_start(Z, lags, tau, bounds))
    trace, notes = [], {"lags": [int(v) for v in lags], "hac_bandwidth": bandwidth,
                        "optimizer_failures": 0, "ridge_applied": False}
    weighting = "identity"
    it = 0
    for it in range(1, config.max_outer_iterations + 1):
        # restarts guard the first (identity-weighted) search; later stages warm start
        n_restarts = config.restarts if it == 1 else 0
        starts = [theta] + [_perturb(theta, rng, bounds) for _ in range(n_restarts)]
        best = None
        for x0 in starts:
            res = _simplex(lambda th: _objective(stats, th, W), x0, bounds, config.max_evals)
            if not res.success:
                notes["optimizer_failures"] += 1
            if best is None or res.fun < best.fun:
                best = res
        step = np.max(np.abs(best.x - theta))
        theta = best.x
        trace.append(float(best.fun))
        V = hac_covariance(stats.rows(theta), bandwidth)
        W, ridged = _inverse_weighting(V)
        notes["ridge_applied"] |= ridged
        weighting = f"hac_bartlett(bandwidth={bandwidth})"
        if it > 1 and step < config.outer_tolerance:
            break
    objective = _objective(stats, theta, W)
    notes["objective_trace"] = trace
    notes["objective_increases"] = int(sum(b > a * (1 + 1e-9) + 1e-15 for a, b in zip(trace, trace[1:])))
    notes["converged"] = bool(it < config.max_outer_iterations)
    theta_hat = tuple(float(v) for v in theta)
    result = GmmResult(theta_hat, float(objective), it, weighting, "indeterminate", tau, L, notes)
    result.regime = regime_diagnostic(result, L, tau, band=config.regime_band)
    return result


def _objective(stats, theta, W) -> float:
    g = gmm_moment_function(stats, theta)
    return float(g @ W @ g)


def _perturb(theta, rng, bounds):
    lo, hi = bounds[1]
    lam2 = float(np.clip(theta[1] * rng.uniform(0.5, 1.5), lo, hi))
    ln_T = float(np.clip(theta[2] + rng.normal(0.0, 1.0), *bounds[2]))
    return np.array([theta[0] + rng.normal(0.0, 0.1), lam2, ln_T])


def _simplex(fun, x0, bounds, max_evals):
    x0 = np.array([np.clip(v, *(b if b[0] is not None else (-np.inf, np.inf))) for v, b in zip(x0, bounds)])
    steps = np.array([0.1, max(0.25 * x0[1], 2e-3), 0.5])
    simplex = np.vstack([x0] + [x0 + np.diag(steps)[i] for i in range(3)])
    for i, (lo, hi) in enumerate(bounds):
        if hi is not None:
            # step inward when the start sits on the upper bound
            simplex[i + 1, i] = x0[i] - steps[i] if simplex[i + 1, i] > hi else simplex[i + 1, i]
    return optimize.minimize(fun, x0, method="Nelder-Mead", bounds=bounds,
                             options={"initial_simplex": simplex, "maxfev": max_evals,
                                      "xatol": 1e-8, "fatol": 1e-14})


def regime_diagnostic(result: GmmResult | float, L: float, tau: float = 1.0, band: float = 1.0) -> Regime:
    """Classify from ``ln T_hat``: near ``ln L - 3/2`` means the window is inside the
    integral scale (high frequency); clearly below means the low-frequency regime."""
    ln_T = result.theta_hat[2] if isinstance(result, GmmResult) else float(result)
    center = math.log(L) - 1.5
    if abs(ln_T - center) < band:
        return "high_frequency"
    if ln_T < center - band:
        return "low_frequency"
    return "indeterminate"


def _g(n):
    """``ln n - f(n)``: the lag dependence of the log covariance is ``-lambda2 * g(n)``."""
    n = np.asarray(n, dtype=float)
    return np.log(n) - f_shape(n)


def hf_lambda2(Z, n: int, n_prime: int, tau: float = 1.0, T_bound: float | None = None) -> float:
    """Two-lag estimate ``(R[n] - R[n']) / (g(n') - g(n))``; independent of ``T`` and ``tau``."""
    if n == n_prime or n < 1 or n_prime < 1:
        raise ValueError("need two distinct positive lags")
    if T_bound is not None and not (n * tau < T_bound and n_prime * tau < T_bound):
        raise ValueError("both lags must stay below the integral-scale bound")
    r = empirical_log_cov(Z, [n, n_prime])
    denom = float(_g(n_prime) - _g(n))
    return float((r[0] - r[1]) / denom)


def hf_lambda2_ols(Z, lags) -> float:
    """Slope of ``R[n]`` on ``f(n) - ln n`` over a lag set (intercept free)."""
    lags = np.asarray(lags, dtype=int)
    if lags.size < 2:
        raise ValueError("need at least two lags")
    r = empirical_log_cov(Z, lags)
    slope, _ = np.polyfit(-_g(lags), r, 1)
    return float(slope)


# -- Monte-Carlo intervals ----------------------------------------------------

def _estimator(name: str, tau: float, config: GmmConfig | None, n=2, n_prime=16, lags=None) -> Callable:
    if name == "gmm":
        cfg = config or GmmConfig()

        def run(x):
            th = gmm_estimate(x, tau, cfg).theta_hat
            return {"sigma": math.exp(th[0]), "lambda2": th[1], "T": math.exp(th[2])}
        return run
    if name == "hf_lambda2":
        return lambda x: {"lambda2": hf_lambda2(log_abs_series(x), n, n_prime, tau)}
    if name == "hf_lambda2_ols":
        lagset = lags if lags is not None else tuple(range(1, 33))
        return lambda x: {"lambda2": hf_lambda2_ols(log_abs_series(x), lagset)}
    raise ValueError(f"unknown estimator {name!r}")


@dataclass
class McInterval:
    level: float
    intervals: dict
    samples: dict

    def to_dict(self) -> dict:
        return {"level": self.level, "intervals": self.intervals,
                "n_realizations": len(next(iter(self.samples.values()), []))}


def percentile_intervals(samples: dict, level: float) -> dict:
    q = 100.0 * (1.0 - level) / 2.0
    return {k: (float(np.percentile(v, q)), float(np.percentile(v, 100.0 - q))) for k, v in samples.items()}


def mc_confidence_interval(params: ModelParams, L: float, estimator: str | Callable = "gmm",
                           n_realizations: int = 1000, level: float = 0.95, seed: int = 0,
                           config: GmmConfig | None = None, l_ratio: int | None = None,
                           progress: Callable[[int], None] | None = None) -> McInterval:
    """Percentile intervals of an estimator over simulated MRW replicas.

    ``estimator`` is ``"gmm"``, ``"hf_lambda2"``, ``"hf_lambda2_ols"`` or a callable
    mapping increments to a dict of named estimates. Replica ``i`` uses path ``i`` of
    the master ``seed``.
    """
    from .simulate import SimulationSpec, simulate_mrw

    if n_realizations < 100:
        raise ValueError("n_realizations must be at least 100")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    run = estimator if callable(estimator) else _estimator(estimator, params.tau, config)
    n = int(round(L / params.tau))
    spec = SimulationSpec(params, n, seed, l_ratio=l_ratio)
    samples: dict[str, list] = {}
    for i in range(n_realizations):
        for k, v in run(simulate_mrw(spec, i).values).items():
            samples.setdefault(k, []).append(v)
        if progress:
            progress(i)
    arrays = {k: np.asarray(v) for k, v in samples.items()}
    return McInterval(level, percentile_intervals(arrays, level), arrays)
