"""Linear volatility prediction from model covariances.

The target is a transform of the ``s``-increment ending ``h`` after the forecast
origin ``t0``; the regressors are the same transform of the last ``P`` unit
increments. Three transforms are supported:

==== ====================== ===========================
kind target                 regressors
==== ====================== ===========================
Lin  ``|d_s X(t0 + h)|``    ``|d_tau X(t)|``
Sq   ``d_s X(t0 + h)^2``    ``d_tau X(t)^2``
Log  ``ln|d_s X(t0 + h)|``  ``ln|d_tau X(t)|``
==== ====================== ===========================

``h >= s`` keeps the target interval disjoint from the conditioning window.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import linalg

from .approx import transform_cross_cov, transform_mean, transform_variance
from .core_model import ModelParams

Kind = Literal["Lin", "Sq", "Log"]
_TRANSFORMS = {"Lin": "abs", "Sq": "square", "Log": "log_abs"}


def _steps(value: float, tau: float, name: str) -> int:
    k = value / tau
    if abs(k - round(k)) > 1e-9 * max(1.0, k):
        raise ValueError(f"{name} must be a multiple of tau, got {value}")
    return int(round(k))


@dataclass(frozen=True)
class PredictorSpec:
    """Linear predictor configuration; ``scale_s`` and ``horizon_h`` are in time units."""

    kind: Kind
    params: ModelParams
    scale_s: float | None = None
    horizon_h: float | None = None
    window_P: int = 512
    ridge: float = 1e-8

    def __post_init__(self):
        if self.kind not in _TRANSFORMS:
            raise ValueError(f"kind must be one of {sorted(_TRANSFORMS)}, got {self.kind!r}")
        tau = self.params.tau
        if self.scale_s is None:
            object.__setattr__(self, "scale_s", tau)
        if self.horizon_h is None:
            object.__setattr__(self, "horizon_h", self.scale_s)
        if self.window_P < 1:
            raise ValueError("window_P must be >= 1")
        if self.scale_s < tau:
            raise ValueError("scale_s must be at least tau")
        _steps(self.scale_s, tau, "scale_s")
        _steps(self.horizon_h, tau, "horizon_h")
        if self.horizon_h < self.scale_s:
            raise ValueError("horizon_h must be >= scale_s so the target lies after the window")
        if self.ridge < 0:
            raise ValueError("ridge must be nonnegative")

    @property
    def scale_steps(self) -> int:
        return _steps(self.scale_s, self.params.tau, "scale_s")

    @property
    def horizon_steps(self) -> int:
        return _steps(self.horizon_h, self.params.tau, "horizon_h")


@dataclass(frozen=True)
class LinearPredictor:
    """``prediction = intercept + sum_k weights[k] * x[t - k]`` (``weights[0]`` on the latest)."""

    weights: np.ndarray
    intercept: float
    prediction_variance: float
    target_transform: str
    spec: PredictorSpec
    target_mean: float
    target_variance: float
    regressor_mean: float


def transform(kind: Kind, increments) -> np.ndarray:
    x = np.asarray(increments, dtype=float)
    if kind == "Lin":
        return np.abs(x)
    if kind == "Sq":
        return x * x
    if kind == "Log":
        return np.log(np.abs(x))
    raise ValueError(f"unknown kind {kind!r}")


def gram_system(spec: PredictorSpec) -> tuple[np.ndarray, np.ndarray]:
    """First column of the Toeplitz regressor covariance and the target cross-covariances."""
    p, tau, P = spec.params, spec.params.tau, spec.window_P
    lags = tau * np.arange(1, P)
    col = np.empty(P)
    col[0] = transform_variance(spec.kind, tau, p)
    if P > 1:
        col[1:] = transform_cross_cov(spec.kind, tau, tau, lags, p)
    # regressor k covers [t0 - (k+1) tau, t0 - k tau]; the target starts at t0 + h - s
    offsets = spec.horizon_h - spec.scale_s + tau * np.arange(1, P + 1)
    cross = np.atleast_1d(transform_cross_cov(spec.kind, tau, spec.scale_s, offsets, p))
    return col, cross


def build_predictor(spec: PredictorSpec) -> LinearPredictor:
    """Solve the normal equations of the model-implied projection.

    Raises
    ------
    numpy.linalg.LinAlgError
        If the (ridged) Gram matrix is not positive definite.
    """
    col, cross = gram_system(spec)
    col = col.copy()
    col[0] += spec.ridge * col[0]
    if not np.any(cross):
        weights = np.zeros_like(cross)
    else:
        weights = linalg.solve_toeplitz(col, cross)
        gram = linalg.toeplitz(col)
        resid = np.max(np.abs(gram @ weights - cross))
        if not np.all(np.isfinite(weights)) or resid > 1e-8 * np.max(np.abs(cross)):
            try:
                weights = linalg.cho_solve(linalg.cho_factor(gram), cross)
            except linalg.LinAlgError as exc:
                cond = np.linalg.cond(gram)
                raise linalg.LinAlgError(f"Gram matrix is singular (condition number {cond:.3e})") from exc
    p = spec.params
    target_mean = transform_mean(spec.kind, spec.scale_s, p)
    target_var = transform_variance(spec.kind, spec.scale_s, p)
    reg_mean = transform_mean(spec.kind, p.tau, p)
    intercept = target_mean - reg_mean * float(weights.sum())
    pred_var = max(0.0, target_var - float(cross @ weights))
    return LinearPredictor(weights, intercept, pred_var, _TRANSFORMS[spec.kind], spec,
                           target_mean, target_var, reg_mean)


@dataclass
class Forecasts:
    """Predictions indexed by origin: ``values[i]`` targets the ``s``-increment ending
    ``h`` after increment ``origins[i]``."""

    origins: np.ndarray
    values: np.ndarray
    level: np.ndarray | None = None


def forecast_series(series, predictor: LinearPredictor) -> Forecasts:
    """Rolling application of a predictor to a series of ``tau`` increments."""
    x = np.asarray(series, dtype=float)
    P = predictor.weights.size
    if x.size < P:
        raise ValueError(f"series of length {x.size} is shorter than the window {P}")
    y = transform(predictor.spec.kind, x)
    values = predictor.intercept + np.convolve(y, predictor.weights, mode="valid")
    origins = np.arange(P - 1, x.size)
    level = None
    if predictor.spec.kind == "Log":
        level = np.exp(values + 0.5 * predictor.prediction_variance)
    return Forecasts(origins, values, level)


def target_increments(series, scale_steps: int, horizon_steps: int, origins) -> tuple[np.ndarray, np.ndarray]:
    """Signed ``s``-increments ending ``h`` after each origin; origins whose target runs
    past the series end are dropped. Returns ``(kept_mask, increments)``."""
    x = np.asarray(series, dtype=float)
    origins = np.asarray(origins, dtype=int)
    csum = np.concatenate([[0.0], np.cumsum(x)])
    end = origins + 1 + horizon_steps
    keep = end <= x.size
    return keep, csum[end[keep]] - csum[end[keep] - scale_steps]


def realized_targets(series, kind: Kind, scale_steps: int, horizon_steps: int, origins) -> tuple[np.ndarray, np.ndarray]:
    """Transformed targets aligned with ``origins`` (see :func:`target_increments`)."""
    keep, inc = target_increments(series, scale_steps, horizon_steps, origins)
    return keep, transform(kind, inc)


def evaluate_forecasts(predictions, realized, metric: Literal["MAE", "MSE"] = "MSE") -> float:
    a = np.asarray(predictions, dtype=float)
    b = np.asarray(realized, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    err = a - b
    if metric == "MAE":
        return float(np.mean(np.abs(err)))
    if metric == "MSE":
        return float(np.mean(err * err))
    raise ValueError(f"unknown metric {metric!r}")


def forecast_errors(series, spec: PredictorSpec, metrics=("MAE", "MSE")) -> dict:
    """Model and unconditional-mean baseline errors on one series."""
    pred = build_predictor(spec)
    fc = forecast_series(series, pred)
    keep, target = realized_targets(series, spec.kind, spec.scale_steps, spec.horizon_steps, fc.origins)
    model = fc.values[keep]
    base = np.full_like(model, pred.target_mean)
    return {m: {"model": evaluate_forecasts(model, target, m), "baseline": evaluate_forecasts(base, target, m)}
            for m in metrics}

