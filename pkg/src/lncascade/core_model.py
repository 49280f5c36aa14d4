"""Parameters and closed-form scaling functions of the log-normal cascade.

All functions accept scalars or numpy arrays for ``q``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Literal

import numpy as np
from scipy.special import gammaln

Process = Literal["MRM", "MRW"]


@dataclass(frozen=True)
class ModelParams:
    """Parameter set of a log-normal MRM/MRW.

    Parameters
    ----------
    sigma : float
        Scale of the subordinated Brownian motion (per sqrt time unit).
    lambda2 : float
        Intermittency coefficient, ``0 <= lambda2 < 1/2``. ``lambda2 = 0`` is the
        degenerate Brownian case.
    T : float
        Integral scale.
    tau : float
        Sampling period.
    l : float or None
        Small-scale cutoff used by the simulator. ``None`` means ``tau / 128``.
    """

    sigma: float = 1.0
    lambda2: float = 0.02
    T: float = 200.0
    tau: float = 1.0
    l: float | None = None

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not 0 <= self.lambda2 < 0.5:
            raise ValueError(f"lambda2 must lie in [0, 1/2), got {self.lambda2}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if not 0 < self.tau <= self.T:
            raise ValueError(f"need 0 < tau <= T, got tau={self.tau}, T={self.T}")
        if self.l is not None:
            if not 0 < self.l <= self.tau:
                raise ValueError(f"need 0 < l <= tau, got l={self.l}")
            ratio = self.tau / self.l
            if abs(ratio - round(ratio)) > 1e-9 * ratio:
                raise ValueError(f"tau / l must be an integer, got {ratio}")

    @property
    def l_ratio(self) -> int:
        return 128 if self.l is None else int(round(self.tau / self.l))

    @property
    def cutoff(self) -> float:
        return self.tau / self.l_ratio

    @property
    def theta(self) -> tuple[float, float, float]:
        """Estimation coordinates ``(ln sigma, lambda2, ln T)``."""
        return (math.log(self.sigma), self.lambda2, math.log(self.T))

    @classmethod
    def from_theta(cls, theta, tau: float = 1.0, l: float | None = None) -> "ModelParams":
        log_sigma, lambda2, log_T = (float(v) for v in theta)
        return cls(sigma=math.exp(log_sigma), lambda2=lambda2, T=math.exp(log_T), tau=tau, l=l)

    def replace(self, **changes) -> "ModelParams":
        return ModelParams(**{**asdict(self), **changes})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ScaleFactorLaw:
    """Gaussian law of ``Omega_s`` in the stochastic scale-invariance factor ``W_s``.

    For the MRM, ``W_s = s * exp(Omega_s)``; for the MRW, ``W_s = sqrt(s) * exp(Omega_s / 2)``.
    """

    mean: float
    variance: float
    s: float = field(default=1.0)
    process: Process = field(default="MRM")

    def log_moment(self, q):
        """``ln E[W_s ** q]``, in closed form."""
        q = np.asarray(q, dtype=float)
        if self.process == "MRM":
            return q * math.log(self.s) + q * self.mean + 0.5 * q**2 * self.variance
        return 0.5 * q * math.log(self.s) + 0.5 * q * self.mean + 0.125 * q**2 * self.variance


def psi(q, lambda2: float):
    return 2.0 * lambda2 * np.square(q) - 2.0 * lambda2 * np.asarray(q, dtype=float)


def zeta_m(q, lambda2: float):
    """Scaling exponent of the MRM moments, ``q - psi(q)``."""
    q = np.asarray(q, dtype=float)
    return (1.0 + 2.0 * lambda2) * q - 2.0 * lambda2 * q**2


def zeta_x(q, lambda2: float):
    q = np.asarray(q, dtype=float)
    return 0.5 * q * (1.0 + 2.0 * lambda2) - 0.5 * lambda2 * q**2


def _is_pole(x: float) -> bool:
    return x <= 0 and abs(x - round(x)) < 1e-12


def double_factorial_odd(n: int) -> int:
    """``(2n - 1)!!``."""
    out = 1
    for k in range(1, 2 * n, 2):
        out *= k
    return out


def moment_prefactor(n: int, params: ModelParams, mrw: bool = False) -> float:
    """Prefactor ``K_n`` of ``E[M[0, t]^n] = K_n t^zeta_M(n)`` for ``t <= T``.

    The product is the Selberg integral with pair exponent ``-4 lambda2``; the
    moment order ``n`` appears inside the denominator Gamma function. With
    ``mrw=True`` the walk prefactor ``(2n-1)!! K_n`` of ``E[X(t)^(2n)]`` is returned.

    Raises
    ------
    ValueError
        If ``n < 1`` or a Gamma argument hits a pole.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    n = int(n)
    lam2 = params.lambda2
    log_k = 2 * n * math.log(params.sigma) + 2 * n * (n - 1) * lam2 * math.log(params.T)
    for k in range(n):
        num = (1 - 2 * (k + 1) * lam2, 1 - 2 * k * lam2, 1 - 2 * k * lam2)
        den = (2 - 2 * (n + k - 1) * lam2, 1 - 2 * lam2)
        for x in num + den:
            if _is_pole(x):
                raise ValueError(f"Gamma pole at argument {x} (n={n}, lambda2={lam2})")
        # the sign of Gamma is irrelevant for admissible (finite-moment) orders
        log_k += sum(gammaln(x) for x in num) - sum(gammaln(x) for x in den)
    value = math.exp(log_k)
    if mrw:
        value *= double_factorial_odd(n)
    return value


def scale_factor_law(s: float, lambda2: float, process: Process = "MRM") -> ScaleFactorLaw:
    """Law of ``Omega_s``: mean ``2 lambda2 ln s`` and variance ``-4 lambda2 ln s``."""
    if not 0 < s <= 1:
        raise ValueError(f"s must lie in (0, 1], got {s}")
    if process not in ("MRM", "MRW"):
        raise ValueError(f"process must be 'MRM' or 'MRW', got {process!r}")
    log_s = math.log(s)
    return ScaleFactorLaw(mean=2.0 * lambda2 * log_s, variance=-4.0 * lambda2 * log_s,
                          s=s, process=process)
