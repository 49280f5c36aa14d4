"""Seeded Monte-Carlo synthesis of the magnitude, MRM increments and MRW paths.

The magnitude ``omega_{l,T}`` is sampled on the fine grid ``k * l`` and held constant
on each fine cell; coarse ``tau`` increments sum ``tau / l`` fine cells:

    dM[k] = sum_j l * exp(2 omega_j)
    dX[k] = sum_j sqrt(l) * eps_j * exp(omega_j),   eps_j ~ N(0, sigma^2)

Seeds
-----
Every random stream is ``numpy.random.SeedSequence(seed, spawn_key=(path, role))``
with role 0 for the magnitude, 1 for the Gaussian noise and 2 for the tick rule of
:mod:`lncascade.io`. Path ``i`` of an ensemble is therefore identical whether it is
generated alone or as part of the ensemble.
"""
from __future__ import annotations

import functools
import json
import math
import os
import struct
from dataclasses import asdict, dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy import fft as sp_fft
from scipy import linalg

from .core_model import ModelParams
from .kernels import MagnitudeKernel

ROLE_OMEGA, ROLE_NOISE, ROLE_TICK = 0, 1, 2

Sampler = Literal["circulant", "cholesky"]
PathKind = Literal["omega", "mrm_increments", "mrw_increments", "mrw_levels"]
_KIND_CODES = {"omega": 0, "mrm_increments": 1, "mrw_increments": 2, "mrw_levels": 3}

BINARY_MAGIC = b"LNCP"
BINARY_VERSION = 1
# magic, version, kind, n, tau, seed
_HEADER = struct.Struct("<4sHHQdQ")


class EmbeddingError(RuntimeError):
    """The circulant embedding has negative spectral mass even after padding."""


def rng_for(seed: int, path: int, role: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(path, role))))


def fft_workers() -> int:
    return max(1, int(os.environ.get("LNCASCADE_THREADS", "1")))


@dataclass(frozen=True)
class SimulationSpec:
    """What to simulate.

    Parameters
    ----------
    params : ModelParams
    n_samples : int
        Number of ``tau``-spaced observations.
    seed : int
        Master seed (unsigned 64-bit).
    sampler : {"circulant", "cholesky"}
    l_ratio : int or None
        ``tau / l``. ``None`` takes ``params.l_ratio`` (128 unless ``params.l`` is set).
    """

    params: ModelParams
    n_samples: int
    seed: int
    sampler: Sampler = "circulant"
    l_ratio: int | None = None

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.sampler not in ("circulant", "cholesky"):
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if self.l_ratio is not None and self.l_ratio < 1:
            raise ValueError("l_ratio must be >= 1")

    @property
    def ratio(self) -> int:
        return self.params.l_ratio if self.l_ratio is None else int(self.l_ratio)

    @property
    def cutoff(self) -> float:
        return self.params.tau / self.ratio

    @property
    def kernel(self) -> MagnitudeKernel:
        return MagnitudeKernel(l=self.cutoff, T=self.params.T, lambda2=self.params.lambda2)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["l_ratio"] = self.ratio
        return d


@dataclass
class SampledPath:
    values: np.ndarray
    kind: PathKind
    spec: SimulationSpec
    path_index: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ValueError(f"unknown path kind {self.kind!r}")


class _LagCov:
    """Hashable lag-indexed view of a magnitude kernel on the fine grid."""

    def __init__(self, kernel: MagnitudeKernel, step: float):
        self.kernel, self.step = kernel, step

    def __call__(self, k):
        return self.kernel(np.asarray(k, dtype=float) * self.step)

    def __hash__(self):
        return hash((self.kernel, self.step))

    def __eq__(self, other):
        return isinstance(other, _LagCov) and (self.kernel, self.step) == (other.kernel, other.step)


def _next_pow2(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


@functools.lru_cache(maxsize=4)
def _circulant_sqrt_spectrum(cov: Callable, m: int, clip_tol: float = 1e-10) -> np.ndarray | None:
    k = np.arange(m // 2 + 1)
    c = np.asarray(cov(k), dtype=float)
    row = np.concatenate([c, c[-2:0:-1]])
    eig = sp_fft.rfft(row, workers=fft_workers()).real
    top = eig.max()
    if top <= 0:
        return np.zeros(m)
    if eig.min() < -clip_tol * top:
        return None
    eig = np.clip(eig, 0.0, None)
    full = np.concatenate([eig, eig[-2:0:-1]])
    return np.sqrt(full / m)


def _spectrum(cov, m):
    try:
        return _circulant_sqrt_spectrum(cov, m)
    except TypeError:  # unhashable evaluator
        return _circulant_sqrt_spectrum.__wrapped__(cov, m)


@functools.lru_cache(maxsize=4)
def _cholesky_factor(cov: Callable, n: int, jitter: float = 1e-12) -> np.ndarray:
    c = np.asarray(cov(np.arange(n)), dtype=float)
    mat = linalg.toeplitz(c)
    try:
        return linalg.cholesky(mat, lower=True)
    except linalg.LinAlgError:
        pass
    try:
        return linalg.cholesky(mat + jitter * np.trace(mat) * np.eye(n), lower=True)
    except linalg.LinAlgError as exc:
        raise linalg.LinAlgError("covariance matrix is not positive semi-definite within jitter") from exc


def sample_stationary_gaussian(cov: Callable, mean: float, n: int, rng: np.random.Generator,
                               sampler: Sampler = "circulant", support: int | None = None,
                               max_doublings: int = 3) -> np.ndarray:
    """One realization of a stationary Gaussian sequence.

    Parameters
    ----------
    cov : callable
        Autocovariance at integer lags (vectorized). Hashable evaluators get their
        spectrum cached across calls.
    mean : float
    n : int
    rng : numpy.random.Generator
    sampler : {"circulant", "cholesky"}
    support : int, optional
        Lag beyond which ``cov`` vanishes. The embedding length is the next power
        of two above ``2 * max(n, support)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if sampler == "cholesky":
        low = _cholesky_factor(cov, n) if _hashable(cov) else _cholesky_factor.__wrapped__(cov, n)
        return mean + low @ rng.standard_normal(n)
    if sampler != "circulant":
        raise ValueError(f"unknown sampler {sampler!r}")
    m = _next_pow2(2 * max(n, support or n))
    for _ in range(max_doublings + 1):
        root = _spectrum(cov, m)
        if root is not None:
            break
        m *= 2
    else:
        raise EmbeddingError(f"negative circulant spectrum persists at embedding length {m // 2}")
    z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    y = sp_fft.fft(root * z, workers=fft_workers())
    return mean + y.real[:n]


def _hashable(obj) -> bool:
    try:
        hash(obj)
    except TypeError:
        return False
    return True


def fine_omega(spec: SimulationSpec, path_index: int = 0) -> np.ndarray:
    """Magnitude on the fine grid, ``n_samples * l_ratio`` values."""
    p = spec.params
    n_fine = spec.n_samples * spec.ratio
    if p.lambda2 == 0:
        return np.zeros(n_fine)
    kernel = spec.kernel
    support = int(math.ceil(p.T / spec.cutoff))
    rng = rng_for(spec.seed, path_index, ROLE_OMEGA)
    return sample_stationary_gaussian(_LagCov(kernel, spec.cutoff), kernel.mean, n_fine, rng,
                                      sampler=spec.sampler, support=support)


def _coarse_sum(fine: np.ndarray, ratio: int) -> np.ndarray:
    return fine.reshape(-1, ratio).sum(axis=1)


def simulate_omega(spec: SimulationSpec, path_index: int = 0) -> SampledPath:
    """Magnitude at the ``tau``-spaced times."""
    omega = fine_omega(spec, path_index)[:: spec.ratio]
    return SampledPath(omega, "omega", spec, path_index)


def simulate_mrm(spec: SimulationSpec, path_index: int = 0) -> SampledPath:
    """Increments ``M[k tau, (k+1) tau]`` of the MRM."""
    omega = fine_omega(spec, path_index)
    inc = _coarse_sum(np.exp(2.0 * omega), spec.ratio) * spec.cutoff
    return SampledPath(inc, "mrm_increments", spec, path_index)


def simulate_mrw(spec: SimulationSpec, path_index: int = 0, levels: bool = False) -> SampledPath:
    """Increments (or levels starting at 0) of the MRW."""
    omega = fine_omega(spec, path_index)
    eps = rng_for(spec.seed, path_index, ROLE_NOISE).standard_normal(omega.size)
    eps *= spec.params.sigma * math.sqrt(spec.cutoff)
    inc = _coarse_sum(eps * np.exp(omega), spec.ratio)
    if levels:
        return SampledPath(np.concatenate([[0.0], np.cumsum(inc)]), "mrw_levels", spec, path_index)
    return SampledPath(inc, "mrw_increments", spec, path_index)


def simulate_ensemble(spec: SimulationSpec, n_paths: int, kind: PathKind = "mrw_increments",
                      first_path: int = 0) -> np.ndarray:
    """``(n_paths, n)`` array; row ``i`` is path ``first_path + i``."""
    makers = {
        "omega": simulate_omega,
        "mrm_increments": simulate_mrm,
        "mrw_increments": simulate_mrw,
        "mrw_levels": functools.partial(simulate_mrw, levels=True),
    }
    make = makers[kind]
    return np.stack([make(spec, first_path + i).values for i in range(n_paths)])


# -- export -------------------------------------------------------------------

def path_metadata(spec: SimulationSpec, kind: PathKind, extra: dict | None = None) -> dict:
    from . import __version__

    meta = {"kind": kind, "spec": spec.to_dict(), "version": __version__}
    meta.update(extra or {})
    return meta


def write_paths_csv(fh, columns: np.ndarray, meta: dict, names: list[str] | None = None) -> None:
    """One column per path; a ``#``-prefixed JSON metadata line, then a header row."""
    cols = np.atleast_2d(np.asarray(columns, dtype=float))
    names = names or [f"path_{i}" for i in range(cols.shape[0])]
    fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    fh.write(",".join(names) + "\n")
    for row in cols.T:
        fh.write(",".join("%.17g" % v for v in row) + "\n")


def read_paths_csv(fh) -> tuple[np.ndarray, dict, list[str]]:
    first = fh.readline()
    meta = json.loads(first[1:]) if first.startswith("#") else {}
    header = (fh.readline() if meta else first).strip().split(",")
    data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return data.T, meta, header


def write_binary(fh, path: SampledPath) -> None:
    """32-byte little-endian header (magic, version, kind, n, tau, seed) then float64 values."""
    values = np.ascontiguousarray(path.values, dtype="<f8")
    fh.write(_HEADER.pack(BINARY_MAGIC, BINARY_VERSION, _KIND_CODES[path.kind], values.size,
                          float(path.spec.params.tau), int(path.spec.seed)))
    fh.write(values.tobytes())


def read_binary(fh) -> tuple[np.ndarray, dict]:
    head = fh.read(_HEADER.size)
    magic, version, kind, n, tau, seed = _HEADER.unpack(head)
    if magic != BINARY_MAGIC:
        raise ValueError(f"not a path dump (magic {magic!r})")
    if version != BINARY_VERSION:
        raise ValueError(f"unsupported dump version {version}")
    values = np.frombuffer(fh.read(8 * n), dtype="<f8")
    if values.size != n:
        raise ValueError(f"truncated dump: expected {n} values, got {values.size}")
    kind_name = {v: k for k, v in _KIND_CODES.items()}[kind]
    return values.copy(), {"kind": kind_name, "n": n, "tau": tau, "seed": seed}
