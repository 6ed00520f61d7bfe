"""Gaussian long-memory noise: ARFIMA(0, d, 0) with ``2d = 1 - alpha``.

Partial sums of such a sequence satisfy ``Var(sum_{i<=N} eps_i) ~ pi_alpha
N**(2 - alpha)``.  Two generators are provided:

* ``circulant_embedding`` (default) -- Davies-Harte: the exact Toeplitz
  covariance is embedded in a circulant of size ``2n`` whose eigenvalues come
  from one real FFT.
* ``ma_truncation`` -- the causal moving average ``eps_i = sum_m a_m
  eta_{i-m}``, ``a_0 = 1``, truncated after ``ma_length`` terms.  It is
  approximate and kept as an independent cross-check.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import gammaln

from .errors import ConfigError

__all__ = [
    "LongMemorySpec",
    "arfima_autocovariance",
    "autocovariances",
    "ma_coefficients",
    "circulant_eigenvalues",
    "generate_noise",
    "generate_noise_batch",
    "exact_partial_sum_variance",
    "partial_sum_variances",
    "partial_sum_variance_slope",
]

METHODS = ("circulant_embedding", "ma_truncation")


@dataclass(frozen=True)
class LongMemorySpec:
    """Law of the long-memory errors.

    ``alpha = 1`` is the i.i.d. boundary case.  ``d`` is derived from
    ``alpha`` and never stored on its own.
    """

    alpha: float
    innovation_sd: float = 1.0
    method: str = "circulant_embedding"
    ma_length: int = 2**16

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.innovation_sd > 0:
            raise ConfigError("innovation_sd must be positive")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.ma_length < 1:
            raise ConfigError("ma_length must be positive")

    @property
    def d(self) -> float:
        return (1.0 - self.alpha) / 2.0

    @classmethod
    def from_d(cls, d: float, **kwargs) -> "LongMemorySpec":
        return cls(alpha=1.0 - 2.0 * d, **kwargs)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "d": self.d,
            "innovation_sd": self.innovation_sd,
            "method": self.method,
            "ma_length": self.ma_length,
        }


def arfima_autocovariance(spec: LongMemorySpec, lag: int) -> float:
    """Autocovariance of ARFIMA(0, d, 0) at ``lag``.

    ``gamma(h) = s^2 G(1-2d) G(h+d) / (G(d) G(1-d) G(h+1-d))`` with ``G`` the
    Gamma function, evaluated on the log scale.
    """
    lag = abs(int(lag))
    var = spec.innovation_sd**2
    d = spec.d
    if d == 0.0:
        return var if lag == 0 else 0.0
    log_g = (
        gammaln(1.0 - 2.0 * d)
        + gammaln(lag + d)
        - gammaln(d)
        - gammaln(1.0 - d)
        - gammaln(lag + 1.0 - d)
    )
    return float(var * np.exp(log_g))


def autocovariances(spec: LongMemorySpec, n: int) -> np.ndarray:
    """``gamma(0..n-1)`` via the ratio ``gamma(h)/gamma(h-1) = (h-1+d)/(h-d)``."""
    d = spec.d
    out = np.zeros(n)
    if n == 0:
        return out
    if d == 0.0:
        out[0] = spec.innovation_sd**2
        return out
    h = np.arange(1, n, dtype=float)
    ratios = (h - 1.0 + d) / (h - d)
    gamma0 = spec.innovation_sd**2 * np.exp(gammaln(1.0 - 2.0 * d) - 2.0 * gammaln(1.0 - d))
    out[0] = gamma0
    out[1:] = gamma0 * np.cumprod(ratios)
    return out


def ma_coefficients(spec: LongMemorySpec, length: int | None = None) -> np.ndarray:
    """MA(infinity) weights ``a_m = G(m+d) / (G(d) G(m+1))``, ``a_0 = 1``."""
    length = spec.ma_length if length is None else int(length)
    d = spec.d
    a = np.zeros(length)
    a[0] = 1.0
    if length > 1 and d != 0.0:
        m = np.arange(1, length, dtype=float)
        a[1:] = np.cumprod((m - 1.0 + d) / m)
    return a


def circulant_eigenvalues(spec: LongMemorySpec, n: int) -> np.ndarray:
    """Eigenvalues of the size-``2n`` circulant embedding of the covariance."""
    gam = autocovariances(spec, n + 1)
    row = np.concatenate([gam, gam[-2:0:-1]])
    return np.fft.fft(row).real


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _circulant_draws(spec: LongMemorySpec, n: int, reps: int, rng: np.random.Generator):
    lam = circulant_eigenvalues(spec, n)
    tol = 1e-10 * max(lam.max(), 1.0)
    if lam.min() < -tol:
        return None
    lam = np.clip(lam, 0.0, None)
    M = lam.size
    W = rng.standard_normal((reps, M)) + 1j * rng.standard_normal((reps, M))
    Y = np.fft.fft(np.sqrt(lam / M) * W, axis=-1)
    return Y.real[:, :n]


def _ma_draws(spec: LongMemorySpec, n: int, reps: int, rng: np.random.Generator):
    a = ma_coefficients(spec)
    L = a.size
    eta = spec.innovation_sd * rng.standard_normal((reps, n + L - 1))
    return fftconvolve(eta, a[None, :], mode="valid", axes=-1)


def generate_noise_batch(spec: LongMemorySpec, n: int, reps: int, seed=None, return_info=False):
    """``reps`` independent draws of length ``n`` as a ``(reps, n)`` array.

    With ``alpha = 1`` the draws are plain i.i.d. normals.  If the circulant
    embedding has a negative eigenvalue beyond rounding, the MA truncation
    is used instead, a ``RuntimeWarning`` is issued and ``info["fallback"]``
    is set.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _rng(seed)
    info = {"method": spec.method, "fallback": False}
    if spec.d == 0.0:
        x = spec.innovation_sd * rng.standard_normal((reps, n))
    elif spec.method == "circulant_embedding":
        x = _circulant_draws(spec, n, reps, rng)
        if x is None:
            warnings.warn(
                "circulant embedding not nonnegative definite; falling back to MA truncation",
                RuntimeWarning,
                stacklevel=2,
            )
            info = {"method": "ma_truncation", "fallback": True}
            x = _ma_draws(spec, n, reps, rng)
    else:
        x = _ma_draws(spec, n, reps, rng)
    return (x, info) if return_info else x


def generate_noise(spec: LongMemorySpec, n: int, seed=None, return_info=False):
    """One draw of length ``n``; the same seed gives bit-identical output.

    ``seed`` may be an integer, a ``numpy.random.SeedSequence`` or a
    ``Generator``.
    """
    x, info = generate_noise_batch(spec, n, 1, seed, return_info=True)
    return (x[0], info) if return_info else x[0]


def exact_partial_sum_variance(spec: LongMemorySpec, n: int) -> float:
    """``Var(sum_{i<=n} eps_i) = sum_{|h|<n} (n - |h|) gamma(h)``."""
    gam = autocovariances(spec, n)
    weights = n - np.arange(n, dtype=float)
    return float(n * gam[0] + 2.0 * np.dot(weights[1:], gam[1:]))


def partial_sum_variances(spec: LongMemorySpec, sizes, reps: int, seed=None):
    """Monte Carlo ``Var(sum eps)`` and its standard error for each size.

    Each size uses its own ``reps`` independent draws.  Returns
    ``(variances, standard_errors)``.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    # explicit spawn keys keep this pure when a SeedSequence is reused
    children = [
        np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + (i,)) for i in range(len(sizes))
    ]
    var = np.empty(len(sizes))
    se = np.empty(len(sizes))
    for i, (n, child) in enumerate(zip(sizes, children)):
        sums = generate_noise_batch(spec, int(n), reps, np.random.default_rng(child)).sum(axis=1)
        var[i] = np.var(sums, ddof=1)
        # Gaussian sums: Var(s^2) = 2 sigma^4 / (reps - 1)
        se[i] = var[i] * np.sqrt(2.0 / (reps - 1))
    return var, se


def partial_sum_variance_slope(spec: LongMemorySpec, sizes, reps: int = 500, seed=None) -> float:
    """Least-squares slope of ``log Var(sum eps)`` against ``log N``.

    The long-memory law predicts ``2 - alpha``.
    """
    sizes = np.asarray(sizes, dtype=int)
    if sizes.size < 2 or np.any(np.diff(sizes) <= 0):
        raise ValueError("sizes must be increasing with at least two entries")
    if np.any(sizes & (sizes - 1)):
        raise ValueError("sizes must be powers of two")
    if reps < 100:
        raise ValueError("reps must be >= 100")
    var, _ = partial_sum_variances(spec, sizes, reps, seed)
    slope, _ = np.polyfit(np.log(sizes), np.log(var), 1)
    return float(slope)
