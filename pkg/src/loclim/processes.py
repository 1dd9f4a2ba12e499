"""Self-similar Gaussian process models and exact path sampling.

Covers fractional Brownian motion (fBm), sub-fractional Brownian motion
(sfBm), bi-fractional Brownian motion (bi-fBm) and user-supplied covariances.
Components of a d-dimensional path are i.i.d. copies driven by independent
sub-streams of the path seed.

fBm paths use circulant embedding of the increment covariance (FFT, exact);
the other models factor the grid Gram matrix (Cholesky with a graded jitter
schedule).  Both routes produce the exact joint Gaussian law on the grid.
"""
from __future__ import annotations

import enum
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.fft

from .rng import generator

__all__ = [
    "Kind",
    "ProcessSpec",
    "CovarianceFn",
    "PathSample",
    "FactorizationError",
    "covariance",
    "sample_path",
    "fbm",
    "sub_fbm",
    "bi_fbm",
    "brownian",
]

#: jitter multipliers tried before giving up on a non-PSD Gram matrix
JITTER_SCHEDULE = (1e-14, 1e-12, 1e-10)

#: eigenvalues of the circulant embedding more negative than this (relative
#: to the largest one) trigger the Cholesky fallback
CIRCULANT_EIG_TOL = 1e-10


class Kind(enum.Enum):
    FBM = "fbm"
    SUB_FBM = "sub_fbm"
    BI_FBM = "bi_fbm"
    CUSTOM = "custom"


class FactorizationError(RuntimeError):
    """Gram matrix could not be factorized even with maximal jitter."""


@dataclass(frozen=True)
class ProcessSpec:
    """Which self-similar Gaussian model to simulate.

    Parameters
    ----------
    kind : Kind
        Model family.
    hurst : float
        Self-similarity index H in (0, 1).
    sigma : float
        Variance scale.  For fBm this multiplies the covariance, so
        Var(X_{t+h} - X_t) = sigma * h^{2H}.  For sfBm/bi-fBm the standard
        formulas fix the small-increment scale (see ``sigma_increment``)
        and this field is ignored.
    dim : int
        Number of i.i.d. components d >= 1.
    bifbm_h : float, optional
        H' parameter of bi-fBm; requires ``hurst = bifbm_h * bifbm_k``.
    bifbm_k : float, optional
        K parameter of bi-fBm, in (0, 1].
    custom_cov : callable, optional
        One-component covariance R(s, t) for ``Kind.CUSTOM``; must be
        self-similar of order 2H.
    """

    kind: Kind
    hurst: float
    sigma: float = 1.0
    dim: int = 1
    bifbm_h: Optional[float] = None
    bifbm_k: Optional[float] = None
    custom_cov: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = field(
        default=None, compare=False
    )

    def __post_init__(self):
        if not 0.0 < self.hurst < 1.0:
            raise ValueError(f"hurst must be in (0,1), got {self.hurst}")
        if self.sigma <= 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.kind is Kind.BI_FBM:
            if self.bifbm_h is None or self.bifbm_k is None:
                raise ValueError("bi-fBm requires bifbm_h and bifbm_k")
            if not 0.0 < self.bifbm_h < 1.0 or not 0.0 < self.bifbm_k <= 1.0:
                raise ValueError("bi-fBm needs 0 < H' < 1 and 0 < K <= 1")
            if abs(self.bifbm_h * self.bifbm_k - self.hurst) > 1e-12:
                raise ValueError("bi-fBm requires H = H' * K")
        if self.kind is Kind.CUSTOM and self.custom_cov is None:
            raise ValueError("custom kind requires custom_cov")

    def sigma_increment(self) -> float:
        """Small-increment variance scale: Var(X_{t+h}-X_t) ~ sigma * h^{2H}.

        Known in closed form for the built-in models; for custom covariances
        it is estimated from the small h/t limit of the increment-variance
        ratio.
        """
        if self.kind is Kind.FBM:
            return self.sigma
        if self.kind is Kind.SUB_FBM:
            return 1.0
        if self.kind is Kind.BI_FBM:
            return 2.0 ** (1.0 - self.bifbm_k)
        return estimate_sigma_increment(covariance(self), self.hurst)

    def marginal_variance(self, t):
        """Var(X^1_t) = R(t, t), vectorized in t."""
        t = np.asarray(t, dtype=float)
        two_h = 2.0 * self.hurst
        if self.kind is Kind.FBM:
            return self.sigma * t**two_h
        if self.kind is Kind.SUB_FBM:
            return (2.0 - 2.0 ** (two_h - 1.0)) * t**two_h
        if self.kind is Kind.BI_FBM:
            return t**two_h
        return covariance(self)(t, t)


def fbm(hurst: float, sigma: float = 1.0, dim: int = 1) -> ProcessSpec:
    return ProcessSpec(Kind.FBM, hurst, sigma=sigma, dim=dim)


def brownian(dim: int = 1) -> ProcessSpec:
    return ProcessSpec(Kind.FBM, 0.5, sigma=1.0, dim=dim)


def sub_fbm(hurst: float, dim: int = 1) -> ProcessSpec:
    return ProcessSpec(Kind.SUB_FBM, hurst, dim=dim)


def bi_fbm(bifbm_h: float, bifbm_k: float, dim: int = 1) -> ProcessSpec:
    return ProcessSpec(
        Kind.BI_FBM, bifbm_h * bifbm_k, dim=dim, bifbm_h=bifbm_h, bifbm_k=bifbm_k
    )


CovarianceFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def covariance(spec: ProcessSpec) -> CovarianceFn:
    """One-component covariance R(s, t) of the model, vectorized.

    fBm:    R(s,t) = (sigma/2) (s^{2H} + t^{2H} - |t-s|^{2H})
    sfBm:   R(s,t) = s^{2H} + t^{2H} - ((s+t)^{2H} + |t-s|^{2H}) / 2
    bi-fBm: R(s,t) = 2^{-K} ((s^{2H'} + t^{2H'})^K - |t-s|^{2H'K})
    """
    two_h = 2.0 * spec.hurst
    if spec.kind is Kind.FBM:
        sig = spec.sigma

        def r(s, t):
            s = np.asarray(s, dtype=float)
            t = np.asarray(t, dtype=float)
            return 0.5 * sig * (s**two_h + t**two_h - np.abs(t - s) ** two_h)

    elif spec.kind is Kind.SUB_FBM:

        def r(s, t):
            s = np.asarray(s, dtype=float)
            t = np.asarray(t, dtype=float)
            return (
                s**two_h
                + t**two_h
                - 0.5 * ((s + t) ** two_h + np.abs(t - s) ** two_h)
            )

    elif spec.kind is Kind.BI_FBM:
        hp, kk = spec.bifbm_h, spec.bifbm_k

        def r(s, t):
            s = np.asarray(s, dtype=float)
            t = np.asarray(t, dtype=float)
            return 2.0**-kk * (
                (s ** (2 * hp) + t ** (2 * hp)) ** kk
                - np.abs(t - s) ** (2 * hp * kk)
            )

    else:
        r = spec.custom_cov
    return r


def estimate_sigma_increment(
    cov: CovarianceFn, hurst: float, t: float = 1.0, h_over_t: float = 1e-5
) -> float:
    """Estimate the condition-(B) scale from Var(X_{t+h}-X_t) / h^{2H} at small h/t."""
    h = h_over_t * t
    var = cov(t + h, t + h) + cov(t, t) - 2.0 * cov(t + h, t)
    return float(var / h ** (2.0 * hurst))


@dataclass(frozen=True)
class PathSample:
    """One exact d-dimensional sample path on a uniform grid.

    ``values`` has shape (d, n_t + 1) with values[:, 0] = 0; ``grid`` holds
    t_i = i T / n_t.  ``method`` records which factorization produced the
    sample ("circulant" or "cholesky").
    """

    grid: np.ndarray
    values: np.ndarray
    seed: int
    spec: ProcessSpec
    method: str

    @property
    def T(self) -> float:
        return float(self.grid[-1])

    @property
    def n_t(self) -> int:
        return len(self.grid) - 1


# read-mostly caches shared across threads; keyed by immutable tuples
_circulant_cache: dict = {}
_cholesky_cache: dict = {}
_cache_lock = threading.Lock()


def clear_caches() -> None:
    with _cache_lock:
        _circulant_cache.clear()
        _cholesky_cache.clear()


def _fbm_circulant_sqrt_eigs(hurst: float, sigma: float, T: float, n: int):
    """sqrt eigenvalues (rfft layout, length n+1) of the embedded increment
    covariance, or None if the embedding is not PSD within tolerance."""
    key = (hurst, sigma, T, n)
    with _cache_lock:
        hit = _circulant_cache.get(key)
    if hit is not None:
        return hit
    dt = T / n
    two_h = 2.0 * hurst
    j = np.arange(n + 1, dtype=float)
    # autocovariance of unit-spaced fBm increments at lag j, scaled to dt
    gamma = (
        0.5
        * sigma
        * dt**two_h
        * (np.abs(j - 1) ** two_h - 2.0 * j**two_h + (j + 1) ** two_h)
    )
    row = np.concatenate([gamma, gamma[-2:0:-1]])  # length 2n, symmetric
    eigs = scipy.fft.rfft(row).real
    lam_max = eigs.max()
    if eigs.min() < -CIRCULANT_EIG_TOL * lam_max:
        result = None
    else:
        result = np.sqrt(np.maximum(eigs, 0.0))
    with _cache_lock:
        _circulant_cache[key] = result
    return result


def _gram_cholesky(spec: ProcessSpec, T: float, n: int) -> np.ndarray:
    """Cholesky factor of the Gram matrix on t_1..t_n with jitter escalation."""
    key = (spec.kind, spec.hurst, spec.sigma, spec.bifbm_h, spec.bifbm_k, T, n)
    use_cache = spec.kind is not Kind.CUSTOM
    if use_cache:
        with _cache_lock:
            hit = _cholesky_cache.get(key)
        if hit is not None:
            return hit
    times = np.linspace(0.0, T, n + 1)[1:]
    gram = covariance(spec)(times[:, None], times[None, :])
    gram = 0.5 * (gram + gram.T)
    scale = float(np.max(np.diag(gram)))
    last_err: Exception | None = None
    for delta in (0.0,) + JITTER_SCHEDULE:
        try:
            chol = np.linalg.cholesky(gram + delta * scale * np.eye(n))
            break
        except np.linalg.LinAlgError as err:
            last_err = err
    else:
        raise FactorizationError(
            f"Gram matrix not PSD after jitter up to {JITTER_SCHEDULE[-1]}"
        ) from last_err
    if use_cache:
        with _cache_lock:
            _cholesky_cache[key] = chol
    return chol


def _component_noise_circulant(rng: np.random.Generator, n: int) -> np.ndarray:
    """Hermitian-symmetric unit noise in rfft layout (length n+1)."""
    z = np.empty(n + 1, dtype=np.complex128)
    z[0] = rng.standard_normal()
    z[n] = rng.standard_normal()
    z[1:n] = (
        rng.standard_normal(n - 1) + 1j * rng.standard_normal(n - 1)
    ) / np.sqrt(2.0)
    return z


def sample_path(
    spec: ProcessSpec,
    T: float,
    n_t: int,
    seed: int,
    method: str = "auto",
) -> PathSample:
    """Sample one exact path of the model on the uniform grid of size n_t.

    Deterministic given (spec, T, n_t, seed): component ``ell`` draws from
    the generator on substream ``(seed, ell)``.  ``method`` may be "auto"
    (circulant for fBm, Cholesky otherwise), "circulant" or "cholesky".

    Raises
    ------
    FactorizationError
        If the Gram matrix cannot be factorized, or "circulant" was forced
        for a model where the embedding fails.
    """
    if T <= 0.0:
        raise ValueError(f"T must be positive, got {T}")
    if n_t < 2:
        raise ValueError(f"n_t must be >= 2, got {n_t}")
    grid = np.linspace(0.0, T, n_t + 1)
    values = np.zeros((spec.dim, n_t + 1))

    sqrt_eigs = None
    if spec.kind is Kind.FBM and method in ("auto", "circulant"):
        sqrt_eigs = _fbm_circulant_sqrt_eigs(spec.hurst, spec.sigma, T, n_t)
        if sqrt_eigs is None and method == "circulant":
            raise FactorizationError(
                "circulant embedding has negative eigenvalues beyond tolerance"
            )

    if sqrt_eigs is not None:
        m = 2 * n_t
        scale = np.sqrt(float(m)) * sqrt_eigs
        for ell in range(spec.dim):
            z = _component_noise_circulant(generator(seed, ell), n_t)
            z *= scale
            increments = scipy.fft.irfft(z, n=m)[:n_t]
            np.cumsum(increments, out=values[ell, 1:])
        used = "circulant"
    else:
        if method == "circulant":
            raise FactorizationError("circulant method is only defined for fBm")
        chol = _gram_cholesky(spec, T, n_t)
        for ell in range(spec.dim):
            z = generator(seed, ell).standard_normal(n_t)
            values[ell, 1:] = chol @ z
        used = "cholesky"

    return PathSample(grid=grid, values=values, seed=seed, spec=spec, method=used)
