"""Regime classification, scaling factors and limiting constants.

The parameter space (H, |k|, d, N) splits into four regimes by comparing
r = H (2|k| + d) against 1 - 2NH and 1:

* LP_LIMIT      r < 1 - 2NH      deterministic L^p limit, scaling eps^{-N/2}
* BOUNDARY_LOG  r = 1 - 2NH      mixed normal with a sqrt-log correction
* CLT           1 - 2NH < r < 1  mixed normal, scaling eps^{(2|k|+d-1/H)/4}
* NONEXISTENT   r >= 1           the estimator diverges

Boundary membership is decided in exact rational arithmetic when H is
given as a Fraction (or "1/5"-style string) and k is integer; float inputs
use a 1e-12 relative tolerance and never claim exactness.

The asymptotic variance constants are Gaussian-weighted integrals; the
time variable of the double-integral forms is integrated analytically
(Gamma weights), leaving radial 1-D quadratures.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations_with_replacement
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.special import gamma as _gamma, gammaln

from .errors import AccuracyError, DomainError
from .heatkernel import MultiIndex, TestFunction, _gauss_legendre

__all__ = [
    "Regime",
    "ScalingFactor",
    "RegimeReport",
    "ConstantName",
    "LimitConstant",
    "classify",
    "scaling",
    "constant",
]


class Regime(enum.Enum):
    LP_LIMIT = "lp_limit"
    BOUNDARY_LOG = "boundary_log"
    CLT = "clt"
    NONEXISTENT = "nonexistent"


@dataclass(frozen=True)
class ScalingFactor:
    """The normalization ell(eps) in front of the centered estimator."""

    regime: Regime
    exponent: float
    has_log: bool

    def __call__(self, eps: float) -> float:
        if self.regime is Regime.NONEXISTENT:
            raise DomainError("no scaling factor in the nonexistent regime")
        if eps <= 0.0:
            raise ValueError(f"eps must be positive, got {eps}")
        value = eps**self.exponent
        if self.has_log:
            value /= np.sqrt(np.log1p(eps**-0.5))
        return float(value)

    def describe(self) -> str:
        core = f"eps^{self.exponent:g}"
        return core + " * ln^-1/2(1+eps^-1/2)" if self.has_log else core


@dataclass(frozen=True)
class RegimeReport:
    regime: Regime
    hurst: float
    k: MultiIndex
    dim: int
    order_n: int
    product: float  # H (2|k| + d)
    scaling_factor: Optional[ScalingFactor]
    boundary_exact: bool

    def __str__(self):
        name = {
            Regime.LP_LIMIT: "LP",
            Regime.BOUNDARY_LOG: "BOUNDARY_LOG",
            Regime.CLT: "CLT",
            Regime.NONEXISTENT: "NONEXISTENT",
        }[self.regime]
        if self.scaling_factor is None:
            return f"{name} (H(2|k|+d) = {self.product:g} >= 1)"
        return f"{name}, ell(eps) = {self.scaling_factor.describe()}"


def _scaling_for(regime: Regime, hurst: float, k: MultiIndex, dim: int, n: int):
    if regime is Regime.NONEXISTENT:
        return None
    if regime is Regime.LP_LIMIT:
        return ScalingFactor(regime, -n / 2.0, has_log=False)
    if regime is Regime.BOUNDARY_LOG:
        return ScalingFactor(regime, -n / 2.0, has_log=True)
    exponent = (2.0 * k.order + dim - 1.0 / hurst) / 4.0
    return ScalingFactor(regime, exponent, has_log=False)


def classify(hurst, k, dim: int, order_n: int) -> RegimeReport:
    """Assign (H, k, d, N) to its regime.

    ``hurst`` may be a float, an int, a Fraction, or a string like "1/3";
    non-float forms enable the exact boundary test (for integer k).
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if order_n < 1:
        raise ValueError(f"order N must be >= 1, got {order_n}")
    k = MultiIndex.of(k, dim=dim)
    exact_h: Optional[Fraction] = None
    if isinstance(hurst, (Fraction, int, str)):
        exact_h = Fraction(hurst)
    h_float = float(hurst if exact_h is None else exact_h)
    if not 0.0 < h_float < 1.0:
        raise ValueError(f"hurst must be in (0,1), got {h_float}")

    boundary_exact = False
    if exact_h is not None and k.all_integer:
        r = exact_h * (2 * int(round(k.order)) + dim)
        b = 1 - 2 * order_n * exact_h
        if r >= 1:
            regime = Regime.NONEXISTENT
        elif r < b:
            regime = Regime.LP_LIMIT
        elif r == b:
            regime = Regime.BOUNDARY_LOG
            boundary_exact = True
        else:
            regime = Regime.CLT
        r_float = float(r)
    else:
        r_float = h_float * (2.0 * k.order + dim)
        b = 1.0 - 2.0 * order_n * h_float
        if r_float >= 1.0:
            regime = Regime.NONEXISTENT
        elif abs(r_float - b) <= 1e-12 * max(1.0, abs(b)):
            regime = Regime.BOUNDARY_LOG
        elif r_float < b:
            regime = Regime.LP_LIMIT
        else:
            regime = Regime.CLT

    return RegimeReport(
        regime=regime,
        hurst=h_float,
        k=k,
        dim=dim,
        order_n=order_n,
        product=r_float,
        scaling_factor=_scaling_for(regime, h_float, k, dim, order_n),
        boundary_exact=boundary_exact,
    )


def scaling(report: RegimeReport, eps: float) -> float:
    """Evaluate ell(eps) for the report's regime."""
    if report.scaling_factor is None:
        raise DomainError("no scaling factor in the nonexistent regime")
    return report.scaling_factor(eps)


# ---------------------------------------------------------------------------
# Limiting constants
# ---------------------------------------------------------------------------

class ConstantName(enum.Enum):
    D_HD_BOUNDARY = "D_hd_boundary"
    D_HD_CLT = "D_hd_clt"
    DTILDE1 = "Dtilde1"
    DTILDE2 = "Dtilde2"
    D_HDF = "D_hdf"
    C_HDF = "C_hdf"
    D_HD_P1 = "D_hd_p1"
    C_HD_P1 = "C_hd_p1"
    LP_COEFFICIENT = "lp_coefficient"


@dataclass(frozen=True)
class LimitConstant:
    name: ConstantName
    value: float
    error: float
    params: dict
    tensor: Optional[dict] = None
    prefactor: Optional[complex] = None

    def __str__(self):
        return f"{self.name.value} = {self.value!r} (quadrature residual {self.error:.2e})"


def _angular_moment(k: MultiIndex, dim: int) -> float:
    """int_{S^{d-1}} prod |w_l|^{2 k_l} dw = 2 prod Gamma(k_l + 1/2) / Gamma(|k| + d/2)."""
    log = np.log(2.0) + sum(gammaln(kl + 0.5) for kl in k) - gammaln(k.order + dim / 2.0)
    return float(np.exp(log))


def _abs_moment(c: float) -> float:
    """int_R |x|^c e^{-x^2/2} dx = 2^{(c+1)/2} Gamma((c+1)/2)."""
    return float(2.0 ** ((c + 1.0) / 2.0) * _gamma((c + 1.0) / 2.0))


def _radial_gaussian_weighted(g, power: float, split: float = 1.0):
    """int_0^inf g(r) r^power dr by adaptive quadrature, split at ``split``."""
    v1, e1 = integrate.quad(
        lambda r: g(r) * r**power, 0.0, split, limit=400, epsabs=1e-13, epsrel=1e-11
    )
    v2, e2 = integrate.quad(
        lambda r: g(r) * r**power, split, np.inf, limit=400, epsabs=1e-13, epsrel=1e-11
    )
    return v1 + v2, e1 + e2


def _moment_tensor(f: TestFunction, order: int, radius: float = 12.0, n_nodes: int = 96):
    """All moments int z^alpha f(z) dz for |alpha| = order, keyed by sorted index tuple."""
    d = f.dim
    nodes, weights = _gauss_legendre(n_nodes, radius)
    grids = np.meshgrid(*([nodes] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    w = np.ones(pts.shape[0])
    for g in np.meshgrid(*([weights] * d), indexing="ij"):
        w = w * g.ravel()
    fvals = np.asarray(f.f(pts), dtype=float) * w
    out = {}
    for idx in combinations_with_replacement(range(d), order):
        mono = np.ones(pts.shape[0])
        for ell in idx:
            mono = mono * pts[:, ell]
        out[idx] = float(np.sum(mono * fvals))
    return out


def _alpha_from_indices(idx, dim):
    alpha = [0] * dim
    for ell in idx:
        alpha[ell] += 1
    return tuple(alpha)


def _factorial(n: int) -> float:
    return float(_gamma(n + 1.0))


def _boundary_constant(f: TestFunction, hurst, sigma, k: MultiIndex, order_n: int, lead: float):
    """lead / ((2 pi)^d sigma^{1/(2H)}) * int |M_N(x)|^2 prod |x_l|^{2k_l} e^{-|x|^2/2} dx
    with M_N(x) = int f(z) (z.x)^N dz / N!, expanded into Gaussian moments."""
    d = f.dim
    moments = _moment_tensor(f, order_n)
    # M_N(x) = sum_alpha m_alpha x^alpha / alpha!  over |alpha| = N
    coeffs = {}
    for idx, m in moments.items():
        alpha = _alpha_from_indices(idx, d)
        mult = _factorial(order_n)
        for a in alpha:
            mult /= _factorial(a)
        coeffs[alpha] = m * mult / _factorial(order_n)
    total = 0.0
    for alpha, ca in coeffs.items():
        for beta, cb in coeffs.items():
            if any((a + b) % 2 for a, b in zip(alpha, beta)):
                continue
            term = ca * cb
            for ell in range(d):
                term *= _abs_moment(2.0 * k.k[ell] + alpha[ell] + beta[ell])
            total += term
    pref = lead / ((2.0 * np.pi) ** d * float(sigma) ** (1.0 / (2.0 * float(hurst))))
    # moment-tensor quadrature is the only inexact piece; GL-96 on a Gaussian
    # integrand is accurate to ~1e-14 relative
    return pref * total, 1e-13 * abs(pref * total)


def _clt_constant(f: TestFunction, hurst, sigma, k: MultiIndex, order_n: int):
    """2 / ((2 pi)^d sigma^{1/(2H)}) * int_0^inf int |fhat(x)-fhat(0)|^2
    prod |x_l|^{2k_l} e^{-|x|^2 s^{2H}/2} dx ds, with the s-integral done
    analytically: Gamma(1 + 1/(2H)) (|x|^2/2)^{-1/(2H)}."""
    h = float(hurst)
    d = f.dim
    r = h * (2.0 * k.order + d)
    if not (1.0 - 2.0 * order_n * h) < r + 1e-15 or not r < 1.0:
        # the defining integral converges exactly on the open CLT region
        if r >= 1.0 or r <= 1.0 - 2.0 * order_n * h - 1e-15:
            raise DomainError(
                f"CLT constant needs 1 - 2NH < H(2|k|+d) < 1; got H(2|k|+d) = {r:g}"
            )
    gamma_weight = _gamma(1.0 + 1.0 / (2.0 * h)) * 2.0 ** (1.0 / (2.0 * h))
    power = 2.0 * k.order + d - 1.0 - 1.0 / h
    f0 = f.fhat_at(np.zeros(d))

    if d == 1:
        def g(r_):
            val = f.fhat_at(np.array([r_])) - f0
            vneg = f.fhat_at(np.array([-r_])) - f0
            return abs(val) ** 2 + abs(vneg) ** 2  # both half-lines

        integral, err = _radial_gaussian_weighted(g, power)
        angular = 1.0
    else:
        radial = getattr(f, "fhat_radial", None)
        if radial is None:
            raise DomainError(
                "CLT constant in d >= 2 needs a radially symmetric Fourier transform"
            )

        def g(r_):
            return abs(radial(r_) - f0) ** 2

        integral, err = _radial_gaussian_weighted(g, power)
        angular = _angular_moment(k, d)

    pref = 2.0 / ((2.0 * np.pi) ** d * float(sigma) ** (1.0 / (2.0 * h))) * gamma_weight
    return pref * angular * integral, pref * angular * err


def _moment4_constant(hurst, sigma, k: MultiIndex, dim: int, lead: float):
    """lead / ((2 pi)^d sigma^{1/(2H)}) * int |x|^4 prod |x_l|^{2k_l} e^{-|x|^2/2} dx
    by radial quadrature (angular part in closed form)."""
    power = 4.0 + 2.0 * k.order + dim - 1.0
    integral, err = _radial_gaussian_weighted(lambda r: np.exp(-r * r / 2.0), power)
    angular = _angular_moment(k, dim)
    pref = lead / ((2.0 * np.pi) ** dim * float(sigma) ** (1.0 / (2.0 * float(hurst))))
    return pref * angular * integral, pref * angular * err


def _gaussian_fhat(dim):
    def radial(r_):
        return np.exp(-r_ * r_ / 2.0)

    return radial


def constant(name: ConstantName, **params) -> LimitConstant:
    """Evaluate a limiting constant.

    Accepted params: ``hurst`` (float/Fraction/str), ``sigma``, ``dim``,
    ``k`` (multi-index), ``order_n`` (N), ``f`` (TestFunction).  The
    ``*_p1`` and ``Dtilde*`` constants hard-wire f = heat kernel.
    """
    from .heatkernel import gaussian_kernel_function  # local: avoid cycle at import

    hurst = params.get("hurst")
    if isinstance(hurst, str):
        hurst = Fraction(hurst)
    h = float(hurst) if hurst is not None else None
    if h is not None and not 0.0 < h < 1.0:
        raise DomainError(f"hurst must be in (0,1), got {h}")
    sigma = float(params.get("sigma", 1.0))
    if sigma <= 0.0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    dim = int(params.get("dim", 1))
    k = MultiIndex.of(params.get("k", 0.0), dim=dim)
    order_n = int(params.get("order_n", 2))
    f: Optional[TestFunction] = params.get("f")
    recorded = {
        "hurst": h,
        "sigma": sigma,
        "dim": dim,
        "k": tuple(k),
        "order_n": order_n,
        "f": f.name if f is not None else None,
    }

    if name is ConstantName.LP_COEFFICIENT:
        if f is None:
            raise DomainError("LP coefficient needs a test function f")
        moments = _moment_tensor(f, order_n)
        pref = 1j**order_n / _factorial(order_n)
        lead_idx = (0,) * order_n
        value = pref * moments.get(lead_idx, 0.0)
        return LimitConstant(
            name=name,
            value=float(value.real),
            error=1e-13,
            params=recorded,
            tensor={idx: m for idx, m in moments.items()},
            prefactor=complex(pref),
        )

    if h is None:
        raise DomainError(f"{name.value} needs a hurst parameter")

    if name is ConstantName.DTILDE1:
        value, err = _moment4_constant(h, sigma, k, dim, lead=1.0 / (2.0 * h))
    elif name is ConstantName.D_HD_P1:
        value, err = _moment4_constant(h, sigma, MultiIndex.zero(dim), dim, lead=1.0 / (2.0 * h))
    elif name is ConstantName.DTILDE2:
        p1 = gaussian_kernel_function(dim)
        value, err = _clt_constant(p1, h, sigma, k, order_n=2)
    elif name is ConstantName.C_HD_P1:
        p1 = gaussian_kernel_function(dim)
        value, err = _clt_constant(p1, h, sigma, MultiIndex.zero(dim), order_n=2)
    elif name is ConstantName.D_HD_BOUNDARY:
        if f is None:
            raise DomainError("boundary constant needs a test function f")
        value, err = _boundary_constant(f, h, sigma, k, order_n, lead=2.0 / h)
    elif name is ConstantName.D_HDF:
        if f is None:
            raise DomainError("D_hdf needs a test function f")
        value, err = _boundary_constant(f, h, sigma, MultiIndex.zero(dim), 2, lead=2.0)
    elif name is ConstantName.D_HD_CLT:
        if f is None:
            raise DomainError("CLT constant needs a test function f")
        value, err = _clt_constant(f, h, sigma, k, order_n)
    elif name is ConstantName.C_HDF:
        if f is None:
            raise DomainError("C_hdf needs a test function f")
        value, err = _clt_constant(f, h, sigma, MultiIndex.zero(dim), 2)
    else:
        raise DomainError(f"unknown constant {name}")

    if value < 0.0:
        raise AccuracyError(f"variance constant {name.value} came out negative", abs(value))
    return LimitConstant(name=name, value=float(value), error=float(err), params=recorded)
