"""Local-time derivative estimators along sampled paths.

The estimator at bandwidth eps integrates the k-th heat-kernel derivative
along the path:  value = int_0^T deriv_k(X_t + x; eps) dt, approximated on
the path grid by the configured rule (trapezoid by default).  Its exact
mean over path randomness is available in closed quadrature form because
X_t is centered Gaussian with known marginal variance v(t):

    E int_0^T deriv_k(X_t + x; eps) dt = int_0^T deriv_k(x; eps + v(t)) dt.

The true small-eps limit is not computable; experiments use the same-path
estimate at a much smaller reference bandwidth as a proxy.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import integrate

from .errors import AccuracyError
from .heatkernel import MultiIndex, deriv_evaluator, heat_kernel_deriv
from .processes import PathSample, ProcessSpec

__all__ = [
    "IntegrationRule",
    "EstimatorConfig",
    "EstimateValue",
    "existence_gate",
    "default_grid_size",
    "estimate",
    "estimate_many",
    "estimate_at_times",
    "expected_estimate",
    "reference_local_time",
]

#: default cap on the bandwidth-tied grid-size heuristic
GRID_CAP = 2**20


class IntegrationRule(enum.Enum):
    RIEMANN_LEFT = "riemann_left"
    TRAPEZOID = "trapezoid"


@dataclass(frozen=True)
class EstimatorConfig:
    """Where and how to evaluate the estimator.

    ``x`` is the level point in R^d, ``k`` the derivative multi-index.
    ``n_t`` is advisory here (paths carry their own grid); it is used by the
    harness when it builds paths for this config.
    """

    epsilon: float
    x: tuple
    k: MultiIndex
    T: float = 1.0
    n_t: Optional[int] = None
    rule: IntegrationRule = IntegrationRule.TRAPEZOID

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.T <= 0.0:
            raise ValueError(f"T must be positive, got {self.T}")
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "k", MultiIndex.of(self.k, dim=len(self.x)))
        if self.k.dim != len(self.x):
            raise ValueError("k and x must have the same dimension")

    @property
    def dim(self) -> int:
        return len(self.x)


@dataclass(frozen=True)
class EstimateValue:
    value: float
    config: EstimatorConfig
    seed: int
    n_t: int
    gate_ok: bool


def existence_gate(hurst: float, k: MultiIndex, dim: int) -> bool:
    """H (2|k| + d) < 1: the estimator has an L^p limit iff this holds."""
    return hurst * (2.0 * k.order + dim) < 1.0


def default_grid_size(hurst: float, epsilon: float, T: float = 1.0, cap: int = GRID_CAP) -> int:
    """Bandwidth-tied grid size: the integrand decorrelates on the time
    scale eps^{1/(2H)}, so resolve it with ~32 points, capped at ``cap``.

    At small H the uncapped value is astronomically large and the cap
    binds; experiments that need lower discretization noise must set n_t
    explicitly (noise scales like n_t^{-1/2}).
    """
    want = 32.0 * T * epsilon ** (-1.0 / (2.0 * hurst))
    return int(min(float(cap), max(64.0, want)))


def _grid_quadrature(values: np.ndarray, dt: float, rule: IntegrationRule) -> float:
    if rule is IntegrationRule.TRAPEZOID:
        return float(dt * (values.sum() - 0.5 * (values[0] + values[-1])))
    return float(dt * values[:-1].sum())


def estimate(path: PathSample, cfg: EstimatorConfig) -> EstimateValue:
    """Evaluate the estimator for one config along one path."""
    return estimate_many(path, [cfg])[0]


def estimate_many(path: PathSample, cfgs) -> list:
    """Evaluate several configs (sharing T and x-dimension) on one path.

    Shares the shifted-path array across bandwidths, which is the hot loop
    of every experiment.  All configs must satisfy cfg.T <= path.T; the
    integral runs over [0, cfg.T] on the path's own grid.
    """
    cfgs = list(cfgs)
    if not cfgs:
        return []
    d = path.values.shape[0]
    for cfg in cfgs:
        if cfg.dim != d:
            raise ValueError(f"config dim {cfg.dim} != path dim {d}")
        if cfg.T > path.T + 1e-12:
            raise ValueError(f"config horizon {cfg.T} exceeds path horizon {path.T}")
    n = path.n_t
    dt = path.T / n
    out = []
    shifted_cache: dict = {}
    for cfg in cfgs:
        key = cfg.x
        if key not in shifted_cache:
            shifted_cache[key] = path.values + np.asarray(cfg.x, dtype=float)[:, None]
        shifted = shifted_cache[key]
        m = int(round(cfg.T / dt))
        evaluate = deriv_evaluator(cfg.k, cfg.epsilon)
        vals = evaluate(shifted[:, : m + 1])
        gate = existence_gate(path.spec.hurst, cfg.k, d)
        out.append(
            EstimateValue(
                value=_grid_quadrature(vals, dt, cfg.rule),
                config=cfg,
                seed=path.seed,
                n_t=m,
                gate_ok=gate,
            )
        )
    return out


def estimate_at_times(path: PathSample, cfg: EstimatorConfig, times) -> np.ndarray:
    """Partial integrals int_0^{t} deriv_k(X_s + x; eps) ds at several horizons.

    ``times`` are snapped to the path grid; the cumulative trapezoid is
    computed once, so this is the cheap way to get F(T) at many T.
    """
    d = path.values.shape[0]
    if cfg.dim != d:
        raise ValueError(f"config dim {cfg.dim} != path dim {d}")
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0.0) or np.any(times > path.T + 1e-12):
        raise ValueError("times must lie in [0, path.T]")
    n = path.n_t
    dt = path.T / n
    shifted = path.values + np.asarray(cfg.x, dtype=float)[:, None]
    vals = deriv_evaluator(cfg.k, cfg.epsilon)(shifted)
    if cfg.rule is IntegrationRule.TRAPEZOID:
        steps = 0.5 * (vals[1:] + vals[:-1]) * dt
    else:
        steps = vals[:-1] * dt
    cum = np.concatenate([[0.0], np.cumsum(steps)])
    idx = np.rint(times / dt).astype(int)
    return cum[idx]


def expected_estimate(spec: ProcessSpec, cfg: EstimatorConfig, tol: float = 1e-10) -> float:
    """Exact mean of the estimator over path randomness (up to quadrature).

    Integrates t -> deriv_k(x; eps + v(t)) with v(t) the marginal variance
    of one component; adaptive quadrature with a point at t = 0 where the
    integrand is steepest.
    """
    x = np.asarray(cfg.x, dtype=float)

    def integrand(t):
        return heat_kernel_deriv(x, cfg.epsilon + float(spec.marginal_variance(t)), cfg.k)

    val, err = integrate.quad(integrand, 0.0, cfg.T, limit=400, epsabs=0.0, epsrel=tol * 10)
    scale = max(1.0, abs(val))
    if err > max(tol * scale, 1e-9 * scale):
        raise AccuracyError("expected_estimate quadrature did not converge", err)
    return float(val)


def reference_local_time(
    path: PathSample, cfg: EstimatorConfig, eps_ref: Optional[float] = None
) -> EstimateValue:
    """Small-bandwidth proxy for the true limit on the same path.

    Defaults to eps_ref = cfg.epsilon / 64.  The proxy's own bias is an
    order below the fluctuation being measured in the rate experiments;
    its discretization noise is controlled by the path's grid size.
    """
    if eps_ref is None:
        eps_ref = cfg.epsilon / 64.0
    if eps_ref >= cfg.epsilon:
        raise ValueError("eps_ref must be below the experiment bandwidth")
    return estimate(path, replace(cfg, epsilon=eps_ref))
