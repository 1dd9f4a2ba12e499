"""Independent verification oracles.

Two routes to the mixed moments of the limiting process increments
W(L(b_i, x)) - W(L(a_i, x)) over disjoint ordered intervals:

* :func:`moment_formula` evaluates the closed combinatorial-integral form:
  a factorial prefactor times an integral over interval-constrained times
  and R^{|m|d/2} Fourier variables of a Gaussian in those variables.  The
  Fourier variables are importance-sampled from the near-optimal centered
  Gaussian whose covariance is the inverse of the Gram quadratic form (plus
  a tiny ridge), which leaves only the time box to Monte Carlo.
  Any odd m_i makes the moment exactly zero.

* :func:`moment_simulated` simulates paths, computes local-time increments
  with the heat-kernel proxy, draws the independent Brownian evaluations,
  and averages the product directly.

The module also hosts the property-test drivers for the two Fourier
difference inequalities (single-difference and product-difference).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import math

import numpy as np

from .errors import CapacityError
from .heatkernel import MultiIndex, TestFunction, frac_power
from .loctime import EstimatorConfig, IntegrationRule, estimate_at_times
from .processes import ProcessSpec, covariance, sample_path
from .rng import generator, kahan_sum, substream

__all__ = [
    "MomentQuery",
    "MomentResult",
    "moment_formula",
    "moment_simulated",
    "LemmaSuiteReport",
    "difference_inequality_suite",
    "product_inequality_suite",
]

#: default cap on the Fourier-variable dimension |m| d / 2
MOMENT_DIM_CAP = 6

_RIDGE = 1e-10


@dataclass(frozen=True)
class MomentQuery:
    """E prod_i [W(L(b_i, x)) - W(L(a_i, x))]^{m_i} over disjoint intervals."""

    intervals: tuple  # ((a_1, b_1), ..., (a_n, b_n)), ordered, b_i <= a_{i+1}
    powers: tuple  # (m_1, ..., m_n), each >= 1
    x: tuple
    spec: ProcessSpec

    def __post_init__(self):
        ivs = tuple((float(a), float(b)) for a, b in self.intervals)
        object.__setattr__(self, "intervals", ivs)
        object.__setattr__(self, "powers", tuple(int(m) for m in self.powers))
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        if len(ivs) != len(self.powers):
            raise ValueError("need one power per interval")
        if any(m < 1 for m in self.powers):
            raise ValueError("powers must be >= 1")
        prev_end = 0.0
        for a, b in ivs:
            if a < 0.0 or b <= a:
                raise ValueError(f"bad interval ({a}, {b}]")
            if a < prev_end - 1e-12:
                raise ValueError("intervals must be disjoint and ordered")
            prev_end = b
        if len(self.x) != self.spec.dim:
            raise ValueError("level point dimension != spec dimension")

    @property
    def total_power(self) -> int:
        return sum(self.powers)


@dataclass(frozen=True)
class MomentResult:
    value: float
    se: float
    method: str
    draws: int

    def agrees_with(self, other: "MomentResult", n_se: float = 3.0) -> bool:
        combined = np.hypot(self.se, other.se)
        return abs(self.value - other.value) <= n_se * max(combined, 1e-300)


def _formula_prefactor(powers, dim: int) -> float:
    out = 1.0
    for m in powers:
        half = m // 2
        out *= (
            float(math.factorial(m))
            / (2.0**half * (2.0 * np.pi) ** (half * dim) * float(math.factorial(half)))
        )
    return out


def moment_formula(
    q: MomentQuery,
    draws: int = 20000,
    seed: int = 2161,
    dim_cap: int = MOMENT_DIM_CAP,
    chunk: int = 512,
) -> MomentResult:
    """Closed-form route, Monte Carlo over the time box only.

    Requires H d < 1 so the time integrand is integrable.  The per-draw
    weight is (2 pi)^{p d / 2} |G + ridge|^{-d/2} exp(phase + ridge term)
    with G the Gram matrix of the drawn times, p = |m|/2 time points.
    """
    if any(m % 2 for m in q.powers):
        return MomentResult(value=0.0, se=0.0, method="FORMULA_MC", draws=0)
    d = q.spec.dim
    if q.spec.hurst * d >= 1.0:
        raise ValueError("moment formula needs H d < 1")
    p = q.total_power // 2
    if p * d > dim_cap:
        raise CapacityError(
            f"Fourier dimension |m|d/2 = {p * d} exceeds cap {dim_cap}"
        )
    cov = covariance(q.spec)
    x_level = np.asarray(q.x, dtype=float)

    # Each time coordinate comes with a sampling transform.  The Gaussian
    # weight behaves like u^{-Hd} as a coordinate approaches 0, so intervals
    # starting at 0 use u = b v^beta with beta = 1/(1 - Hd), whose Jacobian
    # cancels the singularity (finite-variance importance sampling).  Other
    # intervals are sampled uniformly.
    beta = 1.0 / (1.0 - q.spec.hurst * d)
    transforms = []
    for (a, b), m in zip(q.intervals, q.powers):
        for _ in range(m // 2):
            if a == 0.0:
                transforms.append(("power", a, b))
            else:
                transforms.append(("uniform", a, b))

    n_chunks = (draws + chunk - 1) // chunk
    sums = np.zeros(n_chunks)
    sums_sq = np.zeros(n_chunks)
    counts = np.zeros(n_chunks)
    for c in range(n_chunks):
        rng = generator(seed, 0xF0, c)
        size = min(chunk, draws - c * chunk)
        vals = np.empty(size)
        for i in range(size):
            u = np.empty(p)
            jac = 1.0
            for j, (mode, a, b) in enumerate(transforms):
                v = rng.uniform()
                if mode == "power":
                    u[j] = b * v**beta
                    jac *= b * beta * v ** (beta - 1.0)
                else:
                    u[j] = a + (b - a) * v
                    jac *= b - a
            gram = cov(u[:, None], u[None, :])
            gram = 0.5 * (gram + gram.T) + _RIDGE * np.eye(p)
            chol = np.linalg.cholesky(gram)
            z = rng.standard_normal((p, d))
            # xi ~ N(0, (G + ridge)^{-1}) via xi = L^{-T} z
            xi = np.linalg.solve(chol.T, z)
            logdet = 2.0 * np.sum(np.log(np.diag(chol)))
            log_w = 0.5 * p * d * np.log(2.0 * np.pi) - 0.5 * d * logdet
            phase = float(x_level @ xi.sum(axis=0))
            ridge_term = 0.5 * _RIDGE * float(np.sum(xi * xi))
            vals[i] = jac * np.exp(log_w + ridge_term) * np.cos(phase)
        sums[c] = kahan_sum(vals)
        sums_sq[c] = kahan_sum(vals * vals)
        counts[c] = size
    n = float(counts.sum())
    mean = kahan_sum(sums) / n
    var = max(kahan_sum(sums_sq) / n - mean * mean, 0.0)
    scale = _formula_prefactor(q.powers, d)
    return MomentResult(
        value=scale * mean,
        se=scale * float(np.sqrt(var / n)),
        method="FORMULA_MC",
        draws=draws,
    )


def moment_simulated(
    q: MomentQuery,
    replicates: int = 10000,
    n_t: int = 4096,
    eps_proxy: float = 1e-4,
    seed: int = 55,
) -> MomentResult:
    """Simulation route: paths + heat-kernel local-time proxy + explicit W.

    Given the path, the increments W(L(b_i)) - W(L(a_i)) over disjoint
    ordered intervals are independent centered Gaussians with variances
    L(b_i) - L(a_i), so one standard normal per interval suffices.
    """
    horizon = max(b for _, b in q.intervals)
    cfg = EstimatorConfig(
        epsilon=eps_proxy,
        x=q.x,
        k=MultiIndex.zero(q.spec.dim),
        T=horizon,
        rule=IntegrationRule.TRAPEZOID,
    )
    ab_times = np.array([t for iv in q.intervals for t in iv])
    vals = np.empty(replicates)
    for r in range(replicates):
        path = sample_path(q.spec, horizon, n_t, substream(seed, r))
        lt = estimate_at_times(path, cfg, ab_times)
        rng = generator(seed, 0xAB, r)
        prod = 1.0
        for i, m in enumerate(q.powers):
            inc = max(lt[2 * i + 1] - lt[2 * i], 0.0)
            w_inc = np.sqrt(inc) * rng.standard_normal()
            prod *= w_inc**m
        vals[r] = prod
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / np.sqrt(replicates))
    return MomentResult(value=mean, se=se, method="SIMULATION_MC", draws=replicates)


# ---------------------------------------------------------------------------
# Inequality property suites
# ---------------------------------------------------------------------------

@dataclass
class LemmaSuiteReport:
    name: str
    trials: int
    max_ratio: float
    max_ratio_doubled: float
    passed: bool
    worst_draw: Optional[dict] = None

    def __str__(self):
        status = "pass" if self.passed else "FAIL"
        return (
            f"{self.name}: {status} (max ratio {self.max_ratio:.4g}, "
            f"doubled {self.max_ratio_doubled:.4g})"
        )


def _draw_points(rng, d, scales=(0.3, 1.0, 3.0)):
    s = scales[int(rng.integers(len(scales)))]
    return s * rng.standard_normal(d)


def _min1(v: float) -> float:
    return min(v, 1.0)


def difference_inequality_suite(
    f: TestFunction, order_n: int, trials: int = 2000, seed: int = 99, drift_tol: float = 0.10
) -> LemmaSuiteReport:
    """Ratio |fhat(x+y) - fhat(x)| / ((|x|^{N-1}|y|) ^ 1 + |y|^N ^ 1).

    Passes when the max ratio is finite and grows by at most ``drift_tol``
    when the number of draws doubles (drawn from one stream, so the first
    half is a prefix of the doubled set).  Zero-y draws are included; a 0/0
    ratio counts as 0.
    """
    d = f.dim
    rng = generator(seed, 0x21)
    ratios = np.empty(2 * trials)
    worst = None
    for i in range(2 * trials):
        x = _draw_points(rng, d)
        y = np.zeros(d) if i % 97 == 0 else _draw_points(rng, d)
        lhs = abs(complex(np.asarray(f.fhat(x + y)).reshape(())) - complex(np.asarray(f.fhat(x)).reshape(())))
        nx, ny = float(np.linalg.norm(x)), float(np.linalg.norm(y))
        rhs = _min1(nx ** (order_n - 1) * ny) + _min1(ny**order_n)
        if rhs == 0.0:
            ratios[i] = 0.0 if lhs == 0.0 else np.inf
        else:
            ratios[i] = lhs / rhs
        if worst is None or ratios[i] > worst["ratio"]:
            worst = {"ratio": float(ratios[i]), "x": x.tolist(), "y": y.tolist()}
    r1 = float(np.max(ratios[:trials]))
    r2 = float(np.max(ratios))
    passed = np.isfinite(r2) and r2 <= (1.0 + drift_tol) * r1
    return LemmaSuiteReport("fourier_difference_bound", trials, r1, r2, passed, worst)


def _product_lhs(f, k: MultiIndex, xs, ys):
    f0 = complex(np.asarray(f.fhat(np.zeros(f.dim))).reshape(()))
    with_y = 1.0 + 0.0j
    without = 1.0 + 0.0j
    for x, y in zip(xs, ys):
        mult_y = np.prod([complex(frac_power(x[l] + y[l], k.k[l])) for l in range(f.dim)])
        mult_x = np.prod([complex(frac_power(x[l], k.k[l])) for l in range(f.dim)])
        with_y *= mult_y * (complex(np.asarray(f.fhat(x + y)).reshape(())) - f0)
        without *= mult_x * (complex(np.asarray(f.fhat(x)).reshape(())) - f0)
    return abs(with_y - without)


def _product_rhs(k_order: float, order_n: int, xs, ys):
    norms_x = [float(np.linalg.norm(x)) for x in xs]
    norms_y = [float(np.linalg.norm(y)) for y in ys]
    total = 0.0
    for j in range(len(xs)):
        nx, ny = norms_x[j], norms_y[j]
        if k_order > 0:
            term = (
                nx**k_order * _min1(nx ** (order_n - 1) * ny)
                + ny**k_order * _min1(ny) ** order_n
                + nx ** (k_order - 1.0) * _min1(nx) ** order_n * ny
                + ny**k_order * _min1(nx) ** order_n
            )
        else:
            term = _min1(nx ** (order_n - 1) * ny) + _min1(ny**order_n)
        rest = 1.0
        for i in range(len(xs)):
            if i == j:
                continue
            if k_order > 0:
                rest *= (
                    norms_x[i] ** k_order * _min1(norms_x[i]) ** order_n
                    + norms_y[i] ** k_order * _min1(norms_y[i]) ** order_n
                )
            else:
                rest *= _min1(norms_x[i] ** order_n) + _min1(norms_y[i] ** order_n)
        total += term * rest
    return total


def product_inequality_suite(
    f: TestFunction,
    k,
    order_n: int,
    n_factors: int = 2,
    trials: int = 2000,
    seed: int = 98,
    drift_tol: float = 0.10,
) -> LemmaSuiteReport:
    """Product-difference bound: perturbing every factor of the product
    prod_j (i(x_j + y_j))^k (fhat(x_j + y_j) - fhat(0)) costs at most a sum
    of single-factor increments.  Requires integer k (the bound's proof
    expands integer powers)."""
    k = MultiIndex.of(k, dim=f.dim)
    if not k.all_integer:
        raise ValueError("product inequality is stated for integer multi-indices")
    d = f.dim
    rng = generator(seed, 0x22)
    ratios = np.empty(2 * trials)
    worst = None
    for i in range(2 * trials):
        xs = [_draw_points(rng, d) for _ in range(n_factors)]
        ys = [
            np.zeros(d) if (i % 89 == 0 and j == 0) else _draw_points(rng, d)
            for j in range(n_factors)
        ]
        lhs = _product_lhs(f, k, xs, ys)
        rhs = _product_rhs(k.order, order_n, xs, ys)
        if rhs == 0.0:
            ratios[i] = 0.0 if lhs < 1e-14 else np.inf
        else:
            ratios[i] = lhs / rhs
        if worst is None or ratios[i] > worst["ratio"]:
            worst = {"ratio": float(ratios[i])}
    r1 = float(np.max(ratios[:trials]))
    r2 = float(np.max(ratios))
    passed = np.isfinite(r2) and r2 <= (1.0 + drift_tol) * r1
    return LemmaSuiteReport("product_difference_bound", trials, r1, r2, passed, worst)
