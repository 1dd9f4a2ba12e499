"""Monte Carlo experiments: convergence rates and distributional checks.

A rate experiment measures E|estimate(eps) - proxy| across a geometric
bandwidth grid and fits the log-log slope; in the LP regime the paper-level
prediction is slope 1 for second-order test functions.  A distributional
experiment forms the normalized fluctuation

    F_eps(T) = ell(eps) * (rescaled functional - fhat(0) * proxy)

per replicate and checks its variance against the limiting constant times
the mean local time, the mixed-normal shape (excess kurtosis of the
per-path normalized values), independence from the path (correlation with
X_T), and the tightness scaling of F over time gaps.

Determinism: replicate r draws everything from substream (master_seed, r),
and per-replicate results land in arrays indexed by r before any reduction,
so records are bit-identical for any worker count.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError
from .heatkernel import MultiIndex, TestFunction, gaussian_kernel_function, third_order_function
from .limits import ConstantName, Regime, RegimeReport, classify, constant
from .loctime import (
    EstimatorConfig,
    IntegrationRule,
    default_grid_size,
    estimate_at_times,
    estimate_many,
    existence_gate,
)
from .processes import ProcessSpec, sample_path
from .rng import generator, substream

__all__ = [
    "ExperimentConfig",
    "ExperimentRecord",
    "geometric_grid",
    "run_rate_experiment",
    "run_clt_experiment",
    "resolve_test_function",
]

RECORD_SCHEMA = "loclim.experiment.v1"
_REPLICATE_TAG = 0x9A7B


def resolve_test_function(name: str, dim: int) -> TestFunction:
    if name == "p1":
        return gaussian_kernel_function(dim)
    if name == "third_order":
        return third_order_function(dim)
    raise ConfigError(f"unknown test function {name!r} (use p1 or third_order)")


def geometric_grid(eps0: float, ratio: float, count: int) -> tuple:
    """Strictly decreasing bandwidth grid eps0 * ratio^j, j = 0..count-1."""
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"grid ratio must be in (0,1), got {ratio}")
    if count < 1:
        raise ConfigError(f"grid count must be >= 1, got {count}")
    return tuple(eps0 * ratio**j for j in range(count))


def _env_workers():
    """LOCLIM_THREADS caps the worker count; unset means no cap."""
    raw = os.environ.get("LOCLIM_THREADS")
    if raw is None:
        return None
    try:
        return max(1, int(raw))
    except ValueError:
        return None


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a rate or distributional run needs.

    ``hurst_label`` preserves an exact-rational H ("1/5") for the regime
    classifier; ``spec.hurst`` carries the float.  ``n_t`` of None picks
    the bandwidth-tied heuristic at the smallest bandwidth (capped), which
    is fine for CLT-scale signals but noisy for LP-scale ones; rate
    experiments at small H should set it explicitly.
    """

    spec: ProcessSpec
    eps_grid: tuple
    x: tuple = (0.0,)
    k: tuple = (0.0,)
    T: float = 1.0
    order_n: int = 2
    f_name: str = "p1"
    replicates: int = 200
    eps_ref: Optional[float] = None
    n_t: Optional[int] = None
    master_seed: int = 1
    workers: Optional[int] = None
    rule: IntegrationRule = IntegrationRule.TRAPEZOID
    tightness_gaps: tuple = ()
    hurst_label: Optional[str] = None
    label: str = ""

    def __post_init__(self):
        grid = tuple(float(e) for e in self.eps_grid)
        if any(e <= 0 for e in grid):
            raise ConfigError("bandwidths must be positive")
        if any(b >= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("bandwidth grid must be strictly decreasing")
        object.__setattr__(self, "eps_grid", grid)
        if self.replicates < 2:
            raise ConfigError(f"need replicates >= 2, got {self.replicates}")
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "k", tuple(float(v) for v in self.k))
        if len(self.x) != self.spec.dim or len(self.k) != self.spec.dim:
            raise ConfigError("x and k must match the process dimension")

    @property
    def multi_index(self) -> MultiIndex:
        return MultiIndex(self.k)

    def resolved_eps_ref(self) -> float:
        if self.eps_ref is not None:
            if self.eps_ref >= min(self.eps_grid):
                raise ConfigError("eps_ref must lie below the bandwidth grid")
            return float(self.eps_ref)
        return min(self.eps_grid) / 64.0

    def resolved_n_t(self) -> int:
        if self.n_t is not None:
            return int(self.n_t)
        return default_grid_size(self.spec.hurst, min(self.eps_grid), self.T)

    def resolved_workers(self) -> int:
        cap = _env_workers()
        want = 1 if self.workers is None else max(1, int(self.workers))
        return want if cap is None else min(want, cap)

    def hurst_for_classify(self):
        return self.hurst_label if self.hurst_label is not None else self.spec.hurst

    def to_dict(self) -> dict:
        return {
            "kind": self.spec.kind.value,
            "hurst": self.spec.hurst,
            "hurst_label": self.hurst_label,
            "sigma": self.spec.sigma,
            "dim": self.spec.dim,
            "bifbm_h": self.spec.bifbm_h,
            "bifbm_k": self.spec.bifbm_k,
            "eps_grid": list(self.eps_grid),
            "x": list(self.x),
            "k": list(self.k),
            "T": self.T,
            "order_n": self.order_n,
            "f": self.f_name,
            "replicates": self.replicates,
            "eps_ref": self.resolved_eps_ref(),
            "n_t": self.resolved_n_t(),
            "master_seed": self.master_seed,
            "rule": self.rule.value,
            "tightness_gaps": list(self.tightness_gaps),
            "label": self.label,
        }


@dataclass
class ExperimentRecord:
    kind: str
    config: dict
    config_hash: str
    regime: str
    regime_detail: str
    gate_ok: bool
    results: dict
    per_replicate: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        from . import __version__

        # no wall-clock fields: records must be bit-identical across reruns
        # of the same config and master seed
        return {
            "schema": RECORD_SCHEMA,
            "version": __version__,
            "kind": self.kind,
            "config": self.config,
            "config_hash": self.config_hash,
            "regime": self.regime,
            "regime_detail": self.regime_detail,
            "gate_ok": self.gate_ok,
            "results": self.results,
            "per_replicate": self.per_replicate,
        }


def _config_hash(config: dict) -> str:
    import hashlib
    import json

    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _fit_loglog(eps: np.ndarray, values: np.ndarray):
    if len(eps) < 3:
        raise ConfigError("rate fit needs at least 3 bandwidth points")
    mask = values > 0
    if mask.sum() < 3:
        raise ConfigError("rate fit needs at least 3 positive points")
    lx = np.log(eps[mask])
    ly = np.log(values[mask])
    a = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(a, ly, rcond=None)
    return float(coef[0]), float(coef[1])


def _bootstrap_slope(eps, deltas, master_seed, resamples=200, stat="mean_abs"):
    rng = generator(master_seed, 0xB007)
    m = deltas.shape[0]
    slopes = np.empty(resamples)
    for b in range(resamples):
        idx = rng.integers(0, m, size=m)
        sample = deltas[idx]
        if stat == "mean_abs":
            vals = np.abs(sample).mean(axis=0)
        else:
            vals = sample.std(axis=0, ddof=1)
        try:
            slopes[b] = _fit_loglog(eps, vals)[0]
        except ConfigError:
            slopes[b] = np.nan
    ok = slopes[np.isfinite(slopes)]
    return float(ok.std(ddof=1)) if len(ok) > 1 else float("nan")


def _rescaled_functional_values(path, cfg: EstimatorConfig, f: TestFunction, eps_list, times):
    """Per-eps arrays of the rescaled functional at the given horizons.

    For f = p1 this is exactly the local-time derivative estimator; other
    test functions are supported at k = 0 (no derivative needed).
    """
    out = np.empty((len(eps_list), len(times)))
    if f.name == "p1":
        for i, eps in enumerate(eps_list):
            c = EstimatorConfig(epsilon=eps, x=cfg.x, k=cfg.k, T=cfg.T, rule=cfg.rule)
            out[i] = estimate_at_times(path, c, times)
        return out
    if cfg.k.order != 0:
        raise ConfigError("general test functions are supported at k = 0 only")
    d = path.values.shape[0]
    n = path.n_t
    dt = path.T / n
    shifted = path.values + np.asarray(cfg.x, dtype=float)[:, None]
    for i, eps in enumerate(eps_list):
        pts = (shifted / np.sqrt(eps)).T
        vals = np.asarray(f.f(pts), dtype=float) * eps ** (-d / 2.0)
        if cfg.rule is IntegrationRule.TRAPEZOID:
            steps = 0.5 * (vals[1:] + vals[:-1]) * dt
        else:
            steps = vals[:-1] * dt
        cum = np.concatenate([[0.0], np.cumsum(steps)])
        idx = np.rint(np.asarray(times) / dt).astype(int)
        out[i] = cum[idx]
    return out


def _run_replicates(config: ExperimentConfig, task):
    """Execute ``task(r, path) -> tuple of floats/arrays`` for every
    replicate, deterministically, optionally across threads."""
    m = config.replicates
    n_t = config.resolved_n_t()
    results: list = [None] * m

    def work(r: int):
        seed_r = substream(config.master_seed, _REPLICATE_TAG, r)
        path = sample_path(config.spec, config.T, n_t, seed_r)
        results[r] = task(r, path)

    workers = config.resolved_workers()
    if workers == 1 or m == 1:
        for r in range(m):
            work(r)
    else:
        # replicate 0 runs alone so the covariance factorization is cached
        # once instead of racing in every worker
        work(0)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, range(1, m)))
    return results


def run_rate_experiment(config: ExperimentConfig) -> ExperimentRecord:
    """Measure E|estimate(eps) - proxy| over the grid and fit the slope.

    Also estimates the LP-limit comparison: the mean of delta/eps against
    the moment-coefficient contraction of next-order derivative estimates
    at the reference bandwidth (meaningful in the LP regime).
    """
    f = resolve_test_function(config.f_name, config.spec.dim)
    if config.f_name != "p1" and config.multi_index.order != 0:
        raise ConfigError("rate experiments with |k| > 0 require f = p1")
    eps = np.asarray(config.eps_grid)
    eps_ref = config.resolved_eps_ref()
    report = classify(
        config.hurst_for_classify(), config.multi_index, config.spec.dim, config.order_n
    )
    gate = existence_gate(config.spec.hurst, config.multi_index, config.spec.dim)
    d = config.spec.dim
    k = config.multi_index
    bump_pairs = [(i, j) for i in range(d) for j in range(i, d)]

    base_cfg = EstimatorConfig(
        epsilon=float(eps[0]), x=config.x, k=k, T=config.T, rule=config.rule
    )

    def task(r, path):
        all_eps = list(eps) + [eps_ref]
        vals = _rescaled_functional_values(
            path, base_cfg, f, all_eps, np.array([config.T])
        )[:, 0]
        bumps = []
        for (i, j) in bump_pairs:
            c = EstimatorConfig(
                epsilon=eps_ref, x=config.x, k=k.bump(i, j), T=config.T, rule=config.rule
            )
            bumps.append(estimate_many(path, [c])[0].value)
        return vals[:-1], vals[-1], np.asarray(bumps)

    results = _run_replicates(config, task)
    estimates = np.stack([res[0] for res in results])  # (M, n_eps)
    refs = np.array([res[1] for res in results])
    bumps = np.stack([res[2] for res in results])  # (M, n_pairs)

    f0 = f.fhat_at(np.zeros(d)).real
    deltas = estimates - f0 * refs[:, None]
    mean_abs = np.abs(deltas).mean(axis=0)
    sd = deltas.std(axis=0, ddof=1)
    se_mean_abs = np.abs(deltas).std(axis=0, ddof=1) / np.sqrt(config.replicates)
    slope, intercept = _fit_loglog(eps, mean_abs)
    slope_se = _bootstrap_slope(eps, deltas, config.master_seed)

    # LP-limit comparison: mean(delta / eps^N) vs coefficient * moment sums
    lp = constant(ConstantName.LP_COEFFICIENT, f=f, order_n=config.order_n, dim=d)
    # contraction over ordered index tuples reduces to the diagonal moments
    # for N = 2: sum_{i<=j} mult * m_(i,j) * mean bump_(i,j)
    contraction = 0.0
    for idx_pair, mom in lp.tensor.items():
        if len(idx_pair) != 2:
            continue
        (i, j) = idx_pair
        mult = 1.0 if i == j else 2.0
        pos = bump_pairs.index((i, j))
        contraction += mult * mom * bumps[:, pos].mean()
    lp_prediction = (lp.prefactor * contraction).real if config.order_n == 2 else None
    ratio_at = (deltas / eps[None, :] ** (config.order_n / 2.0)).mean(axis=0)

    cfg_dict = config.to_dict()
    results_dict = {
        "eps": list(map(float, eps)),
        "eps_ref": eps_ref,
        "mean_abs_delta": list(map(float, mean_abs)),
        "se_mean_abs_delta": list(map(float, se_mean_abs)),
        "sd_delta": list(map(float, sd)),
        "slope": slope,
        "slope_se": slope_se,
        "intercept": intercept,
        "mean_ref": float(refs.mean()),
        "lp_limit_prediction": lp_prediction,
        "lp_limit_empirical": float(ratio_at[-1]),
        "lp_ratio_per_eps": list(map(float, ratio_at)),
    }
    return ExperimentRecord(
        kind="rate",
        config=cfg_dict,
        config_hash=_config_hash(cfg_dict),
        regime=report.regime.value,
        regime_detail=str(report),
        gate_ok=gate,
        results=results_dict,
        per_replicate={
            "delta": [list(map(float, row)) for row in deltas],
            "ref": list(map(float, refs)),
        },
    )


def _variance_constant(report: RegimeReport, config: ExperimentConfig, f: TestFunction):
    params = dict(
        hurst=config.hurst_for_classify(),
        sigma=config.spec.sigma_increment(),
        dim=config.spec.dim,
        k=config.multi_index,
        order_n=config.order_n,
        f=f,
    )
    if report.regime is Regime.BOUNDARY_LOG:
        return constant(ConstantName.D_HD_BOUNDARY, **params)
    return constant(ConstantName.D_HD_CLT, **params)


def run_clt_experiment(config: ExperimentConfig) -> ExperimentRecord:
    """Distributional diagnostics for the mixed-normal regimes.

    Per replicate and bandwidth this computes F_eps(T); at the smallest
    bandwidth it reports Var(F) against D * E[local time], the excess
    kurtosis of the per-path normalized F, the correlation with X_T, and
    the tightness moments of F over time gaps from 0.
    """
    f = resolve_test_function(config.f_name, config.spec.dim)
    eps = np.asarray(config.eps_grid)
    eps_ref = config.resolved_eps_ref()
    report = classify(
        config.hurst_for_classify(), config.multi_index, config.spec.dim, config.order_n
    )
    regime_warn = report.regime not in (Regime.CLT, Regime.BOUNDARY_LOG)
    gate = existence_gate(config.spec.hurst, config.multi_index, config.spec.dim)
    d = config.spec.dim
    gaps = tuple(config.tightness_gaps) or (config.T / 4.0, config.T / 2.0, config.T)
    times = np.array(sorted(set(list(gaps) + [config.T])))

    base_cfg = EstimatorConfig(
        epsilon=float(eps[0]), x=config.x, k=config.multi_index, T=config.T, rule=config.rule
    )

    def task(r, path):
        all_eps = list(eps) + [eps_ref]
        vals = _rescaled_functional_values(path, base_cfg, f, all_eps, times)
        return vals[:-1], vals[-1], float(path.values[0, -1])

    results = _run_replicates(config, task)
    t_idx = {t: i for i, t in enumerate(times)}
    est = np.stack([res[0] for res in results])  # (M, n_eps, n_times)
    refs = np.stack([res[1] for res in results])  # (M, n_times)
    x_T = np.array([res[2] for res in results])

    f0 = f.fhat_at(np.zeros(d)).real
    if report.scaling_factor is None:
        raise ConfigError("distributional experiment in the nonexistent regime")
    ell = np.array([report.scaling_factor(float(e)) for e in eps])
    F = ell[None, :, None] * (est - f0 * refs[:, None, :])  # (M, n_eps, n_times)
    FT = F[:, :, t_idx[config.T]]  # (M, n_eps) at horizon T

    ref_T = refs[:, t_idx[config.T]]
    mean_l = float(ref_T.mean())
    var_f = FT.var(axis=0, ddof=1)
    if regime_warn:
        # no valid limiting constant outside the mixed-normal regimes;
        # diagnostics are still computed with a unit normalization
        dconst = None
        d_value = 1.0
        ratio = float("nan")
    else:
        dconst = _variance_constant(report, config, f)
        d_value = dconst.value
        ratio = float(var_f[-1] / (d_value * mean_l))

    # mixed-normal shape: F / sqrt(D * per-path local time) ~ N(0,1)
    norm = FT[:, -1] / np.sqrt(d_value * np.maximum(ref_T, 1e-12))
    zc = norm - norm.mean()
    m2 = float((zc**2).mean())
    excess_kurt = float((zc**4).mean() / m2**2 - 3.0) if m2 > 0 else float("nan")
    kurt_se = float(np.sqrt(24.0 / config.replicates))

    corr = float(np.corrcoef(FT[:, -1], x_T)[0, 1])
    corr_se = 1.0 / np.sqrt(config.replicates)

    sd_delta = (est[:, :, t_idx[config.T]] - f0 * ref_T[:, None]).std(axis=0, ddof=1)
    sd_slope, _ = _fit_loglog(eps, sd_delta)
    sd_slope_se = _bootstrap_slope(
        eps, est[:, :, t_idx[config.T]] - f0 * ref_T[:, None], config.master_seed, stat="sd"
    )

    # tightness: second moment of F(gap) at the smallest bandwidth
    gap_m2 = []
    for g in gaps:
        gap_m2.append(float((F[:, -1, t_idx[g]] ** 2).mean()))
    tight_exponent, _ = _fit_loglog(np.asarray(gaps), np.asarray(gap_m2))

    cfg_dict = config.to_dict()
    results_dict = {
        "eps": list(map(float, eps)),
        "eps_ref": eps_ref,
        "regime_warning": regime_warn,
        "var_F": list(map(float, var_f)),
        "constant_name": dconst.name.value if dconst is not None else None,
        "constant_value": d_value if dconst is not None else None,
        "mean_local_time": mean_l,
        "var_ratio_at_min_eps": ratio,
        "excess_kurtosis": excess_kurt,
        "kurtosis_se": kurt_se,
        "corr_F_XT": corr,
        "corr_se": corr_se,
        "sd_slope": sd_slope,
        "sd_slope_se": sd_slope_se,
        "sd_delta": list(map(float, sd_delta)),
        "tightness_gaps": list(map(float, gaps)),
        "tightness_m2": gap_m2,
        "tightness_exponent": tight_exponent,
    }
    return ExperimentRecord(
        kind="clt",
        config=cfg_dict,
        config_hash=_config_hash(cfg_dict),
        regime=report.regime.value,
        regime_detail=str(report),
        gate_ok=gate,
        results=results_dict,
        per_replicate={
            "F_at_T": [list(map(float, row)) for row in FT],
            "ref_T": list(map(float, ref_T)),
            "x_T": list(map(float, x_T)),
        },
    )
