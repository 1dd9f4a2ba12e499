"""Acceptance suite: every exit criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one printed
pass/fail line per criterion.  The two Monte Carlo reproduction criteria
(LP-rate and mixed-normal diagnostics) are desk-scale experiments and
dominate the runtime (tens of minutes together); everything else finishes
in seconds to a few minutes.
"""
import itertools
import json

import numpy as np
import pytest
from scipy import integrate

from loclim.experiments import (
    ExperimentConfig,
    geometric_grid,
    run_clt_experiment,
    run_rate_experiment,
)
from loclim.heatkernel import MultiIndex, gaussian_kernel_function, heat_kernel_deriv
from loclim.limits import ConstantName, constant
from loclim.loctime import EstimatorConfig, estimate_many
from loclim.moments import (
    MomentQuery,
    difference_inequality_suite,
    moment_formula,
    moment_simulated,
    product_inequality_suite,
)
from loclim.processes import brownian, covariance, fbm, sample_path
from loclim.rng import substream

from test_heatkernel import finite_difference_deriv


def report(num, name, ok, detail):
    line = f"ACCEPTANCE {num:>2} {name}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    assert ok, line


# -------------------------------------------------------------------------
# 1. Heat-kernel derivative correctness
# -------------------------------------------------------------------------

def test_criterion_01_heat_kernel_derivatives():
    rng = np.random.default_rng(101)
    worst_fd = 0.0
    for dim in (1, 2, 3):
        for eps in (0.25, 1.0):
            for total in range(1, 5):
                for k in itertools.product(range(total + 1), repeat=dim):
                    if sum(k) != total:
                        continue
                    pts = rng.uniform(-3 * np.sqrt(eps), 3 * np.sqrt(eps), size=(6, dim))
                    exact = np.array(
                        [heat_kernel_deriv(p, eps, MultiIndex(tuple(map(float, k)))) for p in pts]
                    )
                    fd = np.array([finite_difference_deriv(p, eps, k) for p in pts])
                    worst_fd = max(worst_fd, np.max(np.abs(exact - fd)) / np.max(np.abs(exact)))
    worst_fq = 0.0
    xs = np.linspace(-3.0, 3.0, 25)[:, None]
    for n in range(5):
        for eps in (0.1, 0.5, 1.0):
            a = heat_kernel_deriv(xs, eps, MultiIndex((float(n),)))
            b = heat_kernel_deriv(xs, eps, MultiIndex((float(n),)), force_fourier=True)
            worst_fq = max(worst_fq, float(np.max(np.abs(a - b))))
    ok = worst_fd <= 1e-6 and worst_fq <= 1e-8
    report(1, "heat-kernel derivatives", ok,
           f"FD rel {worst_fd:.2e} <= 1e-6, Fourier abs {worst_fq:.2e} <= 1e-8")


# -------------------------------------------------------------------------
# 2. Pointwise rescaling identity
# -------------------------------------------------------------------------

def test_criterion_02_scaling_identity():
    rng = np.random.default_rng(202)
    orders = [0.0, 1.0, 2.0, 3.0, 0.5, 1.3, 2.25]
    worst = 0.0
    for _ in range(1000):
        d = int(rng.integers(1, 4))
        k = MultiIndex(tuple(rng.choice(orders) for _ in range(d)))
        eps = float(rng.uniform(0.05, 4.0))
        x = rng.normal(size=d) * np.sqrt(eps)
        lhs = heat_kernel_deriv(x, eps, k)
        rhs = eps ** (-(k.order + d) / 2.0) * heat_kernel_deriv(x / np.sqrt(eps), 1.0, k)
        worst = max(worst, abs(lhs - rhs) / max(abs(rhs), 1e-300))
    report(2, "rescaling identity", worst <= 1e-10, f"worst rel {worst:.2e} over 1000 draws")


# -------------------------------------------------------------------------
# 3. Sampler exactness
# -------------------------------------------------------------------------

def test_criterion_03_sampler_covariance():
    m = 10_000
    probe_idx = np.arange(64, 513, 64)
    worst_z = 0.0
    for hurst in (0.3, 0.5, 0.7):
        spec = fbm(hurst)
        r = covariance(spec)
        samples = np.empty((m, len(probe_idx)))
        for rep in range(m):
            p = sample_path(spec, 1.0, 512, seed=substream(303, rep))
            samples[rep] = p.values[0, probe_idx]
        times = probe_idx / 512.0
        for i in range(len(times)):
            for j in range(i, len(times)):
                prod = samples[:, i] * samples[:, j]
                emp = prod.mean()
                se = prod.std(ddof=1) / np.sqrt(m)
                target = float(r(times[i], times[j]))
                if hurst == 0.5:
                    assert target == pytest.approx(min(times[i], times[j]), abs=1e-14)
                worst_z = max(worst_z, abs(emp - target) / se)
    report(3, "sampler exactness", worst_z <= 4.0, f"worst |z| {worst_z:.2f} <= 4 SE")


# -------------------------------------------------------------------------
# 4. Analytic mean oracle
# -------------------------------------------------------------------------

def test_criterion_04_mean_oracle():
    m = 10_000
    spec = brownian()
    cfgs = [EstimatorConfig(epsilon=e, x=(0.0,), k=MultiIndex((0.0,))) for e in (0.1, 0.01)]
    sums = np.zeros((m, 2))
    for rep in range(m):
        p = sample_path(spec, 1.0, 1024, seed=substream(404, rep))
        sums[rep] = [e.value for e in estimate_many(p, cfgs)]
    detail = []
    ok = True
    for col, eps in enumerate((0.1, 0.01)):
        target, _ = integrate.quad(lambda t: (2 * np.pi * (t + eps)) ** -0.5, 0, 1)
        se = sums[:, col].std(ddof=1) / np.sqrt(m)
        z = abs(sums[:, col].mean() - target) / se
        ok = ok and z <= 3.0
        detail.append(f"eps={eps}: |z|={z:.2f}")
    report(4, "mean oracle", ok, "; ".join(detail) + " <= 3 SE")


# -------------------------------------------------------------------------
# 5. Limiting constants
# -------------------------------------------------------------------------

def test_criterion_05_constants():
    oracle, _ = integrate.quad(lambda x: x**4 * np.exp(-x * x / 2), -np.inf, np.inf)
    target = oracle / (2 * 0.2 * 2 * np.pi)  # 3/(2H sqrt(2 pi)) at H=1/5
    d1 = constant(ConstantName.DTILDE1, hurst="1/5", sigma=1.0, dim=1, k=0)
    rel1 = abs(d1.value - target) / target
    p1 = gaussian_kernel_function(1)
    b = constant(ConstantName.D_HD_BOUNDARY, hurst="1/5", sigma=1.0, dim=1, k=0, order_n=2, f=p1)
    rel2 = abs(b.value / d1.value - 1.0)
    ok = rel1 <= 1e-6 and rel2 <= 1e-8
    report(5, "limiting constants", ok,
           f"Dtilde1={d1.value:.6f} rel {rel1:.1e} <= 1e-6; boundary/Dtilde1-1 = {rel2:.1e} <= 1e-8")


# -------------------------------------------------------------------------
# 6. LP-regime rate reproduction (desk-scale Monte Carlo)
# -------------------------------------------------------------------------

def test_criterion_06_lp_rate():
    cfg = ExperimentConfig(
        spec=fbm(0.1),
        eps_grid=geometric_grid(2.0**-4, 0.5, 6),
        eps_ref=2.0**-15,
        replicates=200,
        n_t=2**23,
        master_seed=606,
        hurst_label="1/10",
        workers=1,
    )
    rec = run_rate_experiment(cfg)
    slope = rec.results["slope"]
    ok = 0.8 <= slope <= 1.2
    report(6, "LP-regime rate", ok,
           f"slope {slope:.3f} +- {rec.results['slope_se']:.3f}, want 1.0 +- 0.2")


# -------------------------------------------------------------------------
# 7 + 8 + 11. Mixed-normal regime: rate, variance, shape, independence,
# tightness (one shared experiment)
# -------------------------------------------------------------------------

@pytest.fixture(scope="module")
def clt_record():
    cfg = ExperimentConfig(
        spec=fbm(1.0 / 3.0),
        eps_grid=geometric_grid(2.0**-4, 0.5, 7),
        eps_ref=2.0**-16,
        replicates=256,
        n_t=2**22,
        master_seed=707,
        hurst_label="1/3",
        workers=1,
    )
    return run_clt_experiment(cfg)


def test_criterion_07_clt_rate_and_variance(clt_record):
    res = clt_record.results
    slope_ok = 0.35 <= res["sd_slope"] <= 0.65
    ratio_ok = 0.7 <= res["var_ratio_at_min_eps"] <= 1.3
    report(7, "CLT-regime rate and variance", slope_ok and ratio_ok,
           f"sd slope {res['sd_slope']:.3f} in 0.5 +- 0.15; "
           f"Var(F)/(D*EL) {res['var_ratio_at_min_eps']:.3f} in [0.7, 1.3]")


def test_criterion_08_mixed_normal_diagnostics(clt_record):
    res = clt_record.results
    corr_ok = abs(res["corr_F_XT"]) <= 3.0 * res["corr_se"]
    kurt_ok = abs(res["excess_kurtosis"]) <= 3.0 * res["kurtosis_se"]
    report(8, "mixed-normal diagnostics", corr_ok and kurt_ok,
           f"corr {res['corr_F_XT']:+.3f} (3se {3 * res['corr_se']:.3f}); "
           f"excess kurt {res['excess_kurtosis']:+.3f} (3se {3 * res['kurtosis_se']:.3f})")


def test_criterion_11_tightness(clt_record):
    res = clt_record.results
    floor = 0.8 * (1.0 - 1.0 / 3.0)
    ok = res["tightness_exponent"] >= floor
    report(11, "tightness scaling", ok,
           f"m=2 gap exponent {res['tightness_exponent']:.3f} >= {floor:.3f}")


# -------------------------------------------------------------------------
# 9. Moment oracle
# -------------------------------------------------------------------------

def test_criterion_09_moment_oracle():
    q2 = MomentQuery(((0.0, 1.0),), (2,), (0.0,), brownian())
    f2 = moment_formula(q2, draws=20000, seed=909)
    target = np.sqrt(2.0 / np.pi)
    z = abs(f2.value - target) / max(f2.se, 1e-9)
    anchor_ok = z <= 3.0 or abs(f2.value - target) <= 1e-5

    odd = moment_formula(MomentQuery(((0.0, 1.0),), (1,), (0.0,), brownian()))
    odd_ok = odd.value == 0.0 and odd.se == 0.0

    s2 = moment_simulated(q2, replicates=10_000, n_t=2048, seed=909)
    m2_ok = abs(f2.value - s2.value) <= 3.0 * np.hypot(f2.se, s2.se) + 1e-6

    q22 = MomentQuery(((0.0, 0.5), (0.5, 1.0)), (2, 2), (0.0,), brownian())
    f22 = moment_formula(q22, draws=20000, seed=909)
    s22 = moment_simulated(q22, replicates=10_000, n_t=2048, seed=909)
    m22_ok = abs(f22.value - s22.value) <= 3.0 * np.hypot(f22.se, s22.se) + 1e-6

    ok = anchor_ok and odd_ok and m2_ok and m22_ok
    report(9, "moment oracle", ok,
           f"anchor {f2.value:.5f} vs {target:.5f}; odd exact 0: {odd_ok}; "
           f"m=(2) agree: {m2_ok}; m=(2,2) agree: {m22_ok}")


# -------------------------------------------------------------------------
# 10. Inequality property suites
# -------------------------------------------------------------------------

def test_criterion_10_inequality_suites():
    p1 = gaussian_kernel_function(1)
    diff = difference_inequality_suite(p1, 2, trials=10_000, seed=1010)
    prods = [
        product_inequality_suite(p1, float(k), 2, n_factors=n, trials=10_000, seed=1010 + k)
        for k in (0, 1, 2)
        for n in (1, 2)
    ]
    ok = diff.passed and all(p.passed for p in prods)
    worst = max([diff.max_ratio_doubled] + [p.max_ratio_doubled for p in prods])
    report(10, "inequality suites", ok,
           f"all ratios finite, max {worst:.3f}, drift <= 10% on doubling")


# -------------------------------------------------------------------------
# 12. Determinism across worker counts
# -------------------------------------------------------------------------

def test_criterion_12_determinism(monkeypatch):
    monkeypatch.delenv("LOCLIM_THREADS", raising=False)

    def rate_cfg(workers):
        return ExperimentConfig(
            spec=fbm(0.1),
            eps_grid=geometric_grid(2.0**-4, 0.5, 4),
            eps_ref=2.0**-12,
            replicates=64,
            n_t=2**14,
            master_seed=1212,
            hurst_label="1/10",
            workers=workers,
        )

    def clt_cfg(workers):
        return ExperimentConfig(
            spec=fbm(1.0 / 3.0),
            eps_grid=geometric_grid(2.0**-4, 0.5, 4),
            eps_ref=2.0**-12,
            replicates=32,
            n_t=2**14,
            master_seed=1212,
            hurst_label="1/3",
            workers=workers,
        )

    rate_match = json.dumps(run_rate_experiment(rate_cfg(1)).to_dict(), sort_keys=True) == \
        json.dumps(run_rate_experiment(rate_cfg(8)).to_dict(), sort_keys=True)
    clt_match = json.dumps(run_clt_experiment(clt_cfg(1)).to_dict(), sort_keys=True) == \
        json.dumps(run_clt_experiment(clt_cfg(8)).to_dict(), sort_keys=True)
    report(12, "determinism 1 vs 8 workers", rate_match and clt_match,
           f"rate bit-identical: {rate_match}; clt bit-identical: {clt_match}")
