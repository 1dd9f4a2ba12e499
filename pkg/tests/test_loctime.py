"""Estimator along paths and its analytic mean oracle."""
import numpy as np
import pytest
from scipy import integrate

from loclim.heatkernel import MultiIndex, heat_kernel_deriv
from loclim.loctime import (
    EstimatorConfig,
    IntegrationRule,
    default_grid_size,
    estimate,
    estimate_at_times,
    estimate_many,
    existence_gate,
    expected_estimate,
    reference_local_time,
)
from loclim.processes import PathSample, brownian, fbm, sample_path
from loclim.rng import substream


def zero_path(n_t=256, T=1.0, dim=1, spec=None):
    """Degenerate all-zeros path: the integrand is constant along it."""
    spec = spec or brownian(dim=dim)
    grid = np.linspace(0.0, T, n_t + 1)
    return PathSample(
        grid=grid, values=np.zeros((dim, n_t + 1)), seed=0, spec=spec, method="manual"
    )


def cfg(eps, dim=1, k=None, T=1.0, rule=IntegrationRule.TRAPEZOID):
    return EstimatorConfig(
        epsilon=eps,
        x=(0.0,) * dim,
        k=MultiIndex.of(k if k is not None else 0.0, dim=dim),
        T=T,
        rule=rule,
    )


class TestEstimate:
    def test_constant_zero_path_closed_form(self):
        """k=0 on the zero path: value = T (2 pi eps)^{-1/2}."""
        eps, T = 0.04, 1.0
        val = estimate(zero_path(T=T), cfg(eps, T=T)).value
        assert val == pytest.approx(T / np.sqrt(2 * np.pi * eps), rel=1e-12)

    def test_determinism(self):
        p = sample_path(brownian(), 1.0, 512, seed=3)
        a = estimate(p, cfg(0.01)).value
        b = estimate(p, cfg(0.01)).value
        assert a == b

    def test_dimension_mismatch(self):
        p = sample_path(brownian(dim=2), 1.0, 64, seed=1)
        with pytest.raises(ValueError):
            estimate(p, cfg(0.1, dim=1))

    def test_rescaling_identity_on_fixed_path(self):
        """estimate == eps^{-(|k|+d)/2} * Riemann sum of the unit profile
        at rescaled path points, to 1e-10 relative."""
        p = sample_path(fbm(0.4), 1.0, 1024, seed=8)
        for k in [(0.0,), (1.0,), (2.0,), (0.5,)]:
            eps = 0.03
            c = cfg(eps, k=k)
            val = estimate(p, c).value
            scaled = p.values[0] / np.sqrt(eps)
            unit_vals = np.array(
                [heat_kernel_deriv([y], 1.0, MultiIndex(k)) for y in scaled]
            )
            dt = 1.0 / 1024
            manual = eps ** (-(sum(k) + 1) / 2.0) * dt * (
                unit_vals.sum() - 0.5 * (unit_vals[0] + unit_vals[-1])
            )
            assert val == pytest.approx(manual, rel=1e-10)

    def test_mc_mean_matches_expected_estimate(self):
        """BM, x=0, T=1: MC mean over 10^4 paths vs the convolution oracle."""
        spec = brownian()
        c = cfg(0.1)
        m = 10_000
        vals = np.empty(m)
        for r in range(m):
            p = sample_path(spec, 1.0, 256, seed=substream(77, r))
            vals[r] = estimate(p, c).value
        target = expected_estimate(spec, c)
        se = vals.std(ddof=1) / np.sqrt(m)
        assert abs(vals.mean() - target) <= 3 * se

    def test_odd_component_symmetry(self):
        """x = 0, k = (1): estimator mean is 0 within 3 SE."""
        spec = fbm(0.35)
        c = cfg(0.05, k=(1.0,))
        m = 4000
        vals = np.empty(m)
        for r in range(m):
            p = sample_path(spec, 1.0, 256, seed=substream(5, r))
            vals[r] = estimate(p, c).value
        se = vals.std(ddof=1) / np.sqrt(m)
        assert abs(vals.mean()) <= 3 * se

    def test_grid_refinement_converges(self):
        """|estimate(n) - estimate(2n)| shrinks over 3 doublings on one path."""
        spec = fbm(0.6)
        diffs = []
        prev = None
        for n in [256, 512, 1024, 2048]:
            p = sample_path(spec, 1.0, n, seed=12)
            v = estimate(p, cfg(0.05)).value
            if prev is not None:
                diffs.append(abs(v - prev))
            prev = v
        assert diffs[2] < diffs[0]

    def test_trapezoid_vs_riemann_scaling(self):
        """The two rules differ by O(1/n): fitted c stable across doublings."""
        spec = fbm(0.6)
        cs = []
        for n in [512, 1024, 2048]:
            p = sample_path(spec, 1.0, n, seed=9)
            t = estimate(p, cfg(0.05, rule=IntegrationRule.TRAPEZOID)).value
            r = estimate(p, cfg(0.05, rule=IntegrationRule.RIEMANN_LEFT)).value
            cs.append(abs(t - r) * n)
        assert max(cs) <= 3.0 * max(min(cs), 1e-12)

    def test_estimate_many_matches_single(self):
        p = sample_path(brownian(), 1.0, 256, seed=4)
        configs = [cfg(0.1), cfg(0.05), cfg(0.02)]
        batch = [e.value for e in estimate_many(p, configs)]
        single = [estimate(p, c).value for c in configs]
        assert batch == single


class TestEstimateAtTimes:
    def test_prefix_consistency(self):
        p = sample_path(brownian(), 1.0, 512, seed=21)
        c = cfg(0.05)
        vals = estimate_at_times(p, c, [0.25, 0.5, 1.0])
        assert vals[0] < vals[1] < vals[2]
        assert vals[2] == pytest.approx(estimate(p, c).value, rel=1e-12)

    def test_zero_time(self):
        p = sample_path(brownian(), 1.0, 64, seed=2)
        assert estimate_at_times(p, cfg(0.1), [0.0])[0] == 0.0


class TestExpectedEstimate:
    def test_bm_closed_form(self):
        """int_0^1 (2 pi (t + eps))^{-1/2} dt = 2(sqrt(1.01)-sqrt(0.01))/sqrt(2 pi)."""
        val = expected_estimate(brownian(), cfg(0.01))
        closed = 2 * (np.sqrt(1.01) - np.sqrt(0.01)) / np.sqrt(2 * np.pi)
        oracle, _ = integrate.quad(lambda t: (2 * np.pi * (t + 0.01)) ** -0.5, 0, 1)
        assert val == pytest.approx(closed, rel=1e-9)
        assert val == pytest.approx(oracle, rel=1e-9)
        # frozen from the quadrature oracle (the closed form agrees)
        assert closed == pytest.approx(0.72207560352786, rel=1e-12)

    def test_large_eps_limit(self):
        """eps >> Var(X_t): value approaches T * kernel(x; eps)."""
        spec = fbm(0.3)
        c = cfg(1e4)
        val = expected_estimate(spec, c)
        limit = 1.0 / np.sqrt(2 * np.pi * 1e4)
        assert val / limit == pytest.approx(1.0, rel=1e-4)

    def test_odd_derivative_at_origin_is_zero(self):
        val = expected_estimate(fbm(0.3), cfg(0.5, k=(1.0,)))
        assert abs(val) <= 1e-12


class TestReferenceLocalTime:
    def test_default_ratio(self):
        p = sample_path(brownian(), 1.0, 512, seed=31)
        c = cfg(0.064)
        ref = reference_local_time(p, c)
        assert ref.config.epsilon == pytest.approx(0.001)

    def test_deterministic(self):
        p = sample_path(brownian(), 1.0, 512, seed=31)
        c = cfg(0.064)
        assert reference_local_time(p, c).value == reference_local_time(p, c).value

    def test_zero_path_difference_closed_form(self):
        """Difference on the degenerate path: T[(2 pi eps)^{-1/2} - (2 pi eps/64)^{-1/2}]."""
        p = zero_path()
        c = cfg(0.1)
        ref = reference_local_time(p, c, eps_ref=0.1 / 64)
        diff = estimate(p, c).value - ref.value
        closed = (2 * np.pi * 0.1) ** -0.5 - (2 * np.pi * 0.1 / 64) ** -0.5
        assert diff == pytest.approx(closed, rel=1e-12)

    def test_zero_path_rate_slope_is_minus_half(self):
        """|estimate(eps) - estimate(eps/64)| ~ eps^{-1/2} on the zero path."""
        p = zero_path()
        eps_grid = np.array([0.2, 0.1, 0.05])
        diffs = []
        for e in eps_grid:
            c = cfg(float(e))
            d = abs(estimate(p, c).value - reference_local_time(p, c).value)
            diffs.append(d)
        slope = np.polyfit(np.log(eps_grid), np.log(diffs), 1)[0]
        assert slope == pytest.approx(-0.5, abs=1e-10)

    def test_eps_ref_must_be_smaller(self):
        p = zero_path()
        with pytest.raises(ValueError):
            reference_local_time(p, cfg(0.1), eps_ref=0.2)


class TestGates:
    def test_existence_gate(self):
        assert existence_gate(0.3, MultiIndex((0.0,)), 1)  # 0.3 < 1
        assert existence_gate(0.3, MultiIndex((1.0,)), 1)  # 0.9 < 1
        assert not existence_gate(0.5, MultiIndex((0.0,)), 2)  # 1.0
        assert not existence_gate(0.4, MultiIndex((1.0,)), 1)  # 1.2

    def test_gate_flag_on_estimate(self):
        p = sample_path(fbm(0.4, dim=2), 1.0, 64, seed=1)
        res = estimate(p, cfg(0.1, dim=2))
        assert res.gate_ok  # H(2*0+2) = 0.8 < 1

    def test_default_grid_size(self):
        assert default_grid_size(0.5, 0.01) == 32 * 100
        assert default_grid_size(0.1, 2.0**-9) == 2**20  # capped
