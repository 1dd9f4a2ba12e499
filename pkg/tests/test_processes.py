"""Covariance models and exact path sampling."""
import numpy as np
import pytest

from loclim.processes import (
    FactorizationError,
    Kind,
    ProcessSpec,
    bi_fbm,
    brownian,
    clear_caches,
    covariance,
    fbm,
    sample_path,
    sub_fbm,
)


class TestCovariance:
    def test_bm_is_min(self):
        r = covariance(brownian())
        for s, t in [(0.2, 0.7), (0.5, 0.5), (1.0, 0.25)]:
            assert r(s, t) == pytest.approx(min(s, t), abs=1e-14)

    @pytest.mark.parametrize("H,sigma", [(0.3, 1.0), (0.7, 2.5)])
    def test_fbm_diagonal(self, H, sigma):
        r = covariance(fbm(H, sigma=sigma))
        for t in [0.3, 1.0, 2.4]:
            assert r(t, t) == pytest.approx(sigma * t ** (2 * H), rel=1e-14)

    def test_sub_fbm_self_similarity_on_grid(self):
        """R(2s, 2t) = 2^{2H} R(s, t) for sfBm with H = 0.3 on a 10x10 grid."""
        H = 0.3
        r = covariance(sub_fbm(H))
        s = np.linspace(0.1, 1.0, 10)[:, None]
        t = np.linspace(0.1, 1.0, 10)[None, :]
        assert np.allclose(r(2 * s, 2 * t), 2 ** (2 * H) * r(s, t), rtol=1e-12)

    @pytest.mark.parametrize(
        "spec",
        [
            fbm(0.3),
            fbm(0.75),
            sub_fbm(0.4),
            bi_fbm(0.6, 0.5),
        ],
        ids=["fbm03", "fbm075", "sfbm04", "bifbm"],
    )
    def test_self_similarity_random_grids(self, spec):
        r = covariance(spec)
        rng = np.random.default_rng(11)
        two_h = 2 * spec.hurst
        for _ in range(50):
            a = float(rng.uniform(0.2, 5.0))
            s = float(rng.uniform(0.01, 3.0))
            t = float(rng.uniform(0.01, 3.0))
            lhs = r(a * s, a * t)
            rhs = a**two_h * r(s, t)
            assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))

    @pytest.mark.parametrize(
        "spec", [fbm(0.2), fbm(0.5), sub_fbm(0.6), bi_fbm(0.8, 0.5)],
        ids=["fbm02", "bm", "sfbm06", "bifbm"],
    )
    def test_gram_psd(self, spec):
        r = covariance(spec)
        t = np.linspace(0.05, 2.0, 24)
        gram = r(t[:, None], t[None, :])
        eigs = np.linalg.eigvalsh(0.5 * (gram + gram.T))
        assert eigs.min() >= -1e-10 * eigs.max()

    def test_sigma_increment(self):
        assert fbm(0.3, sigma=2.0).sigma_increment() == 2.0
        assert sub_fbm(0.3).sigma_increment() == pytest.approx(1.0)
        assert bi_fbm(0.6, 0.5).sigma_increment() == pytest.approx(2.0**0.5)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            ProcessSpec(Kind.FBM, hurst=1.2)
        with pytest.raises(ValueError):
            ProcessSpec(Kind.FBM, hurst=0.5, sigma=-1.0)
        with pytest.raises(ValueError):
            ProcessSpec(Kind.BI_FBM, hurst=0.3, bifbm_h=0.5, bifbm_k=0.5)


class TestSamplePath:
    def test_determinism(self):
        a = sample_path(fbm(0.3), 1.0, 256, seed=99)
        b = sample_path(fbm(0.3), 1.0, 256, seed=99)
        assert np.array_equal(a.values, b.values)

    def test_starts_at_zero(self):
        p = sample_path(fbm(0.7, dim=3), 1.0, 64, seed=5)
        assert np.all(p.values[:, 0] == 0.0)
        assert p.values.shape == (3, 65)

    def test_components_independent(self):
        p = sample_path(brownian(dim=2), 1.0, 4096, seed=17)
        inc = np.diff(p.values, axis=1)
        corr = np.corrcoef(inc[0], inc[1])[0, 1]
        assert abs(corr) < 0.05

    def test_bm_terminal_variance(self):
        """Var(X_1) = 1 for BM within 3 SE over 10^4 seeds."""
        m = 10_000
        vals = _terminal_values(brownian(), m, n_t=64)
        var = vals.var(ddof=1)
        se = var * np.sqrt(2.0 / (m - 1))
        assert abs(var - 1.0) <= 3 * se

    def test_fbm_covariance_entry(self):
        """Cov(X_{1/2}, X_1) for H = 0.3 equals 1/2 within 3 SE over 10^4 seeds."""
        spec = fbm(0.3)
        m = 10_000
        half = np.empty(m)
        full = np.empty(m)
        for r in range(m):
            p = sample_path(spec, 1.0, 16, seed=1000 + r)
            half[r] = p.values[0, 8]
            full[r] = p.values[0, 16]
        cov = np.cov(half, full)[0, 1]
        expected = 0.5 * (0.5**0.6 + 1.0 - 0.5**0.6)
        se = np.sqrt((half.var() * full.var() + cov**2) / m)
        assert abs(cov - expected) <= 3 * se

    def test_circulant_vs_cholesky_variance(self):
        """The two factorizations give statistically equal marginal variance."""
        spec = fbm(0.3)
        m = 4000
        v_c = np.empty(m)
        v_l = np.empty(m)
        for r in range(m):
            v_c[r] = sample_path(spec, 1.0, 128, seed=r, method="circulant").values[0, -1]
            v_l[r] = sample_path(spec, 1.0, 128, seed=50_000 + r, method="cholesky").values[0, -1]
        ratio = v_c.var(ddof=1) / v_l.var(ddof=1)
        # two-sample variance ratio, 1% two-sided band for m = 4000
        assert 0.91 < ratio < 1.10, f"variance ratio {ratio:.4f}"

    def test_cholesky_matches_circulant_seed_for_fbm(self):
        p1 = sample_path(sub_fbm(0.4), 1.0, 100, seed=3)
        assert p1.method == "cholesky"
        p2 = sample_path(fbm(0.4), 1.0, 100, seed=3)
        assert p2.method == "circulant"

    def test_circulant_forced_on_non_fbm_raises(self):
        with pytest.raises(FactorizationError):
            sample_path(sub_fbm(0.4), 1.0, 64, seed=1, method="circulant")

    def test_input_validation(self):
        with pytest.raises(ValueError):
            sample_path(brownian(), -1.0, 64, seed=1)
        with pytest.raises(ValueError):
            sample_path(brownian(), 1.0, 1, seed=1)

    def test_cache_clear(self):
        sample_path(fbm(0.6), 1.0, 32, seed=1)
        clear_caches()
        p = sample_path(fbm(0.6), 1.0, 32, seed=1)
        assert p.values[0, -1] == sample_path(fbm(0.6), 1.0, 32, seed=1).values[0, -1]


def _terminal_values(spec, m, n_t):
    out = np.empty(m)
    for r in range(m):
        out[r] = sample_path(spec, 1.0, n_t, seed=r).values[0, -1]
    return out


class TestSampleMoments:
    def test_zero_mean_all_grid_times(self):
        """Sample mean at every grid time is 0 within 3 SE over 10^4 replicates."""
        spec = fbm(0.7)
        m = 10_000
        acc = np.zeros(9)
        acc_sq = np.zeros(9)
        for r in range(m):
            v = sample_path(spec, 1.0, 8, seed=r).values[0]
            acc += v
            acc_sq += v * v
        mean = acc / m
        sd = np.sqrt(np.maximum(acc_sq / m - mean**2, 0.0))
        se = sd / np.sqrt(m)
        assert np.all(np.abs(mean[1:]) <= 3 * se[1:])
