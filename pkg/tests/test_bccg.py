import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from morphspan.bccg import (
    BccgParams,
    bccg_cdf,
    bccg_logpdf,
    bccg_pdf,
    bccg_quantile,
    bccg_rvs,
    transform_z,
)
from morphspan.errors import DegenerateInputError

PARAM_GRID = [
    (mu, sigma, nu)
    for mu in (50.0, 100.0, 200.0)
    for sigma in (0.05, 0.1, 0.3)
    for nu in (-1.0, 0.0, 2.0)
]


class TestDensity:
    def test_nu_zero_is_lognormal(self):
        y = np.linspace(50, 200, 7)
        ours = bccg_logpdf(y, (100.0, 0.1, 0.0))
        oracle = stats.lognorm.logpdf(y, s=0.1, scale=100.0)
        assert np.allclose(ours, oracle, atol=1e-12)

    @pytest.mark.parametrize("params", PARAM_GRID)
    def test_pdf_integrates_to_one(self, params):
        # Split at mu so adaptive quadrature cannot miss the peak.
        mu = params[0]
        lo, _ = integrate.quad(
            lambda y: bccg_pdf(y, params), 1e-12, mu, limit=400
        )
        hi, _ = integrate.quad(
            lambda y: bccg_pdf(y, params), mu, np.inf, limit=400
        )
        assert lo + hi == pytest.approx(1.0, abs=1e-6)

    def test_median_point_z_zero(self):
        for params in PARAM_GRID:
            assert transform_z(params[0], *params) == pytest.approx(0.0, abs=1e-14)

    def test_continuity_in_nu(self):
        y = np.linspace(60, 160, 11)
        a = bccg_logpdf(y, (100.0, 0.1, 1e-8))
        b = bccg_logpdf(y, (100.0, 0.1, 0.0))
        assert np.max(np.abs(a - b)) < 1e-6

    def test_invalid_inputs(self):
        with pytest.raises(DegenerateInputError):
            bccg_logpdf(-1.0, (100.0, 0.1, 0.5))
        with pytest.raises(DegenerateInputError):
            bccg_logpdf(1.0, (0.0, 0.1, 0.5))
        with pytest.raises(DegenerateInputError):
            bccg_logpdf(1.0, (100.0, -0.1, 0.5))


class TestCdfQuantile:
    def test_quantile_examples(self):
        # nu=1 is the shifted-linear case: y = mu (1 + sigma z_p).
        assert bccg_quantile(0.975, (100.0, 0.1, 1.0)) == pytest.approx(
            119.600, abs=1e-3
        )
        # nu=0 lognormal with z=1.
        p = stats.norm.cdf(1.0)
        assert bccg_quantile(p, (100.0, 0.1, 0.0)) == pytest.approx(
            110.517, abs=1e-3
        )

    def test_median_is_mu(self):
        # Exact when the truncated tail is negligible; within the tail
        # mass otherwise (the truncation correction moves the median by
        # O(Phi(-1/(sigma|nu|)))).
        for mu, sigma, nu in PARAM_GRID:
            got = bccg_quantile(0.5, (mu, sigma, nu))
            if sigma * abs(nu) <= 0.1:
                assert got == pytest.approx(mu, rel=1e-12)
            else:
                tail = stats.norm.sf(1.0 / (sigma * abs(nu)))
                assert abs(got - mu) / mu <= tail

    @pytest.mark.parametrize("params", PARAM_GRID)
    def test_quantile_cdf_round_trip(self, params):
        for p in (0.05, 0.5, 0.95, 0.999):
            y = bccg_quantile(p, params)
            assert bccg_cdf(y, params) == pytest.approx(p, abs=1e-10)

    @pytest.mark.parametrize("params", [(100.0, 0.3, -1.0), (80.0, 0.2, 1.5)])
    def test_cdf_matches_pdf_quadrature(self, params):
        for y in (60.0, 100.0, 150.0):
            oracle, _ = integrate.quad(
                lambda t: bccg_pdf(t, params), 1e-12, y, limit=400
            )
            assert bccg_cdf(y, params) == pytest.approx(oracle, abs=1e-8)

    def test_cdf_monotone(self):
        y = np.linspace(1.0, 400.0, 200)
        for params in PARAM_GRID:
            c = bccg_cdf(y, params)
            assert np.all(np.diff(c) >= 0)

    def test_vectorized_mu_sigma(self):
        mu = np.array([80.0, 100.0, 120.0])
        sigma = np.array([0.1, 0.2, 0.3])
        q = bccg_quantile(0.9, (mu, sigma, 0.5))
        single = [
            bccg_quantile(0.9, (m, s, 0.5)) for m, s in zip(mu, sigma)
        ]
        assert np.allclose(q, single)


class TestSampling:
    def test_rvs_matches_cdf(self):
        rng = np.random.default_rng(0)
        params = (100.0, 0.15, -0.5)
        sample = bccg_rvs(params, size=4000, rng=rng)
        assert np.all(sample > 0)
        stat = stats.kstest(sample, lambda y: bccg_cdf(y, params)).pvalue
        assert stat > 0.01

    def test_rvs_deterministic_for_seed(self):
        params = (100.0, 0.1, 0.5)
        a = bccg_rvs(params, size=10, rng=np.random.default_rng(7))
        b = bccg_rvs(params, size=10, rng=np.random.default_rng(7))
        assert np.array_equal(a, b)


@settings(max_examples=40, deadline=None)
@given(
    st.floats(10.0, 500.0),
    st.floats(0.02, 0.4),
    st.floats(-2.0, 2.0),
    st.floats(0.01, 0.99),
)
def test_round_trip_property(mu, sigma, nu, p):
    y = bccg_quantile(p, (mu, sigma, nu))
    assert y > 0
    assert bccg_cdf(y, (mu, sigma, nu)) == pytest.approx(p, abs=1e-8)


def test_params_dataclass_validates():
    with pytest.raises(DegenerateInputError):
        BccgParams(mu=-1.0, sigma=0.1, nu=0.0)
    with pytest.raises(DegenerateInputError):
        BccgParams(mu=1.0, sigma=0.0, nu=0.0)
