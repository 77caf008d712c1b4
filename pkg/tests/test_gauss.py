import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.stats import norm

from errmoments.gauss import NumericError, bivariate_normal_cdf, clamp_rho, std_normal_cdf


def quad_oracle(a, b, rho):
    """P(X <= a, Y <= b) as a 1-D adaptive integral over the first coordinate."""
    s = math.sqrt(1.0 - rho * rho)
    f = lambda x: norm.pdf(x) * norm.cdf((b - rho * x) / s)  # noqa: E731
    lo = min(a, -40.0)
    # the inner CDF switches from 0 to 1 near x = b / rho; tell quad where
    pts = [b / rho] if rho != 0 and lo < b / rho < a else None
    return quad(f, lo, a, points=pts, epsabs=1e-14, epsrel=1e-12, limit=500)[0]


class TestUnivariate:
    def test_known_values(self):
        assert std_normal_cdf(0.0) == 0.5
        assert std_normal_cdf(-1.0) == pytest.approx(0.15865525393145707, abs=1e-15)
        assert std_normal_cdf(1.959963984540054) == pytest.approx(0.975, abs=1e-14)

    def test_infinities(self):
        assert std_normal_cdf(-np.inf) == 0.0
        assert std_normal_cdf(np.inf) == 1.0

    def test_vectorized(self):
        x = np.linspace(-6, 6, 13)
        np.testing.assert_allclose(std_normal_cdf(x), norm.cdf(x), atol=1e-15)

    def test_nan_rejected(self):
        with pytest.raises(NumericError):
            std_normal_cdf(float("nan"))


class TestBivariate:
    def test_zero_correlation_product(self):
        rng = np.random.default_rng(0)
        a, b = rng.uniform(-5, 5, (2, 500))
        np.testing.assert_allclose(bivariate_normal_cdf(a, b, 0.0), norm.cdf(a) * norm.cdf(b), atol=1e-15)

    def test_origin_closed_form(self):
        for rho in np.linspace(-0.99, 0.99, 23):
            assert bivariate_normal_cdf(0.0, 0.0, rho) == pytest.approx(0.25 + math.asin(rho) / (2 * math.pi), abs=1e-13)

    def test_infinite_arguments(self):
        for a in (-3.0, 0.2, 4.0):
            for rho in (-0.7, 0.0, 0.95):
                assert bivariate_normal_cdf(a, np.inf, rho) == pytest.approx(norm.cdf(a), abs=1e-15)
                assert bivariate_normal_cdf(np.inf, a, rho) == pytest.approx(norm.cdf(a), abs=1e-15)
                assert bivariate_normal_cdf(a, -np.inf, rho) == 0.0
        assert bivariate_normal_cdf(np.inf, np.inf, 0.3) == 1.0

    def test_degenerate_correlations(self):
        a, b = 0.3, -0.8
        assert bivariate_normal_cdf(a, b, 1.0) == pytest.approx(min(norm.cdf(a), norm.cdf(b)), abs=1e-15)
        assert bivariate_normal_cdf(a, b, -1.0) == pytest.approx(max(0.0, norm.cdf(a) + norm.cdf(b) - 1), abs=1e-15)
        assert bivariate_normal_cdf(1.0, 2.0, -1.0) == pytest.approx(norm.cdf(1) + norm.cdf(2) - 1, abs=1e-15)

    def test_slack_and_range(self):
        assert bivariate_normal_cdf(0.1, 0.2, 1.0 + 5e-10) == pytest.approx(norm.cdf(0.1), abs=1e-15)
        with pytest.raises(NumericError):
            bivariate_normal_cdf(0.0, 0.0, 1.01)
        with pytest.raises(NumericError):
            bivariate_normal_cdf(float("nan"), 0.0, 0.2)
        with pytest.raises(NumericError):
            clamp_rho(-1.0 - 1e-6)

    @pytest.mark.parametrize("rho", [-0.95, -0.93, -0.8, -0.5, -0.2, 0.1, 0.35, 0.7, 0.9, 0.93, 0.99, 0.9999])
    def test_against_quadrature(self, rho):
        a, b = np.meshgrid(np.linspace(-5, 5, 7), np.linspace(-4.5, 4.5, 7))
        got = bivariate_normal_cdf(a, b, rho)
        want = np.vectorize(quad_oracle)(a, b, rho)
        np.testing.assert_allclose(got, want, rtol=0, atol=1e-10)

    def test_broadcasting_matches_scalar(self):
        a = np.linspace(-2, 2, 5)[:, None]
        b = np.linspace(-1, 3, 4)[None, :]
        rho = 0.6
        out = bivariate_normal_cdf(a, b, rho)
        assert out.shape == (5, 4)
        for i in range(5):
            for j in range(4):
                assert out[i, j] == bivariate_normal_cdf(float(a[i, 0]), float(b[0, j]), rho)

    @settings(max_examples=300, deadline=None)
    @given(st.floats(-8, 8), st.floats(-8, 8), st.floats(-0.999, 0.999))
    def test_symmetry_and_bounds(self, a, b, rho):
        v = bivariate_normal_cdf(a, b, rho)
        assert 0.0 <= v <= min(norm.cdf(a), norm.cdf(b)) + 1e-14
        assert v >= norm.cdf(a) + norm.cdf(b) - 1.0 - 1e-14
        assert v == pytest.approx(bivariate_normal_cdf(b, a, rho), abs=1e-14)
        # P(X <= a, Y <= b) + P(X <= a, -Y < -b) = P(X <= a)
        assert v + bivariate_normal_cdf(a, -b, -rho) == pytest.approx(norm.cdf(a), abs=1e-13)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-5, 5), st.floats(-5, 5))
    def test_monotone_in_rho(self, a, b):
        vals = bivariate_normal_cdf(a, b, np.linspace(-0.99, 0.99, 41))
        assert np.all(np.diff(vals) >= -1e-14)
