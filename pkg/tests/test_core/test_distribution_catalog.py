"""
Tests for the density catalog.
"""

import numpy as np
import pytest
from scipy.special import digamma
from scipy.stats import kstest, norm

from fpsteer.core.distribution_catalog import (
    Gaussian,
    GaussianMixture,
    GeneralizedLogistic,
    GeneralizedLogisticMixture,
    _quadrature_moments,
    density_from_dict,
    mean_and_std,
    moments_of,
    pdf_eval,
    sample,
)
from fpsteer.exceptions import DomainError


@pytest.fixture
def mixture():
    """0.3 N(-2, 4) + 0.7 N(2, 4)."""
    return GaussianMixture([0.3, 0.7], [-2.0, 2.0], [4.0, 4.0])


@pytest.fixture
def logistic_mixture():
    """0.4 GL(2, 0) + 0.6 GL(3, -2)."""
    return GeneralizedLogisticMixture([0.4, 0.6], [2.0, 3.0], [0.0, -2.0])


class TestDensities:

    def test_gaussian_pdf(self):
        """Standard normal at 0."""
        value = pdf_eval(Gaussian(0.0, 1.0), 0.0)
        assert value == pytest.approx(0.3989422804, abs=1e-10)

    def test_logistic_pdf(self):
        """2 * 1 / (1 + 1)^3 at x = 0."""
        value = pdf_eval(GeneralizedLogistic(2.0), 0.0)
        assert value == pytest.approx(0.25, abs=1e-12)

    def test_logistic_cdf(self):
        """CDF is (1 + e^-x)^-shape."""
        spec = GeneralizedLogistic(3.0, location=-2.0)
        x = np.array([-3.0, 0.0, 1.5])
        np.testing.assert_allclose(spec.cdf(x), (1.0 + np.exp(-(x + 2.0))) ** -3.0)

    def test_mixture_pdf(self, mixture):
        """Weighted sum of component densities."""
        expected = 0.3 * norm.pdf(2.0, -2.0, 2.0) + 0.7 * norm.pdf(2.0, 2.0, 2.0)
        assert pdf_eval(mixture, 2.0) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(0.147728, abs=1e-6)

    def test_pdf_vectorized(self, mixture):
        """Arrays in, arrays out."""
        values = pdf_eval(mixture, np.linspace(-5, 5, 11))
        assert values.shape == (11,)
        assert np.all(values > 0)

    @pytest.mark.parametrize(
        "build",
        [
            lambda: Gaussian(0.0, 0.0),
            lambda: GeneralizedLogistic(-1.0),
            lambda: GaussianMixture([0.5, 0.6], [0.0, 1.0], [1.0, 1.0]),
            lambda: GaussianMixture([1.0], [0.0, 1.0], [1.0, 1.0]),
            lambda: GaussianMixture([-0.5, 1.5], [0.0, 1.0], [1.0, 1.0]),
        ],
    )
    def test_invalid_parameters(self, build):
        """Invalid parameters raise DomainError."""
        with pytest.raises(DomainError):
            build()


class TestMoments:

    def test_standard_normal(self):
        """(0, 1, 0, 3)."""
        assert moments_of(Gaussian(0.0, 1.0), 4).to_list() == [0.0, 1.0, 0.0, 3.0]

    def test_gaussian_mixture_closed_form(self, mixture):
        """Mixture moments are the weighted component moments."""
        m = moments_of(mixture, 4, method="closed_form")
        np.testing.assert_allclose(m.values, [0.8, 8.0, 12.8, 160.0], rtol=1e-12)

    def test_quadrature_agrees_with_closed_form(self, mixture):
        """Both methods agree on a Gaussian mixture."""
        closed = moments_of(mixture, 4, method="closed_form")
        numeric = moments_of(mixture, 4, method="quadrature")
        np.testing.assert_allclose(numeric.values, closed.values, rtol=1e-8)

    def test_logistic_has_no_closed_form(self, logistic_mixture):
        """Closed form is refused for generalized logistic kinds."""
        with pytest.raises(DomainError):
            moments_of(logistic_mixture, 4, method="closed_form")

    def test_logistic_mean(self, logistic_mixture):
        """First moment equals the weighted digamma means."""
        m = moments_of(logistic_mixture, 4)
        expected = 0.4 * (digamma(2.0) - digamma(1.0)) + 0.6 * (
            digamma(3.0) - digamma(1.0) - 2.0
        )
        assert m[1] == pytest.approx(expected, rel=1e-7)

    def test_logistic_second_moment(self):
        """Shape 2: mean 1 and m_2 = pi^2 / 3."""
        m = moments_of(GeneralizedLogistic(2.0), 2)
        assert m[1] == pytest.approx(1.0, rel=1e-8)
        assert m[2] == pytest.approx(np.pi**2 / 3.0, rel=1e-8)

    def test_quadrature_refinement_is_stable(self, logistic_mixture):
        """A tighter tolerance moves the result by less than the looser one."""
        coarse = _quadrature_moments(logistic_mixture, 4, rtol=1e-9)
        fine = _quadrature_moments(logistic_mixture, 4, rtol=1e-11)
        np.testing.assert_allclose(coarse.values, fine.values, rtol=1e-8)

    def test_mean_and_std(self, mixture):
        """Central variance of the mixture is 8 - 0.64."""
        mean, std = mean_and_std(mixture)
        assert mean == pytest.approx(0.8)
        assert std == pytest.approx(np.sqrt(7.36))

    def test_unknown_method(self):
        """Only auto, closed_form and quadrature exist."""
        with pytest.raises(DomainError):
            moments_of(Gaussian(0.0, 1.0), 4, method="series")

    @pytest.mark.parametrize("order", [0, 1, 3, 5])
    def test_odd_order_rejected(self, order):
        """Moment sequences have even order 2n."""
        with pytest.raises(DomainError):
            moments_of(Gaussian(0.0, 1.0), order)


class TestSampling:

    def test_single_draw_is_float(self, rng):
        """size=None returns a scalar."""
        assert isinstance(sample(Gaussian(0.0, 1.0), rng), float)

    def test_gaussian_second_moment(self, rng):
        """Empirical m_2 within 4 SE of 1."""
        x = sample(Gaussian(0.0, 1.0), rng, 100_000)
        assert abs(np.mean(x**2) - 1.0) < 4.0 * np.sqrt(2.0 / 100_000)

    def test_mixture_component_weights(self, rng):
        """Draws below the midpoint track the first component's weight."""
        spec = GaussianMixture([0.3, 0.7], [-50.0, 50.0], [1.0, 1.0])
        x = sample(spec, rng, 100_000)
        share = np.mean(x < 0)
        assert abs(share - 0.3) < 4.0 * np.sqrt(0.21 / 100_000)

    def test_logistic_inverse_cdf(self, rng):
        """Kolmogorov-Smirnov distance below 1.95 / sqrt(n)."""
        spec = GeneralizedLogistic(3.0, location=-2.0)
        x = sample(spec, rng, 100_000)
        statistic = kstest(x, spec.cdf).statistic
        assert statistic < 1.95 / np.sqrt(100_000)

    def test_logistic_extreme_uniforms(self, mocker):
        """Uniform draws at both ends of [0, 1) give finite samples."""
        rng = mocker.Mock(spec=np.random.Generator)
        rng.random.return_value = np.array([0.0, 0.5, 1.0 - 2.0**-53])
        x = GeneralizedLogistic(2.0, location=1.0).draw(rng, 3)
        assert np.all(np.isfinite(x))
        assert x[0] > x[1] > x[2]
        # u = 1/2 is the median loc - log(2^(1/shape) - 1)
        assert x[1] == pytest.approx(1.0 - np.log(np.sqrt(2.0) - 1.0))

    def test_seeded_draws_repeat(self):
        """Identical seeds give identical draws."""
        spec = GeneralizedLogisticMixture([0.4, 0.6], [2.0, 3.0], [0.0, -2.0])
        a = sample(spec, np.random.default_rng(7), 50)
        b = sample(spec, np.random.default_rng(7), 50)
        np.testing.assert_array_equal(a, b)


class TestSerialization:

    def test_round_trip(self, mixture, logistic_mixture):
        """to_dict / density_from_dict preserve every kind."""
        specs = [Gaussian(1.0, 2.0), GeneralizedLogistic(2.0, 0.5), mixture]
        for spec in specs + [logistic_mixture]:
            assert density_from_dict(spec.to_dict()) == spec

    def test_logistic_location_defaults_to_zero(self):
        """location may be omitted."""
        spec = density_from_dict({"kind": "generalized_logistic", "shape": 2.0})
        assert spec.location == 0.0

    @pytest.mark.parametrize(
        "data",
        [
            {"kind": "cauchy", "scale": 1.0},
            {"kind": "gaussian", "mean": 0.0},
            {"kind": "gaussian", "mean": 0.0, "variance": 1.0, "skew": 2.0},
            ["gaussian", 0.0, 1.0],
        ],
    )
    def test_invalid_documents(self, data):
        """Unknown kinds and missing or extra parameters are rejected."""
        with pytest.raises(DomainError):
            density_from_dict(data)
