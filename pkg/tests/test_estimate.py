"""Plug-in nu-hat statistic, BCa bootstrap interval, and the composite rule."""

import math

import numpy as np
import pytest

from nubound.errors import InvalidNuError, TooFewPointsError
from nubound.estimate import (
    BcaInterval,
    CompositeSource,
    SplineConfig,
    StatKind,
    bca_interval,
    composite,
    nu_hat,
)
from nubound.knnmi import KnnConfig, estimate_mi
from nubound.models import GenModel, ModelVariant, gaussian_x_cdf, generate
from nubound.sample import JointSample
from nubound.transforms import known_cdf_map


def gaussian_sample(rho, n, rng):
    x = rng.standard_normal(n)
    z = rho * x + math.sqrt(1 - rho ** 2) * rng.standard_normal(n)
    return JointSample(x, z)


GMAP = known_cdf_map(*gaussian_x_cdf(
    GenModel(ModelVariant.BIVARIATE_NORMAL, sigma_x2=1.0)))


class TestNuHat:
    def test_independence_small_bound(self):
        # under independence the fitted variance is O(edf/n), so the bound
        # should usually be tiny
        bounds = []
        for s in range(60):
            rng = np.random.default_rng([100, s])
            samp = gaussian_sample(0.0, 50, rng)
            r = nu_hat(samp, GMAP)
            if r.bound_nats is not None:
                bounds.append(r.bound_nats)
        assert np.median(bounds) < 0.08

    def test_known_rho_large_sample(self):
        rho = 0.7
        target = -0.5 * math.log(1 - rho ** 2)
        samp = gaussian_sample(rho, 20_000, np.random.default_rng(1))
        r = nu_hat(samp, GMAP)
        assert r.valid
        assert r.bound_nats == pytest.approx(target, abs=0.02)

    def test_noiseless_invalid(self):
        x = np.random.default_rng(2).standard_normal(200)
        samp = JointSample(x, 3.0 * x)
        r = nu_hat(samp, GMAP)
        # z determines x, so fitted variance approaches the known variance 1
        assert r.nu_hat < 0.15
        assert r.bound_nats is None or r.bound_nats > 0.9

    def test_too_few_points(self):
        samp = gaussian_sample(0.3, 14, np.random.default_rng(3))
        with pytest.raises(TooFewPointsError):
            nu_hat(samp, GMAP)

    def test_bits_property(self):
        samp = gaussian_sample(0.6, 500, np.random.default_rng(4))
        r = nu_hat(samp, GMAP)
        assert r.bound_bits == pytest.approx(r.bound_nats / math.log(2))


class TestBcaInterval:
    def test_deterministic_given_seed(self):
        samp = gaussian_sample(0.6, 40, np.random.default_rng(5))
        a = bca_interval(samp, GMAP, B=400, seed=7)
        b = bca_interval(samp, GMAP, B=400, seed=7)
        assert a.lower == b.lower and a.upper == b.upper
        c = bca_interval(samp, GMAP, B=400, seed=8)
        assert c.lower != a.lower

    def test_endpoints_stable_in_B(self):
        samp = gaussian_sample(0.6, 60, np.random.default_rng(6))
        a = bca_interval(samp, GMAP, B=2000, seed=9)
        b = bca_interval(samp, GMAP, B=4000, seed=10)
        assert abs(a.lower - b.lower) < 0.05
        assert abs(a.upper - b.upper) < 0.05

    def test_interval_brackets_point_estimate(self):
        samp = gaussian_sample(0.7, 80, np.random.default_rng(11))
        iv = bca_interval(samp, GMAP, B=600, seed=12)
        assert iv.lower <= iv.theta_hat <= iv.upper

    def test_rejects_bad_arguments(self):
        samp = gaussian_sample(0.5, 40, np.random.default_rng(13))
        with pytest.raises(ValueError):
            bca_interval(samp, GMAP, B=100)
        with pytest.raises(ValueError):
            bca_interval(samp, GMAP, level=0.3)

    def test_invalid_original_statistic_raises(self):
        # seed chosen so the Gaussianized input has sample variance above the
        # known variance 1, making the plug-in nu non-positive
        x = np.random.default_rng(3).standard_normal(100)
        samp = JointSample(x, x.copy())
        with pytest.raises(InvalidNuError):
            bca_interval(samp, GMAP, B=400,
                         statistic=StatKind.SPLINE_NU_KNOWN)

    def test_degenerate_flag_and_warning(self):
        x = np.random.default_rng(14).standard_normal(100)
        samp = JointSample(x, x.copy())
        with pytest.warns(RuntimeWarning):
            iv = bca_interval(samp, GMAP, B=300,
                              statistic=StatKind.SPLINE_NU_KNOWN)
        assert iv.degenerate
        assert iv.invalid_fraction > 0.2

    def test_output_direction_statistic(self):
        samp = gaussian_sample(0.7, 60, np.random.default_rng(15))
        iv = bca_interval(samp, GMAP, B=400, seed=16,
                          statistic=StatKind.SPLINE_NU_OUTPUT)
        assert iv.lower < iv.upper
        assert not iv.degenerate

    def test_correlation_statistic_matches_closed_form(self):
        samp = gaussian_sample(0.8, 200, np.random.default_rng(17))
        iv = bca_interval(samp, GMAP, B=400, seed=18,
                          statistic=StatKind.CORRELATION)
        xt = samp.x  # identity-like map on already-normal input
        r = np.corrcoef(xt, samp.z)[0, 1]
        # theta_hat uses the Gaussianized input, so only check rough agreement
        assert iv.theta_hat == pytest.approx(-0.5 * math.log(1 - r ** 2),
                                             abs=0.1)


class TestComposite:
    def test_value_is_max_of_sources(self):
        for s in range(5):
            samp = gaussian_sample(0.8, 40, np.random.default_rng([19, s]))
            c = composite(samp, GMAP, B=400, seed=s)
            if c.degenerate_fallback:
                assert c.source is CompositeSource.KNN
                continue
            expected = max(c.knn_value, c.ci_lower)
            assert c.value == expected
            if c.ci_lower > c.knn_value:
                assert c.source is CompositeSource.CI_LOWER
            else:
                assert c.source is CompositeSource.KNN

    def test_knn_value_matches_direct_estimate(self):
        samp = gaussian_sample(0.5, 50, np.random.default_rng(20))
        c = composite(samp, GMAP, B=400, seed=21)
        assert c.knn_value == estimate_mi(samp, KnnConfig())

    def test_invalid_nu_falls_back_to_knn(self):
        x = np.random.default_rng(22).standard_normal(80)
        samp = JointSample(x, x.copy())
        c = composite(samp, GMAP, B=400, seed=23,
                      statistic=StatKind.SPLINE_NU_KNOWN)
        assert c.degenerate_fallback
        assert c.source is CompositeSource.KNN
        assert c.value == c.knn_value

    def test_bits_property(self):
        samp = gaussian_sample(0.6, 40, np.random.default_rng(24))
        c = composite(samp, GMAP, B=400, seed=25)
        assert c.value_bits == pytest.approx(c.value / math.log(2))


class TestSplineConfig:
    def test_validates_knot_count(self):
        with pytest.raises(ValueError):
            SplineConfig(knot_count=3)
