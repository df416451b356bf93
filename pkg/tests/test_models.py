"""Generative models, parameter samplers and ground-truth MI oracles."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from nubound.bounds import bound_from_nu, nu_from_moments
from nubound.errors import NonConvergenceError
from nubound.models import (
    GenModel,
    ModelVariant,
    TruthMethod,
    discrete_nu_zx,
    gaussian_x_cdf,
    generate,
    input_entropy_bits,
    mixture_population_moments,
    mixture_x_cdf,
    sample_params,
    true_mi,
    z_marginal_logpdf,
)

LOG2 = math.log(2.0)


class TestGenerate:
    def test_gaussian_sample_correlation(self):
        model = GenModel(ModelVariant.BIVARIATE_NORMAL, beta=2.0,
                         sigma_eps2=0.5, sigma_x2=1.5)
        n = 100_000
        s = generate(model, n, np.random.default_rng(0))
        target = (model.beta * math.sqrt(model.sigma_x2)
                  / math.sqrt(model.beta ** 2 * model.sigma_x2 + model.sigma_eps2))
        assert np.corrcoef(s.x, s.z)[0, 1] == pytest.approx(target, abs=4 / math.sqrt(n))

    def test_mixture_mean_symmetric(self):
        model = GenModel(ModelVariant.MIXTURE, beta=1.0, sigma_eps2=1.0)
        n = 50_000
        s = generate(model, n, np.random.default_rng(1))
        assert abs(np.mean(s.x)) < 4 * np.std(s.x) / math.sqrt(n)

    def test_discrete_support_frequencies(self):
        model = GenModel(ModelVariant.DISCRETE_INPUT, support=(0.0, 2.0, 4.0),
                         cond_sd=0.1)
        n = 30_000
        s = generate(model, n, np.random.default_rng(2))
        for v in model.support:
            freq = np.mean(np.isclose(s.x, v))
            p = 1.0 / 3.0
            assert abs(freq - p) < 4 * math.sqrt(p * (1 - p) / n)

    def test_determinism(self):
        model = GenModel(ModelVariant.MIXTURE, beta=1.0, sigma_eps2=1.0)
        a = generate(model, 100, np.random.default_rng(3))
        b = generate(model, 100, np.random.default_rng(3))
        assert np.array_equal(a.x, b.x) and np.array_equal(a.z, b.z)


class TestSampleParams:
    def test_gaussian_ranges(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            m = sample_params(ModelVariant.BIVARIATE_NORMAL, rng)
            assert 1.0 <= m.beta <= 10.0
            assert 1e-2 <= m.sigma_eps2 <= 1e2
            assert 1e-2 <= m.sigma_x2 <= 1e2

    def test_mixture_ranges_and_defaults(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            m = sample_params(ModelVariant.MIXTURE, rng)
            assert 1e-1 <= m.beta <= 1e1
            assert 10 ** -2.5 <= m.sigma_eps2 <= 10 ** 2.5
            assert m.mu1 == 5.0 and m.mu2 == -5.0
            assert m.sigma1_2 == m.sigma2_2 == 25.0 / 4.0


class TestTruth:
    def test_gaussian_closed_form(self):
        m = GenModel(ModelVariant.BIVARIATE_NORMAL, beta=1.0, sigma_eps2=1.0,
                     sigma_x2=1.0)
        t = true_mi(m)
        assert t.method is TruthMethod.CLOSED_FORM
        assert t.mi_nats == pytest.approx(0.5 * math.log(2.0), rel=1e-14)

    def test_gaussian_sharpness_of_nu_bound(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            m = sample_params(ModelVariant.BIVARIATE_NORMAL, rng)
            total = np.array([[m.beta ** 2 * m.sigma_x2 + m.sigma_eps2]])
            cond = np.array([[m.sigma_eps2]])
            bound = bound_from_nu(nu_from_moments(total, cond))
            assert bound.nats == pytest.approx(true_mi(m).mi_nats, rel=1e-10)

    def test_mixture_truth_vs_quadrature_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            m = sample_params(ModelVariant.MIXTURE, rng)
            t = true_mi(m, mc_draws=100_000, rng=rng)

            def density(zv):
                return math.exp(z_marginal_logpdf(m, np.array([zv]))[0])

            sd = math.sqrt(m.beta ** 2 * 25.0 / 4.0 + m.sigma_eps2)
            lo = -m.beta * 5 - 10 * sd
            hi = m.beta * 5 + 10 * sd
            h_z, _ = quad(lambda zv: -density(zv) * z_marginal_logpdf(
                m, np.array([zv]))[0], lo, hi, limit=300)
            oracle = h_z - 0.5 * math.log(2 * math.pi * math.e * m.sigma_eps2)
            assert t.mi_nats == pytest.approx(oracle, abs=3 * t.mc_stderr + 1e-9)

    def test_mixture_seed_spread_small(self):
        m = GenModel(ModelVariant.MIXTURE, beta=2.0, sigma_eps2=1.0)
        vals = [true_mi(m, rng=np.random.default_rng(s)).mi_bits
                for s in range(6)]
        assert max(vals) - min(vals) < 0.01

    def test_requires_enough_draws(self):
        m = GenModel(ModelVariant.MIXTURE, beta=1.0, sigma_eps2=1.0)
        with pytest.raises(ValueError):
            true_mi(m, mc_draws=1000)


class TestDiscreteModel:
    def test_population_nu_closed_form(self):
        m = GenModel(ModelVariant.DISCRETE_INPUT, support=(-1.0, 1.0),
                     cond_sd=0.5)
        # V[X] = 1, cond var = 0.25 -> nu = 0.25 / 1.25
        assert discrete_nu_zx(m) == pytest.approx(0.2, rel=1e-12)

    def test_entropy_bits(self):
        m = GenModel(ModelVariant.DISCRETE_INPUT, support=(0.0, 2.0),
                     cond_sd=0.1)
        assert input_entropy_bits(m) == pytest.approx(1.0, rel=1e-12)

    def test_noise_dominates_limit(self):
        m = GenModel(ModelVariant.DISCRETE_INPUT, support=(0.0, 2.0),
                     cond_sd=50.0)
        t = true_mi(m, rng=np.random.default_rng(8))
        assert t.mi_bits < 0.01


class TestPopulationMoments:
    def test_mixture_bound_chain(self):
        m = GenModel(ModelVariant.MIXTURE, beta=1.0, sigma_eps2=1.0)
        mom = mixture_population_moments(m, mc_draws=300_000,
                                         rng=np.random.default_rng(9))
        t = true_mi(m, rng=np.random.default_rng(10))
        slack = 3 * (mom["nu_bound_se"] + t.mc_stderr)
        assert t.mi_nats >= mom["nu_bound_nats"] - slack
        assert mom["nu_bound_nats"] >= mom["corr_bound_nats"] - 3 * (
            mom["nu_bound_se"] + mom["corr_bound_se"])

    def test_cdf_ppf_round_trip(self):
        m = GenModel(ModelVariant.MIXTURE, beta=1.0, sigma_eps2=1.0)
        cdf, ppf = mixture_x_cdf(m)
        x = np.linspace(-12, 12, 25)
        assert np.max(np.abs(ppf(cdf(x)) - x)) < 1e-8
        g_cdf, g_ppf = gaussian_x_cdf(GenModel(ModelVariant.BIVARIATE_NORMAL,
                                               sigma_x2=4.0))
        # at six sigma the cdf saturates near 1, costing round-trip precision
        assert np.max(np.abs(g_ppf(g_cdf(x)) - x)) < 1e-6


class TestValidation:
    def test_rejects_bad_params(self):
        with pytest.raises(ValueError):
            GenModel(ModelVariant.BIVARIATE_NORMAL, sigma_x2=-1.0)
        with pytest.raises(ValueError):
            GenModel(ModelVariant.MIXTURE, sigma_eps2=0.0)
        with pytest.raises(ValueError):
            GenModel(ModelVariant.DISCRETE_INPUT, support=(0.0, 1.0),
                     cond_sd=-0.1)
