"""Cubic smoothing spline: basis, penalty, CV, prediction, batch path."""

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.interpolate import BSpline

from nubound import spline
from nubound.errors import RankDeficientError


def make_knot_vector(interior, lo, hi):
    return np.concatenate([np.repeat(lo, 4), np.asarray(interior), np.repeat(hi, 4)])


class TestBasis:
    @pytest.mark.parametrize("deriv", [0, 1, 2])
    def test_matches_scipy_bspline(self, deriv):
        rng = np.random.default_rng(0)
        interior = np.sort(rng.uniform(0.1, 0.9, 6))
        t = make_knot_vector(interior, 0.0, 1.0)
        x = rng.uniform(0.0, 1.0, 200)
        ours = spline.bspline_design(x, t, deriv=deriv)
        m = t.size - 4
        for j in range(m):
            c = np.zeros(m)
            c[j] = 1.0
            ref = BSpline(t, c, 3)(x, nu=deriv)
            assert np.max(np.abs(ours[:, j] - ref)) < 1e-12

    def test_partition_of_unity(self):
        rng = np.random.default_rng(1)
        t = make_knot_vector(np.sort(rng.uniform(0.2, 0.8, 5)), 0.0, 1.0)
        x = np.linspace(0.0, 1.0, 101)
        b = spline.bspline_design(x, t)
        assert np.allclose(b.sum(axis=1), 1.0, atol=1e-12)

    def test_right_endpoint_included(self):
        t = make_knot_vector([0.5], 0.0, 1.0)
        b = spline.bspline_design(np.array([1.0]), t)
        assert np.allclose(b.sum(), 1.0, atol=1e-12)


class TestPenalty:
    def test_matches_quadrature_oracle(self):
        rng = np.random.default_rng(2)
        interior = np.sort(rng.uniform(0.1, 0.9, 4))
        t = make_knot_vector(interior, 0.0, 1.0)
        omega = spline.penalty_matrix(t)
        m = t.size - 4
        for i in range(m):
            for j in range(i, m):
                ci = np.zeros(m); ci[i] = 1.0
                cj = np.zeros(m); cj[j] = 1.0
                fi = BSpline(t, ci, 3)
                fj = BSpline(t, cj, 3)
                val = 0.0
                breaks = np.unique(t)
                for a, b in zip(breaks[:-1], breaks[1:]):
                    q, _ = quad(lambda u: fi(u, nu=2) * fj(u, nu=2), a, b)
                    val += q
                assert omega[i, j] == pytest.approx(val, abs=1e-10)

    def test_linear_functions_in_null_space(self):
        t = make_knot_vector([0.3, 0.6], 0.0, 1.0)
        omega = spline.penalty_matrix(t)
        # coefficients reproducing a linear function: Greville abscissae
        m = t.size - 4
        grev = np.array([t[j + 1:j + 4].mean() for j in range(m)])
        for coef in (np.ones(m), grev):
            assert float(coef @ omega @ coef) == pytest.approx(0.0, abs=1e-12)


class TestFit:
    def test_linear_exactness(self):
        rng = np.random.default_rng(3)
        z = rng.uniform(-2.0, 3.0, 80)
        y = 1.5 - 0.7 * z
        f = spline.fit(z, y, knot_count=10)
        assert np.max(np.abs(f.fitted - y)) < 1e-8

    def test_interpolation_limit_small_lambda(self):
        # needs as many basis functions as data points (n = knot_count + 4)
        # and evenly spaced predictors so the penalty scale stays moderate
        z = np.linspace(0.0, 1.0, 14)
        y = np.sin(5.0 * z)
        f = spline.fit(z, y, knot_count=10, lambda_grid=[1e-12])
        assert np.max(np.abs(f.fitted - y)) < 1e-6

    def test_cv_argmin_property(self):
        rng = np.random.default_rng(4)
        z = rng.uniform(0.0, 1.0, 60)
        y = np.sin(6.0 * z) + 0.3 * rng.standard_normal(60)
        f = spline.fit(z, y, knot_count=10)
        i = int(np.argmin(f.cv_scores))
        assert f.lam == pytest.approx(f.lambda_grid[i])
        assert f.cv_scores[i] <= f.cv_scores.min() + 1e-15

    def test_edf_monotone_in_lambda(self):
        rng = np.random.default_rng(5)
        z = rng.uniform(0.0, 1.0, 60)
        y = np.sin(6.0 * z) + 0.3 * rng.standard_normal(60)
        traces = [spline.fit(z, y, knot_count=10, lambda_grid=[lam]).hat_trace
                  for lam in (1e-6, 1e-3, 1.0, 1e3)]
        assert all(a > b for a, b in zip(traces[:-1], traces[1:]))
        f = spline.fit(z, y, knot_count=10)
        assert 2.0 <= f.hat_trace <= 14.0 + 1e-9

    def test_shift_equivariance(self):
        rng = np.random.default_rng(6)
        z = rng.uniform(0.0, 1.0, 50)
        y = np.cos(4.0 * z) + 0.2 * rng.standard_normal(50)
        f0 = spline.fit(z, y, knot_count=8, lambda_grid=[0.01])
        f1 = spline.fit(z, y + 5.0, knot_count=8, lambda_grid=[0.01])
        assert np.allclose(f1.fitted, f0.fitted + 5.0, atol=1e-9)

    def test_fitted_variance_never_exceeds_response_variance(self):
        rng = np.random.default_rng(7)
        for trial in range(50):
            n = int(rng.integers(16, 60))
            z = rng.standard_normal(n)
            y = rng.standard_normal(n) + z * rng.uniform(-2, 2)
            f = spline.fit(z, y, knot_count=10)
            assert np.var(f.fitted, ddof=1) <= np.var(y, ddof=1) + 1e-10

    def test_rank_deficient_errors(self):
        z = np.repeat([0.0, 1.0, 2.0], 10)
        y = np.random.default_rng(8).standard_normal(30)
        with pytest.raises(RankDeficientError):
            spline.fit(z, y, knot_count=10)

    def test_mixture_fit_is_sigmoidal(self):
        from nubound.models import GenModel, ModelVariant, generate, mixture_x_cdf
        from nubound.transforms import gaussianize, known_cdf_map
        model = GenModel(ModelVariant.MIXTURE, beta=1.0, sigma_eps2=1.0)
        cdf, ppf = mixture_x_cdf(model)
        s = generate(model, 200, np.random.default_rng(9))
        xt = gaussianize(s.x, known_cdf_map(cdf, ppf))
        f = spline.fit(s.z, xt, knot_count=10)
        mids = 0.5 * (f.knots[:-1] + f.knots[1:])
        vals = spline.predict(f, mids)
        assert np.all(np.diff(vals) > -1e-6)

        # kernel-regression oracle of the conditional mean on a large sample
        big = generate(model, 100_000, np.random.default_rng(10))
        bxt = gaussianize(big.x, known_cdf_map(cdf, ppf))
        h = 0.6
        oracle = np.array([
            np.average(bxt, weights=np.exp(-0.5 * ((big.z - zm) / h) ** 2))
            for zm in mids])
        assert np.corrcoef(vals, oracle)[0, 1] > 0.98


class TestPredict:
    def test_reproduces_training_fits(self):
        rng = np.random.default_rng(11)
        z = rng.uniform(0.0, 1.0, 40)
        y = np.sin(3 * z) + 0.1 * rng.standard_normal(40)
        f = spline.fit(z, y, knot_count=8)
        assert np.max(np.abs(spline.predict(f, z) - f.fitted)) < 1e-12

    def test_linear_extrapolation(self):
        rng = np.random.default_rng(12)
        z = rng.uniform(0.0, 1.0, 40)
        y = np.sin(3 * z)
        f = spline.fit(z, y, knot_count=8)
        left = spline.predict(f, np.linspace(-3.0, -1.0, 9))
        right = spline.predict(f, np.linspace(2.0, 4.0, 9))
        for v in (left, right):
            assert np.max(np.abs(np.diff(v, n=2))) < 1e-9

    def test_mirror_equivariance(self):
        rng = np.random.default_rng(13)
        z = rng.uniform(-1.0, 1.0, 50)
        y = np.tanh(2 * z) + 0.1 * rng.standard_normal(50)
        f_pos = spline.fit(z, y, knot_count=8, lambda_grid=[0.01])
        f_neg = spline.fit(-z, -y, knot_count=8, lambda_grid=[0.01])
        grid = np.linspace(-1.5, 1.5, 31)
        assert np.allclose(spline.predict(f_pos, grid),
                           -spline.predict(f_neg, -grid), atol=1e-9)

    def test_coefficient_dump(self, tmp_path):
        rng = np.random.default_rng(14)
        z = rng.uniform(0.0, 1.0, 30)
        f = spline.fit(z, np.sin(z), knot_count=6)
        path = tmp_path / "coef.txt"
        spline.dump_coefficients(f, path)
        assert path.read_text().strip()


class TestBatch:
    def test_matches_single_fit_at_fixed_lambda(self):
        rng = np.random.default_rng(15)
        lam = 0.05
        z2 = rng.standard_normal((8, 30))
        y2 = np.sin(z2) + 0.2 * rng.standard_normal((8, 30))
        batch = spline.batched_fitted_values(z2, y2, lam, knot_count=8)
        for b in range(8):
            f = spline.fit(z2[b], y2[b], knot_count=8, lambda_grid=[lam])
            assert np.max(np.abs(batch[b] - f.fitted)) < 1e-8

    def test_valid_knot_rows(self):
        z2 = np.array([[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
                       [1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0]])
        ok = spline.valid_knot_rows(z2, knot_count=5)
        assert ok.tolist() == [True, False]

    def test_bootstrap_resamples_have_no_nans(self):
        rng = np.random.default_rng(16)
        z = rng.standard_normal(25)
        y = np.tanh(z) + 0.3 * rng.standard_normal(25)
        idx = rng.integers(0, 25, size=(500, 25))
        ok = spline.valid_knot_rows(z[idx], 10)
        fitted = spline.batched_fitted_values(z[idx[ok]], y[idx[ok]], 0.1,
                                              knot_count=10)
        assert np.all(np.isfinite(fitted))
        fv = np.var(fitted, axis=1, ddof=1)
        yv = np.var(y[idx[ok]], axis=1, ddof=1)
        assert np.all(fv <= yv + 1e-9)
