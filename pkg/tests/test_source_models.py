import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from binloc.source_models import DiagonalGmm, gaussian_eval, gmm_fit_em, gmm_log_likelihood


def _oracle_pdf_cdf(mean, var, y):
    mpmath.mp.dps = 30
    sd = mpmath.sqrt(var)
    pdf = mpmath.npdf(y, mean, sd)
    cdf = mpmath.quad(lambda t: mpmath.npdf(t, mean, sd), [-mpmath.inf, mean, y])
    return float(pdf), float(cdf)


class TestGaussianEval:
    def test_standard_at_mean(self):
        g = gaussian_eval(0.0, 1.0, 0.0)
        assert g.pdf == pytest.approx(0.3989423, abs=1e-7)
        assert g.cdf == 0.5

    def test_saturation(self):
        assert abs(gaussian_eval(0.0, 1.0, 40.0).cdf - 1.0) < 1e-15

    def test_shifted_scaled(self):
        g = gaussian_eval(2.0, 4.0, 3.0)
        pdf, cdf = _oracle_pdf_cdf(2.0, 4.0, 3.0)
        assert g.pdf == pytest.approx(0.1760327, abs=1e-7)
        assert g.cdf == pytest.approx(0.6914625, abs=1e-7)
        assert abs(g.pdf - pdf) < 1e-12 and abs(g.cdf - cdf) < 1e-12

    @pytest.mark.parametrize("var", [0.0, -1.0])
    def test_rejects_bad_variance(self, var):
        with pytest.raises(ValueError):
            gaussian_eval(0.0, var, 0.0)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(-20, 20), st.floats(0.01, 25), st.floats(-30, 30))
    def test_matches_quadrature(self, mean, var, y):
        g = gaussian_eval(mean, var, y)
        pdf, cdf = _oracle_pdf_cdf(mean, var, y)
        assert abs(g.cdf - cdf) < 1e-12
        assert g.pdf == pytest.approx(pdf, rel=1e-12, abs=1e-300)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-10, 10), st.floats(0.01, 10), st.floats(-20, 20), st.floats(0, 5))
    def test_cdf_monotone(self, mean, var, y, step):
        assert gaussian_eval(mean, var, y).cdf <= gaussian_eval(mean, var, y + step).cdf
        assert 0.0 <= gaussian_eval(mean, var, y).cdf <= 1.0


def _random_gmm(rng, k, d):
    w = rng.random(k) + 0.1
    return DiagonalGmm(w / w.sum(), rng.normal(0, 2, (k, d)), rng.uniform(0.2, 3.0, (k, d)))


class TestGmmLogLikelihood:
    def test_single_component_at_mean(self):
        var = np.array([0.5, 1.0, 2.0, 4.0])
        g = DiagonalGmm(np.ones(1), np.arange(4.0)[None], var[None])
        assert gmm_log_likelihood(g, np.arange(4.0)) == pytest.approx(-0.5 * np.sum(np.log(2 * np.pi * var)), abs=1e-12)

    def test_identical_components_collapse(self):
        rng = np.random.default_rng(0)
        one = _random_gmm(rng, 1, 5)
        two = DiagonalGmm(np.array([0.5, 0.5]), np.repeat(one.means, 2, 0), np.repeat(one.variances, 2, 0))
        y = rng.normal(size=(7, 5))
        np.testing.assert_allclose(gmm_log_likelihood(two, y), gmm_log_likelihood(one, y), atol=1e-12)

    def test_linear_domain_oracle(self):
        rng = np.random.default_rng(1)
        g = _random_gmm(rng, 3, 4)
        for y in rng.normal(size=(10, 4)):
            direct = sum(
                g.weights[k] * math.prod(
                    math.exp(-(y[f] - g.means[k, f]) ** 2 / (2 * g.variances[k, f])) / math.sqrt(2 * math.pi * g.variances[k, f])
                    for f in range(4))
                for k in range(3))
            assert gmm_log_likelihood(g, y) == pytest.approx(math.log(direct), rel=1e-12)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(2)
        g = _random_gmm(rng, 4, 6)
        p = rng.permutation(4)
        h = DiagonalGmm(g.weights[p], g.means[p], g.variances[p])
        y = rng.normal(size=(9, 6))
        np.testing.assert_allclose(gmm_log_likelihood(h, y), gmm_log_likelihood(g, y), atol=1e-12)

    def test_dimension_mismatch(self):
        g = _random_gmm(np.random.default_rng(0), 2, 3)
        with pytest.raises(ValueError):
            gmm_log_likelihood(g, np.zeros(4))

    def test_far_frame_stays_finite(self):
        g = _random_gmm(np.random.default_rng(0), 2, 3)
        assert np.isfinite(gmm_log_likelihood(g, np.full(3, 1e3)))


class TestDiagonalGmmValidation:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            DiagonalGmm(np.array([0.5, 0.6]), np.zeros((2, 2)), np.ones((2, 2)))

    def test_variance_positive(self):
        with pytest.raises(ValueError):
            DiagonalGmm(np.ones(1), np.zeros((1, 2)), np.array([[1.0, 0.0]]))

    def test_shapes(self):
        with pytest.raises(ValueError):
            DiagonalGmm(np.ones(1), np.zeros((1, 2)), np.ones((1, 3)))


class TestEm:
    def test_single_gaussian(self):
        rng = np.random.default_rng(0)
        data = rng.normal([1.0, -2.0, 3.0], [1.0, 0.5, 2.0], size=(2000, 3))
        g = gmm_fit_em(data, 1)
        se = data.std(0) / np.sqrt(data.shape[0])
        assert np.all(np.abs(g.means[0] - data.mean(0)) < 3 * se)
        np.testing.assert_allclose(g.variances[0], data.var(0), rtol=1e-6)

    def test_two_clusters(self):
        rng = np.random.default_rng(1)
        a = rng.normal(-5, 1, size=(5000, 2))
        b = rng.normal(5, 1, size=(5000, 2))
        g = gmm_fit_em(np.vstack([a, b]), 2, seed=3)
        order = np.argsort(g.means[:, 0])
        np.testing.assert_allclose(g.means[order[0]], a.mean(0), atol=0.1)
        np.testing.assert_allclose(g.means[order[1]], b.mean(0), atol=0.1)
        np.testing.assert_allclose(g.weights, 0.5, atol=0.02)

    @pytest.mark.parametrize("seed", range(4))
    def test_monotone_likelihood(self, seed):
        rng = np.random.default_rng(seed)
        centres = rng.normal(0, 3, size=(5, 4))
        data = centres[rng.integers(0, 5, 1500)] + rng.normal(size=(1500, 4)) * rng.uniform(0.3, 2, 4)
        g, trace = gmm_fit_em(data, 4, seed=seed, return_trace=True)
        ll = np.array(trace.log_likelihood)
        assert np.all(np.diff(ll) >= -1e-9 * np.abs(ll[1:]))
        assert np.all(g.variances >= 1e-3)

    def test_variance_floor(self):
        data = np.zeros((100, 3))
        data[:, 0] = np.random.default_rng(0).normal(size=100)
        g = gmm_fit_em(data, 2)
        assert np.all(g.variances >= 1e-3)

    def test_deterministic(self):
        data = np.random.default_rng(4).normal(size=(500, 3))
        a, b = gmm_fit_em(data, 3, seed=9), gmm_fit_em(data, 3, seed=9)
        assert np.array_equal(a.means, b.means) and np.array_equal(a.variances, b.variances)

    def test_needs_ten_frames_per_component(self):
        with pytest.raises(ValueError):
            gmm_fit_em(np.zeros((19, 2)), 2)

    def test_duplicate_points_do_not_break(self):
        data = np.vstack([np.zeros((60, 2)), np.ones((60, 2))])
        g = gmm_fit_em(data, 4)
        assert np.all(np.isfinite(g.means)) and np.isclose(g.weights.sum(), 1.0)


class TestSerialisation:
    def test_json_round_trip_lossless(self, tmp_path):
        g = _random_gmm(np.random.default_rng(0), 3, 32)
        g = DiagonalGmm(g.weights, g.means, g.variances, label="alarm")
        path = tmp_path / "m.json"
        g.save(path)
        h = DiagonalGmm.load(path)
        assert h.label == "alarm"
        assert np.array_equal(g.weights, h.weights)
        assert np.array_equal(g.means, h.means)
        assert np.array_equal(g.variances, h.variances)
        doc = json.loads(path.read_text())
        assert {"version", "label", "K", "dim", "weights", "means", "variances"} <= set(doc)
        assert doc["K"] == 3 and doc["dim"] == 32

    def test_rejects_unknown_version(self, tmp_path):
        g = _random_gmm(np.random.default_rng(0), 1, 2)
        doc = g.to_dict()
        doc["version"] = 99
        with pytest.raises(ValueError):
            DiagonalGmm.from_dict(doc)
