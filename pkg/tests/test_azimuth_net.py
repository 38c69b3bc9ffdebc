import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from binloc import azimuth_net as an
from binloc.azimuth_net import BandMlp, TrainConfig
from helpers import max_relative_error, numeric_grads, tiny_net


class TestNormalize:
    def test_mean_maps_to_zero(self):
        mean, std = np.arange(34.0), np.full(34, 2.0)
        np.testing.assert_array_equal(an.normalize_input(mean, mean, std), np.zeros(34))

    def test_identity(self):
        x = np.random.default_rng(0).normal(size=34)
        np.testing.assert_array_equal(an.normalize_input(x, np.zeros(34), np.ones(34)), x)

    def test_training_set_is_standardised(self):
        x = np.random.default_rng(1).normal(3, 5, size=(1000, 34))
        z = an.normalize_input(x, *an.normalization_stats(x))
        assert np.all(np.abs(z.mean(0)) < 1e-9)
        assert np.all(np.abs(z.std(0) - 1) < 1e-6)

    def test_constant_dimension_floored(self):
        x = np.ones((10, 34))
        mean, std = an.normalization_stats(x)
        assert np.all(std == an.STD_FLOOR)
        assert np.all(np.isfinite(an.normalize_input(x, mean, std)))


class TestForward:
    def test_zero_network_uniform(self):
        mlp = an.init_mlp([34, 128, 128, 72], np.random.default_rng(0))
        for w in mlp.weights:
            w[:] = 0
        np.testing.assert_array_equal(an.forward(mlp, np.ones(34)), np.full(72, 1 / 72))

    def test_output_bias_shift_invariance(self):
        mlp = tiny_net(np.random.default_rng(1), (34, 16, 16, 72))
        z = np.random.default_rng(2).normal(size=(5, 34))
        before = an.forward(mlp, z)
        mlp.biases[-1] += 3.7
        np.testing.assert_allclose(an.forward(mlp, z), before, atol=1e-15)

    def test_hand_computed_2_3_2(self):
        w1 = np.array([[0.1, -0.2, 0.3], [0.4, 0.5, -0.6]])
        b1 = np.array([0.01, -0.02, 0.03])
        w2 = np.array([[0.7, -0.8], [0.9, 1.0], [-1.1, 1.2]])
        b2 = np.array([0.05, -0.05])
        mlp = BandMlp([w1, w2], [b1, b2], np.zeros(2), np.ones(2))
        x = [0.5, -1.5]
        # scalar arithmetic, unit by unit
        import math
        sig = lambda v: 1.0 / (1.0 + math.exp(-v))  # noqa: E731
        h = [sig(x[0] * w1[0, j] + x[1] * w1[1, j] + b1[j]) for j in range(3)]
        o = [sum(h[j] * w2[j, k] for j in range(3)) + b2[k] for k in range(2)]
        e = [math.exp(v - max(o)) for v in o]
        expected = [v / sum(e) for v in e]
        np.testing.assert_allclose(an.forward(mlp, np.array(x)), expected, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31), st.floats(-1e3, 1e3))
    def test_sums_to_one(self, seed, scale):
        rng = np.random.default_rng(seed)
        mlp = tiny_net(rng, (34, 8, 8, 72))
        p = an.forward(mlp, scale * rng.normal(size=(4, 34)))
        assert np.all(np.isfinite(p))
        np.testing.assert_allclose(p.sum(-1), 1.0, atol=1e-6)

    def test_class_permutation_equivariance(self):
        rng = np.random.default_rng(3)
        mlp = tiny_net(rng, (34, 8, 8, 72))
        perm = rng.permutation(72)
        z = rng.normal(size=(3, 34))
        permuted = BandMlp([w.copy() for w in mlp.weights[:-1]] + [mlp.weights[-1][:, perm]],
                           [b.copy() for b in mlp.biases[:-1]] + [mlp.biases[-1][perm]],
                           mlp.norm_mean, mlp.norm_std)
        np.testing.assert_allclose(an.forward(permuted, z), an.forward(mlp, z)[:, perm], atol=1e-15)


class TestGradients:
    @pytest.mark.parametrize("seed", range(3))
    def test_central_differences(self, seed):
        rng = np.random.default_rng(seed)
        mlp = tiny_net(rng)
        z = rng.normal(size=(6, 3))
        labels = rng.integers(0, 3, 6)
        _, analytic = an.loss_and_grads(mlp, z, labels)
        assert max_relative_error(analytic, numeric_grads(mlp, z, labels)) < 1e-4

    def test_loss_is_cross_entropy(self):
        rng = np.random.default_rng(4)
        mlp = tiny_net(rng)
        z = rng.normal(size=(5, 3))
        labels = rng.integers(0, 3, 5)
        loss, _ = an.loss_and_grads(mlp, z, labels)
        p = an.forward(mlp, z)
        assert loss == pytest.approx(-np.mean(np.log(p[np.arange(5), labels])), rel=1e-12)


def blobs(rng, n=600, d=34):
    labels = rng.integers(0, 2, n)
    centres = np.stack([np.full(d, -1.5), np.full(d, 1.5)])
    return centres[labels] + rng.normal(size=(n, d)), labels


class TestTraining:
    def test_separable_blobs(self):
        x, y = blobs(np.random.default_rng(0))
        mlp = an.train_band(x, y, TrainConfig(epochs=10, holdout_fraction=0.2), seed=1, n_classes=2, hidden=(16, 16))
        assert mlp.metadata["holdout_accuracy"] >= 0.99

    def test_loss_decreases(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(2000, 34))
        y = (x[:, 0] + 0.5 * x[:, 1] > 0).astype(int) + 2 * (x[:, 2] > 0)
        mlp = an.train_band(x, y, TrainConfig(epochs=5), seed=0, n_classes=4, hidden=(32, 32))
        loss = mlp.metadata["epoch_loss"]
        assert loss[-1] < loss[0]
        assert np.mean(loss[3:]) < np.mean(loss[:2])

    def test_deterministic(self):
        x, y = blobs(np.random.default_rng(3), n=300)
        a = an.train_band(x, y, TrainConfig(epochs=2), seed=5, n_classes=2, hidden=(8, 8))
        b = an.train_band(x, y, TrainConfig(epochs=2), seed=5, n_classes=2, hidden=(8, 8))
        for p, q in zip(a.params(), b.params()):
            assert np.array_equal(p, q)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            an.train_band(np.zeros((0, 34)), np.zeros(0, int))

    def test_rejects_single_class(self):
        with pytest.raises(ValueError):
            an.train_band(np.zeros((10, 34)), np.zeros(10, int))


class TestBundle:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        mlps = []
        for band in range(3):
            m = an.init_mlp([34, 128, 128, 72], rng, band)
            m.norm_mean = rng.normal(size=34)
            m.norm_std = rng.uniform(0.5, 2, 34)
            mlps.append(m)
        an.save_bundle(tmp_path / "dnn", mlps)
        back = an.load_bundle(tmp_path / "dnn")
        assert len(back) == 3
        for a, b in zip(mlps, back):
            assert a.band_index == b.band_index
            assert np.array_equal(a.norm_mean, b.norm_mean) and np.array_equal(a.norm_std, b.norm_std)
            for p, q in zip(a.params(), b.params()):
                assert np.array_equal(p, q)
        feats = rng.normal(size=(4, 3, 34))
        np.testing.assert_array_equal(an.band_posteriors(back, feats), an.band_posteriors(mlps, feats))

    def test_missing(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            an.load_bundle(tmp_path / "nope")

    def test_truncated_file(self, tmp_path):
        m = an.init_mlp([34, 8, 72], np.random.default_rng(0))
        an.save_bundle(tmp_path, [m])
        path = tmp_path / "band_00.bin"
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ValueError):
            an.load_bundle(tmp_path)
