import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from binloc import localizer as lz


def random_posteriors(rng, shape):
    p = rng.random(shape + (72,)) + 1e-3
    return p / p.sum(-1, keepdims=True)


def point_mass(az):
    p = np.zeros(72)
    p[int(az) // 5] = 1.0
    return p


class TestFuseFrame:
    def test_zero_weights_uniform(self):
        post = random_posteriors(np.random.default_rng(0), (32,))
        np.testing.assert_allclose(lz.fuse_frame(post, np.zeros(32)), 1 / 72, atol=1e-15)

    def test_single_band(self):
        post = random_posteriors(np.random.default_rng(1), (32,))
        w = np.zeros(32)
        w[7] = 1.0
        np.testing.assert_allclose(lz.fuse_frame(post, w), post[7], atol=1e-12)

    def test_two_bands_product(self):
        rng = np.random.default_rng(2)
        post = random_posteriors(rng, (32,))
        w = np.zeros(32)
        w[[3, 20]] = 1.0
        expected = post[3] * post[20]
        np.testing.assert_allclose(lz.fuse_frame(post, w), expected / expected.sum(), rtol=1e-10)

    def test_floor_keeps_frame_alive(self):
        post = np.zeros((2, 72))
        post[0, 10] = 1.0
        post[1, 20] = 1.0
        out = lz.fuse_frame(post, np.ones(2))
        assert np.all(np.isfinite(out)) and out.sum() == pytest.approx(1.0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31), st.floats(0.01, 100.0))
    def test_invariants(self, seed, scale):
        rng = np.random.default_rng(seed)
        post = random_posteriors(rng, (32,))
        w = rng.random(32)
        out = lz.fuse_frame(post, w)
        assert abs(out.sum() - 1.0) < 1e-9
        # a constant factor in one band's posterior cancels in the normalisation
        shifted = post.copy()
        shifted[5] *= 3.0
        np.testing.assert_allclose(lz.fuse_frame(shifted, w), out, rtol=1e-9)
        assert np.argmax(lz.fuse_frame(post, scale * w)) == np.argmax(out)

    def test_batch_matches_single(self):
        rng = np.random.default_rng(3)
        post = random_posteriors(rng, (5, 32))
        w = rng.random((5, 32))
        batch = lz.fuse_frames(post, w)
        for t in range(5):
            np.testing.assert_allclose(batch[t], lz.fuse_frame(post[t], w[t]), atol=1e-15)


class TestFuseSegment:
    def test_identity(self):
        p = random_posteriors(np.random.default_rng(0), (1,))
        np.testing.assert_array_equal(lz.fuse_segment(p), p[0])

    def test_bimodal(self):
        out = lz.fuse_segment(np.stack([point_mass(30), point_mass(60)]))
        assert out[6] == 0.5 and out[12] == 0.5

    def test_average_and_permutation(self):
        rng = np.random.default_rng(1)
        p = random_posteriors(rng, (9,))
        np.testing.assert_allclose(lz.fuse_segment(p), p.sum(0) / 9, atol=1e-15)
        np.testing.assert_allclose(lz.fuse_segment(p[rng.permutation(9)]), lz.fuse_segment(p), atol=1e-15)

    def test_empty(self):
        with pytest.raises(ValueError):
            lz.fuse_segment(np.zeros((0, 72)))


class TestPick:
    def test_unimodal(self):
        p = np.exp(-0.5 * ((np.arange(72) - 7) / 2.0) ** 2)
        assert lz.pick_azimuths(p / p.sum(), 1) == [35.0]

    def test_bimodal_wraparound(self):
        p = np.full(72, 1e-3)
        p[6] = 0.4
        p[66] = 0.3
        assert lz.pick_azimuths(p, 2) == [30.0, 330.0]

    def test_suppresses_neighbours(self):
        p = np.full(72, 1e-3)
        p[10], p[11], p[40] = 0.5, 0.45, 0.2
        assert lz.pick_azimuths(p, 2, min_separation=10) == [50.0, 200.0]

    def test_tie_goes_to_lower_index(self):
        p = np.full(72, 1.0)
        assert lz.pick_azimuths(p, 1) == [0.0]

    def test_padding_when_everything_suppressed(self):
        p = np.random.default_rng(0).random(72)
        out = lz.pick_azimuths(p, 5, min_separation=180)
        assert len(out) == 5 and len(set(out)) == 5

    def test_rejects_zero_sources(self):
        with pytest.raises(ValueError):
            lz.pick_azimuths(np.ones(72), 0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31), st.integers(1, 4))
    def test_separation(self, seed, n):
        p = np.random.default_rng(seed).random(72)
        est = lz.pick_azimuths(p, n, 10)
        assert est == sorted(est)
        for i in range(len(est)):
            for j in range(i + 1, len(est)):
                assert lz.circular_distance(est[i], est[j]) >= 10


class TestGrace:
    def test_boundary_inclusive(self):
        assert lz.grace_match([30.0], 35.0).hit

    def test_front_back(self):
        r = lz.grace_match([150.0], 30.0)
        assert not r.hit and r.front_back

    def test_wraparound(self):
        assert lz.grace_match([355.0], 0.0).hit
        assert lz.grace_match([355.0], -5.0 % 360).hit

    def test_plain_miss(self):
        r = lz.grace_match([90.0], 30.0)
        assert not r.hit and not r.front_back

    def test_any_estimate_counts(self):
        assert lz.grace_match([200.0, 40.0], 45.0).hit

    def test_hit_is_never_front_back(self):
        # at 90 degrees the mirror coincides with the source
        r = lz.grace_match([90.0], 90.0)
        assert r.hit and not r.front_back

    def test_mirror(self):
        assert lz.front_back_mirror(30.0) == 150.0
        assert lz.front_back_mirror(-30.0 % 360) == 210.0


class TestLocalise:
    def test_end_to_end_point_masses(self):
        rng = np.random.default_rng(0)
        post = random_posteriors(rng, (10, 32)) * 0.01
        post[:, :, 8] += 1.0
        post /= post.sum(-1, keepdims=True)
        res = lz.localise(post, n_sources=1)
        assert res.estimates == [40.0]
        assert res.frame_posteriors.shape == (10, 72)
        assert res.posterior.sum() == pytest.approx(1.0)

    def test_weights_select_bands(self):
        post = np.full((4, 2, 72), 1e-3)
        post[:, 0, 2] = 1.0
        post[:, 1, 50] = 1.0
        post /= post.sum(-1, keepdims=True)
        w = np.zeros((4, 2))
        w[:, 1] = 1.0
        assert lz.localise(post, w).estimates == [250.0]
