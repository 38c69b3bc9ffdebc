import numpy as np
import pytest

from binloc.frontend import AudioBuffer, analyze
from binloc.sim import generators as gen
from binloc.sim.reverb import ROOM_PRESETS, parametric_reverb, reverb_tails, room, schroeder_t60
from binloc.sim.scene import SceneSpec, SourceSpec, match_length, mix_at_tmr, render_scene, rms
from binloc.wavio import WavFormatError, read_wav, write_wav

FS = 16000


class TestGenerators:
    @pytest.mark.parametrize("gid", gen.generator_ids())
    def test_deterministic_and_scaled(self, gid):
        a = gen.generate(gid, 1.0, 7)
        b = gen.generate(gid, 1.0, 7)
        assert np.array_equal(a, b)
        assert a.shape == (FS,)
        assert np.all(np.isfinite(a))
        assert rms(a) == pytest.approx(gen.NOMINAL_RMS, rel=1e-9)

    @pytest.mark.parametrize("gid", ["speech-male", "alarm", "babble-16", "white"])
    def test_seed_changes_signal(self, gid):
        assert not np.array_equal(gen.generate(gid, 1.0, 1), gen.generate(gid, 1.0, 2))

    def test_unknown(self):
        for bad in ("kazoo", "babble-x", "babble-0"):
            with pytest.raises(ValueError):
                gen.generate(bad, 1.0, 0)

    def test_alarm_band(self):
        x = gen.generate("alarm", 4.0, 3)
        spec = np.abs(np.fft.rfft(x)) ** 2
        f = np.fft.rfftfreq(x.size, 1 / FS)
        assert spec[(f >= 500) & (f <= 3500)].sum() / spec.sum() >= 0.9

    def test_drums_are_lowband(self):
        x = gen.generate("drums", 4.0, 3)
        spec = np.abs(np.fft.rfft(x)) ** 2
        f = np.fft.rfftfreq(x.size, 1 / FS)
        assert spec[f < 300].sum() / spec.sum() >= 0.8

    def test_babbles_share_spectral_shape(self):
        def profile(gid):
            x = gen.generate(gid, 3.0, 11)
            return analyze(AudioBuffer(x, x)).ratemap.mean(0)

        assert np.corrcoef(profile("babble-16"), profile("babble-32"))[0, 1] > 0.9

    def test_speech_has_pauses_and_modulation(self):
        x = gen.generate("speech-male", 4.0, 5)
        env = np.sqrt(np.convolve(x**2, np.ones(160) / 160, mode="same"))[::160]
        spec = np.abs(np.fft.rfft(env - env.mean()))
        f = np.fft.rfftfreq(env.size, 0.01)
        # syllabic modulation energy dominates the 1-10 Hz range
        assert spec[(f > 1) & (f < 10)].sum() > spec[f > 10].sum()

    def test_noise_sets_disjoint(self):
        assert not set(gen.NOISE_SET_A) & set(gen.NOISE_SET_B)


class TestReverb:
    def test_identity_when_anechoic(self):
        x = np.random.default_rng(0).normal(size=800)
        dry = AudioBuffer(x, -x)
        assert parametric_reverb(dry, 0.0, 10.0) is dry

    def test_presets(self):
        assert room("A") == (0.32, 6.09)
        assert ROOM_PRESETS["D"] == (0.89, 6.12)
        with pytest.raises(ValueError):
            room("Z")

    @pytest.mark.parametrize("name", ["A", "B", "C", "D"])
    def test_decay_matches_t60(self, name):
        t60, drr = room(name)
        tails = reverb_tails(t60, drr, seed=4)
        for tail in tails:
            assert schroeder_t60(tail) == pytest.approx(t60, rel=0.15)

    @pytest.mark.parametrize("name", ["A", "C"])
    def test_direct_to_reverberant_ratio(self, name):
        t60, drr = room(name)
        tails = reverb_tails(t60, drr, seed=1)
        measured = -10 * np.log10(np.sum(tails**2, axis=1))
        np.testing.assert_allclose(measured, drr, atol=1e-9)

    def test_ears_decorrelated(self):
        tails = reverb_tails(0.68, 8.82, seed=2)
        assert abs(np.corrcoef(tails[0], tails[1])[0, 1]) < 0.05

    def test_negative_t60(self):
        with pytest.raises(ValueError):
            parametric_reverb(AudioBuffer(np.zeros(4), np.zeros(4)), -1.0, 5.0)


class TestMixing:
    def test_zero_db(self):
        rng = np.random.default_rng(0)
        mix = mix_at_tmr(rng.normal(size=FS), 3 * rng.normal(size=FS), 0.0, 0.0, 30.0)
        assert mix.metadata["target_rms"] / mix.metadata["masker_rms"] == pytest.approx(1.0, abs=1e-12)

    def test_minus_six(self):
        rng = np.random.default_rng(1)
        mix = mix_at_tmr(rng.normal(size=FS), rng.normal(size=FS), -6.0, 0.0, 30.0)
        ratio = mix.metadata["masker_rms"] / mix.metadata["target_rms"]
        assert ratio == pytest.approx(10 ** (6 / 20), rel=1e-12)
        assert 20 * np.log10(mix.metadata["target_rms"] / mix.metadata["masker_rms"]) == pytest.approx(-6.0, abs=0.01)

    def test_stems_sum_exactly(self):
        rng = np.random.default_rng(2)
        mix = mix_at_tmr(rng.normal(size=FS), rng.normal(size=FS // 3), -6.0, 40.0, 300.0)
        assert np.array_equal(mix.mixture.left, mix.target.left + mix.masker.left)
        assert np.array_equal(mix.mixture.right, mix.target.right + mix.masker.right)

    def test_masker_looped_or_trimmed(self):
        x = np.arange(1.0, 4.0)
        np.testing.assert_array_equal(match_length(x, 7), [1, 2, 3, 1, 2, 3, 1])
        np.testing.assert_array_equal(match_length(x, 2), [1, 2])

    def test_zero_rms(self):
        with pytest.raises(ValueError):
            mix_at_tmr(np.zeros(100), np.ones(100), 0.0, 0.0, 30.0)

    def test_scene_is_deterministic_and_additive(self):
        spec = SceneSpec(SourceSpec("speech-female", 30.0, 3), SourceSpec("alarm", 330.0, 4), -6.0, "B", seed=9, duration=1.0)
        a, b = render_scene(spec), render_scene(spec)
        assert np.array_equal(a.mixture.left, b.mixture.left)
        np.testing.assert_allclose(a.mixture.left, a.target.left + a.masker.left, atol=1e-15)

    def test_scene_rejects_off_grid(self):
        with pytest.raises(ValueError):
            SceneSpec(SourceSpec("speech", 32.0))

    def test_single_source_scene(self):
        mix = render_scene(SceneSpec(SourceSpec("speech-male", 0.0, 1), duration=0.5))
        assert not mix.masker.left.any()
        np.testing.assert_array_equal(mix.mixture.left, mix.target.left)


class TestWav:
    def test_round_trip(self, tmp_path):
        x = np.random.default_rng(0).uniform(-0.9, 0.9, (2, 1000))
        write_wav(tmp_path / "a.wav", x)
        y, rate = read_wav(tmp_path / "a.wav")
        assert rate == FS and y.shape == (2, 1000)
        np.testing.assert_allclose(y, x, atol=0.5 / 32768 + 1e-12)

    def test_rejects_other_rate(self, tmp_path):
        write_wav(tmp_path / "b.wav", np.zeros(100), 44100)
        with pytest.raises(WavFormatError):
            read_wav(tmp_path / "b.wav")

    def test_rejects_other_width(self, tmp_path):
        import wave

        with wave.open(str(tmp_path / "c.wav"), "wb") as wf:
            wf.setnchannels(1)
            wf.setsampwidth(1)
            wf.setframerate(FS)
            wf.writeframes(b"\x80" * 10)
        with pytest.raises(WavFormatError):
            read_wav(tmp_path / "c.wav")

    def test_rejects_garbage(self, tmp_path):
        (tmp_path / "e.wav").write_bytes(b"RIFF0000WAVEjunk")
        with pytest.raises(WavFormatError):
            read_wav(tmp_path / "e.wav")

    def test_clips(self, tmp_path):
        write_wav(tmp_path / "d.wav", np.array([2.0, -2.0]))
        y, _ = read_wav(tmp_path / "d.wav")
        assert y.max() <= 1.0 and y.min() >= -1.0
