import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from affectlab.audio_io import AudioClip, write_wav
from affectlab.errors import EmptyClip, NegativeChroma
from affectlab.features import (TONNETZ_BASIS, FeatureExtractor, FeatureSequence, FeatureStats,
                                FrameSpec, assemble_features, chromagram, deltas, layout_for,
                                mfcc, pitch_energy, read_feature_cache, spec_hash,
                                spectral_contrast, stft, tonnetz, write_feature_cache)
from conftest import tone


class TestFrameSpec:
    def test_defaults(self):
        s = FrameSpec()
        assert (s.frame_length_samples, s.hop_samples, s.fft_size, s.window) == (400, 160, 512, "hann")

    @pytest.mark.parametrize("kw", [dict(hop_samples=500), dict(fft_size=300),
                                    dict(frame_length_samples=600), dict(window="rect")])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            FrameSpec(**kw)


class TestStft:
    def test_zero_clip(self):
        assert np.all(stft(AudioClip(np.zeros(1600), 16000)) == 0)

    def test_1khz_bin(self):
        S = stft(tone(1000))
        assert np.all(np.argmax(np.abs(S), axis=1) == 32)

    @pytest.mark.parametrize("window", ["hann", "hamming"])
    def test_matches_direct_dft(self, rng, window):
        x = rng.uniform(-1, 1, 1024)
        S = stft(AudioClip(x, 16000), FrameSpec(window=window))
        ref = oracles.spectrogram(x, window=getattr(oracles, window))
        assert S.shape == ref.shape == (4, 257)
        np.testing.assert_allclose(S, ref, atol=1e-6, rtol=0)

    def test_short_clip_padded(self):
        assert stft(AudioClip(np.ones(10), 16000)).shape == (1, 257)

    def test_empty(self):
        with pytest.raises(EmptyClip):
            stft(AudioClip(np.zeros(0), 16000))

    def test_frame_count(self):
        assert stft(AudioClip(np.zeros(16000), 16000)).shape[0] == 1 + (16000 - 400) // 160


class TestChroma:
    def test_silent_frame(self):
        assert np.all(chromagram(np.zeros((3, 257)), 16000) == 0)

    @pytest.mark.parametrize("freq", [440.0, 880.0])
    def test_a_tones(self, freq):
        C = chromagram(stft(tone(freq)), 16000)
        assert np.all(np.argmax(C, axis=1) == 9)
        np.testing.assert_allclose(C.max(axis=1), 1.0)

    def test_matches_oracle(self, rng):
        x = rng.uniform(-1, 1, 2048)
        S = stft(AudioClip(x, 16000))
        np.testing.assert_allclose(chromagram(S, 16000),
                                   oracles.chroma(oracles.spectrogram(x), 16000), atol=1e-6)


class TestTonnetz:
    def test_uniform_row(self):
        np.testing.assert_allclose(tonnetz(np.ones((1, 12))), 0.0, atol=1e-12)

    def test_class_zero(self):
        onehot = np.zeros((1, 12))
        onehot[0, 0] = 1
        np.testing.assert_allclose(tonnetz(onehot)[0], [0, 1, 0, 1, 0, 0.5], atol=1e-12)

    @pytest.mark.parametrize("p", range(12))
    def test_one_hot_matches_formula(self, p):
        onehot = np.zeros((1, 12))
        onehot[0, p] = 3.0
        np.testing.assert_allclose(tonnetz(onehot)[0], oracles.tonnetz_column(p), atol=1e-12)

    def test_zero_row(self):
        assert np.all(tonnetz(np.zeros((2, 12))) == 0)

    def test_negative(self):
        with pytest.raises(NegativeChroma):
            tonnetz(-np.ones((1, 12)))

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(0, 10, allow_nan=False), min_size=12, max_size=12))
    def test_norm_bound(self, row):
        v = tonnetz(np.array([row]))
        assert np.linalg.norm(v) <= TONNETZ_BASIS[:, 0].__abs__().sum() + 1e-9
        assert np.linalg.norm(v) <= 5.0


class TestSpectralContrast:
    def test_flat_spectrum(self):
        np.testing.assert_allclose(spectral_contrast(np.full((2, 257), 3.0), 16000), 0.0, atol=1e-12)

    def test_zero_frame(self):
        assert np.all(spectral_contrast(np.zeros((1, 257)), 16000) == 0)

    def test_shape(self):
        assert spectral_contrast(stft(tone(300)), 16000).shape[1] == 7

    @pytest.mark.parametrize("band,freq", [(1, 300.0), (3, 1200.0), (5, 4500.0), (6, 7000.0)])
    def test_tone_band_dominates(self, rng, band, freq):
        x = tone(freq).samples + 1e-3 * rng.standard_normal(8000)
        c = spectral_contrast(stft(AudioClip(x, 16000)), 16000).mean(axis=0)
        assert np.argmax(c) == band


class TestMfcc:
    def test_zero_clip_constant(self):
        M = mfcc(stft(AudioClip(np.zeros(2000), 16000)), 16000)
        assert np.all(M == M[0])

    @pytest.mark.parametrize("n_fft", [512, 1024, 2048])
    def test_thirteen_coefficients(self, n_fft):
        assert mfcc(stft(tone(300), FrameSpec(fft_size=n_fft)), 16000).shape[1] == 13

    def test_matches_oracle(self, rng):
        x = rng.uniform(-1, 1, 1200)
        np.testing.assert_allclose(mfcc(stft(AudioClip(x, 16000)), 16000),
                                   oracles.mfcc(oracles.spectrogram(x), 16000), atol=1e-6)


class TestPitchEnergy:
    def test_silence(self):
        pe = pitch_energy(AudioClip(np.zeros(4000), 16000))
        assert np.all(pe[:, 0] == 0)
        np.testing.assert_allclose(pe[:, 1], np.log(1e-10))

    @pytest.mark.parametrize("freq", [100.0, 160.0, 250.0])
    def test_tone_f0(self, freq):
        f0 = pitch_energy(tone(freq))[:, 0]
        lag = 16000 / freq
        assert np.all(np.abs(f0 - freq) <= 16000 / lag ** 2 * 1.0 + 1e-9)

    def test_scale_law(self):
        a = pitch_energy(tone(100, amp=0.2))
        b = pitch_energy(tone(100, amp=0.4))
        np.testing.assert_array_equal(a[:, 0], b[:, 0])
        np.testing.assert_allclose(b[:, 1] - a[:, 1], np.log(4), atol=1e-6)

    def test_noise_is_unvoiced(self, rng):
        f0 = pitch_energy(AudioClip(rng.standard_normal(16000) * 0.1, 16000))[:, 0]
        assert np.mean(f0 == 0) > 0.8


class TestDeltas:
    def test_constant(self):
        assert np.all(deltas(np.full((7, 3), 2.5)) == 0)

    def test_single_frame(self):
        assert np.all(deltas(np.ones((1, 4))) == 0)

    def test_ramp(self):
        d = deltas(np.arange(10.0)[:, None])
        np.testing.assert_allclose(d[2:-2, 0], 1.0)

    def test_matches_formula(self, rng):
        x = rng.standard_normal((6, 2))
        pad = np.concatenate([x[:1], x[:1], x, x[-1:], x[-1:]])
        ref = np.array([sum(n * (pad[t + 2 + n] - pad[t + 2 - n]) for n in (1, 2)) / 10
                        for t in range(6)])
        np.testing.assert_allclose(deltas(x), ref, atol=1e-12)


class TestAssemble:
    def test_widths(self):
        clip = tone(220)
        assert assemble_features(clip, with_deltas=False).dim == 40
        seq = assemble_features(clip, with_deltas=True)
        assert seq.dim == 80
        assert seq.layout == layout_for(True)
        assert [w for _, w in seq.layout[:6]] == [12, 6, 7, 13, 1, 1]

    def test_none_is_identity(self):
        clip = tone(220)
        seq = assemble_features(clip, with_deltas=False)
        S = stft(clip)
        np.testing.assert_array_equal(seq.block("chroma"), chromagram(S, 16000))
        np.testing.assert_array_equal(seq.block("mfcc"), mfcc(S, 16000))
        np.testing.assert_array_equal(seq.block("pitch")[:, 0], pitch_energy(clip)[:, 0])

    def test_corpus_z(self, rng):
        clips = [AudioClip(rng.uniform(-0.5, 0.5, 3000 + 160 * i), 16000) for i in range(5)]
        seqs = [assemble_features(c) for c in clips]
        stats = FeatureStats.fit(seqs)
        normed = [assemble_features(c, normalize="per_corpus_z", stats=stats) for c in clips]
        frames = np.concatenate([s.frames for s in normed])
        np.testing.assert_allclose(frames.mean(axis=0), 0.0, atol=1e-6)
        assert all(s.normalized for s in normed)

    def test_z_needs_stats(self):
        with pytest.raises(ValueError):
            assemble_features(tone(200), normalize="per_corpus_z")

    @settings(max_examples=15, deadline=None)
    @given(st.integers(1, 3000), st.floats(0.0, 1.0), st.integers(0, 2**31 - 1))
    def test_finite_on_random_clips(self, n, amp, seed):
        x = amp * np.random.default_rng(seed).uniform(-1, 1, n)
        seq = assemble_features(AudioClip(x, 16000))
        assert np.all(np.isfinite(seq.frames)) and seq.n_frames >= 1

    def test_sequence_invariants(self):
        with pytest.raises(ValueError):
            FeatureSequence(np.zeros((2, 3)), [("a", 2)])
        with pytest.raises(ValueError):
            FeatureSequence(np.full((2, 2), np.nan), [("a", 2)])


class TestCache:
    def test_round_trip(self, tmp_path, rng):
        seq = FeatureSequence(rng.standard_normal((5, 80)).astype(np.float32), layout_for(True), "clip")
        path = tmp_path / "x.afq"
        write_feature_cache(path, seq, "abc123")
        back, h = read_feature_cache(path)
        assert h == "abc123" and back.layout == seq.layout and back.clip_id == "clip"
        assert back.frames.tobytes() == seq.frames.tobytes()
        assert path.read_bytes()[:4] == b"AFQ1"

    def test_extractor_reuses_and_invalidates(self, tmp_path):
        wav = tmp_path / "a.wav"
        write_wav(wav, tone(200).samples, 16000)
        ex = FeatureExtractor(cache_dir=str(tmp_path / "cache"))
        first = ex(str(wav))
        (cached,) = list((tmp_path / "cache").iterdir())
        stamp = cached.stat().st_mtime_ns
        again = ex(str(wav))
        assert again.frames.tobytes() == first.frames.tobytes()
        assert cached.stat().st_mtime_ns == stamp
        other = FeatureExtractor(FrameSpec(hop_samples=200), cache_dir=str(tmp_path / "cache"))
        assert other(str(wav)).n_frames != first.n_frames
        assert spec_hash(FrameSpec(), True) != spec_hash(FrameSpec(hop_samples=200), True)

    def test_extractor_resamples(self, tmp_path):
        wav = tmp_path / "b.wav"
        write_wav(wav, tone(200, sr=8000).samples, 8000)
        seq = FeatureExtractor()(str(wav))
        assert seq.n_frames == 1 + (8000 - 400) // 160
