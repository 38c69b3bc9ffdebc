"""Binaural auditory front-end.

Two-channel audio is split into 32 gammatone bands per ear, half-wave
rectified, and reduced to per-frame localisation features (normalised
cross-correlation plus interaural level difference) and a log-compressed
ratemap averaged across the ears.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

N_BANDS = 32
F_LOW = 80.0
F_HIGH = 8000.0
FRAME_LEN = 0.020
FRAME_SHIFT = 0.010
MAX_LAG = 0.001
N_LAGS = 33
ENERGY_FLOOR = 1e-12
RATEMAP_TAU = 0.008
RATEMAP_FLOOR = 1e-6


@dataclass(frozen=True)
class AudioBuffer:
    left: np.ndarray
    right: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        left = np.asarray(self.left, dtype=np.float64)
        right = np.asarray(self.right, dtype=np.float64)
        if left.ndim != 1 or right.ndim != 1:
            raise ValueError("channels must be one-dimensional")
        if left.shape != right.shape:
            raise ValueError(f"channel lengths differ: {left.size} vs {right.size}")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if not (np.all(np.isfinite(left)) and np.all(np.isfinite(right))):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    def __len__(self):
        return self.left.size

    @property
    def duration(self):
        return self.left.size / self.sample_rate

    def stacked(self):
        return np.stack([self.left, self.right])

    @classmethod
    def from_array(cls, samples, sample_rate=16000):
        samples = np.atleast_2d(samples)
        if samples.shape[0] == 1:
            return cls(samples[0], samples[0].copy(), sample_rate)
        return cls(samples[0], samples[1], sample_rate)

    def __add__(self, other):
        if self.sample_rate != other.sample_rate:
            raise ValueError("sample rates differ")
        return AudioBuffer(self.left + other.left, self.right + other.right, self.sample_rate)

    def scaled(self, gain):
        return AudioBuffer(self.left * gain, self.right * gain, self.sample_rate)


@dataclass(frozen=True)
class FilterbankOutput:
    """Band signals of one ear, shape ``(n_bands, n_samples)``."""

    bands: np.ndarray
    center_frequencies: np.ndarray
    sample_rate: int


@dataclass(frozen=True)
class BinauralFrameFeatures:
    ccf: np.ndarray  # (frames, bands, 33), lag -16..+16
    ild_db: np.ndarray  # (frames, bands)
    frame_times: np.ndarray  # seconds, frame centres

    def stacked(self):
        """Concatenate to the (frames, bands, 34) classifier input."""
        return np.concatenate([self.ccf, self.ild_db[..., None]], axis=-1)


def erb_rate(f):
    return 21.4 * np.log10(0.00437 * np.asarray(f, dtype=np.float64) + 1.0)


def inverse_erb_rate(e):
    return (10.0 ** (np.asarray(e, dtype=np.float64) / 21.4) - 1.0) / 0.00437


def erb_bandwidth(f):
    """Equivalent rectangular bandwidth (Glasberg & Moore) in Hz."""
    return 24.7 * (4.37 * np.asarray(f, dtype=np.float64) / 1000.0 + 1.0)


def erb_center_frequencies(n_bands=N_BANDS, f_low=F_LOW, f_high=F_HIGH):
    """Centre frequencies uniformly spaced on the ERB-rate scale, endpoints included."""
    if n_bands < 1:
        raise ValueError("n_bands must be >= 1")
    if not 0 < f_low < f_high:
        raise ValueError(f"need 0 < f_low < f_high, got {f_low}, {f_high}")
    if n_bands == 1:
        return np.array([float(f_low)])
    cf = inverse_erb_rate(np.linspace(erb_rate(f_low), erb_rate(f_high), n_bands))
    cf[0], cf[-1] = f_low, f_high
    return cf


def gammatone_filter(x, cf, sample_rate, order=4):
    """Filter ``x`` (last axis is time) through one gammatone channel.

    Implemented as a cascade of ``order`` identical first-order complex
    resonators; the real part of the output is returned, scaled for unit
    gain at ``cf``.
    """
    bw = 1.019 * erb_bandwidth(cf)
    decay = np.exp(-2.0 * np.pi * bw / sample_rate)
    pole = decay * np.exp(2j * np.pi * cf / sample_rate)
    y = np.asarray(x, dtype=np.complex128)
    for _ in range(order):
        y = lfilter([1.0 - decay], [1.0, -pole], y, axis=-1)
    return 2.0 * y.real


def gammatone_analyze(audio, n_bands=N_BANDS, f_low=F_LOW, f_high=F_HIGH):
    """Run both ears through the gammatone filterbank.

    Returns ``(left, right)`` FilterbankOutput objects with band signals of
    the same length as the input. No group-delay compensation is applied.
    """
    cf = erb_center_frequencies(n_bands, f_low, f_high)
    if f_high > audio.sample_rate / 2:
        raise ValueError("f_high must not exceed the Nyquist frequency")
    stereo = audio.stacked()
    out = np.empty((2, n_bands, stereo.shape[1]))
    for b, f in enumerate(cf):
        out[:, b] = gammatone_filter(stereo, f, audio.sample_rate)
    return (
        FilterbankOutput(out[0], cf, audio.sample_rate),
        FilterbankOutput(out[1], cf, audio.sample_rate),
    )


def half_wave_rectify(band):
    return np.maximum(band, 0.0)


def rectify(fb):
    return FilterbankOutput(half_wave_rectify(fb.bands), fb.center_frequencies, fb.sample_rate)


def frame_geometry(n_samples, sample_rate, frame_len=FRAME_LEN, frame_shift=FRAME_SHIFT):
    """Return ``(frame_length, frame_step, n_frames)`` in samples."""
    length = int(round(frame_len * sample_rate))
    step = int(round(frame_shift * sample_rate))
    n_frames = 0 if n_samples < length else 1 + (n_samples - length) // step
    return length, step, n_frames


def frame_signal(x, length, step, n_frames):
    """View the last axis of ``x`` as ``(..., n_frames, length)`` frames."""
    if n_frames == 0:
        return np.zeros(x.shape[:-1] + (0, length))
    windows = np.lib.stride_tricks.sliding_window_view(x, length, axis=-1)
    return windows[..., : (n_frames - 1) * step + 1 : step, :]


def frame_times(n_frames, length, step, sample_rate):
    return (np.arange(n_frames) * step + length / 2.0) / sample_rate


def ccf_features(fb_left, fb_right, frame_len=FRAME_LEN, frame_shift=FRAME_SHIFT, max_lag=MAX_LAG):
    """Normalised interaural cross-correlation per band and frame.

    ``r(tau) = sum_n l[n] r[n + tau] / sqrt(sum l^2 * sum r^2)`` over the
    samples of one rectangular frame. Positive lag means the left ear
    leads. Frames with zero energy in either ear give an all-zero CCF.

    Returns ``(ccf, frame_times)`` with ``ccf`` shaped ``(frames, bands, lags)``.
    """
    fs = fb_left.sample_rate
    n = fb_left.bands.shape[-1]
    length, step, n_frames = frame_geometry(n, fs, frame_len, frame_shift)
    lag = int(round(max_lag * fs))
    if lag >= length:
        raise ValueError("frame length must exceed the maximum lag")
    n_bands = fb_left.bands.shape[0]
    nfft = 1 << int(np.ceil(np.log2(2 * length)))
    lag_index = np.r_[nfft - lag : nfft, 0 : lag + 1]
    ccf = np.zeros((n_frames, n_bands, 2 * lag + 1))
    for b in range(n_bands):
        fl = frame_signal(fb_left.bands[b], length, step, n_frames)
        fr = frame_signal(fb_right.bands[b], length, step, n_frames)
        el = np.sum(fl * fl, axis=-1)
        er = np.sum(fr * fr, axis=-1)
        xc = np.fft.irfft(np.conj(np.fft.rfft(fl, nfft)) * np.fft.rfft(fr, nfft), nfft)
        valid = (el > ENERGY_FLOOR) & (er > ENERGY_FLOOR)
        norm = np.sqrt(np.where(valid, el * er, 1.0))
        ccf[:, b, :] = np.where(valid[:, None], xc[:, lag_index] / norm[:, None], 0.0)
    np.clip(ccf, -1.0, 1.0, out=ccf)
    return ccf, frame_times(n_frames, length, step, fs)


def ild_db(fb_left, fb_right, frame_len=FRAME_LEN, frame_shift=FRAME_SHIFT):
    """Interaural level difference ``10 log10(E_left / E_right)`` per frame and band."""
    fs = fb_left.sample_rate
    length, step, n_frames = frame_geometry(fb_left.bands.shape[-1], fs, frame_len, frame_shift)
    el = np.sum(frame_signal(fb_left.bands, length, step, n_frames) ** 2, axis=-1)
    er = np.sum(frame_signal(fb_right.bands, length, step, n_frames) ** 2, axis=-1)
    ild = 10.0 * np.log10(np.maximum(el, ENERGY_FLOOR) / np.maximum(er, ENERGY_FLOOR))
    return ild.T


def _leaky_integrate(x, tau, sample_rate):
    a = np.exp(-1.0 / (tau * sample_rate))
    return lfilter([1.0 - a], [1.0, -a], x, axis=-1)


def log_ratemap(fb_left, fb_right, frame_len=FRAME_LEN, frame_shift=FRAME_SHIFT, tau=RATEMAP_TAU):
    """Log ratemap, shape ``(frames, bands)``, framed like :func:`ccf_features`.

    Rectified band energy is smoothed by a leaky integrator, averaged over
    each frame and across the ears, then ``log(max(v, 1e-6))``. Energy
    convention: doubling the input amplitude adds ``log 4``.
    """
    fs = fb_left.sample_rate
    length, step, n_frames = frame_geometry(fb_left.bands.shape[-1], fs, frame_len, frame_shift)
    energy = 0.5 * (fb_left.bands**2 + fb_right.bands**2)
    smooth = _leaky_integrate(energy, tau, fs)
    rate = np.mean(frame_signal(smooth, length, step, n_frames), axis=-1).T
    return np.log(np.maximum(rate, RATEMAP_FLOOR))


@dataclass(frozen=True)
class FrontendOutput:
    features: BinauralFrameFeatures
    ratemap: np.ndarray  # (frames, bands)
    center_frequencies: np.ndarray


def analyze(audio):
    """Full front-end: gammatone, rectification, CCF, ILD and log ratemap."""
    fb_l, fb_r = gammatone_analyze(audio)
    return features_from_filterbank(fb_l, fb_r)


def features_from_filterbank(fb_l, fb_r):
    fb_l, fb_r = rectify(fb_l), rectify(fb_r)
    ccf, times = ccf_features(fb_l, fb_r)
    feats = BinauralFrameFeatures(ccf, ild_db(fb_l, fb_r), times)
    return FrontendOutput(feats, log_ratemap(fb_l, fb_r), fb_l.center_frequencies)


def band_frame_energy(fb, frame_len=FRAME_LEN, frame_shift=FRAME_SHIFT):
    """Per frame, per band energy of unrectified band signals, ``(frames, bands)``."""
    fs = fb.sample_rate
    length, step, n_frames = frame_geometry(fb.bands.shape[-1], fs, frame_len, frame_shift)
    return np.sum(frame_signal(fb.bands, length, step, n_frames) ** 2, axis=-1).T
