"""Deterministic synthetic source signals.

Desk-scale stand-ins for speech and environmental maskers. Every generator
is a pure function of ``(duration, seed, sample_rate)``; outputs are scaled
to an RMS of 0.05.
"""

import numpy as np
from scipy.signal import butter, lfilter, sosfilt

NOMINAL_RMS = 0.05

# (F1, F2, F3, F4) in Hz for a handful of vowels
_VOWELS = np.array([
    [730, 1090, 2440, 3400], [270, 2290, 3010, 3700], [530, 1840, 2480, 3500],
    [660, 1720, 2410, 3400], [300, 870, 2240, 3300], [570, 840, 2410, 3300],
    [440, 1020, 2240, 3300], [490, 1350, 1690, 3300], [400, 1900, 2600, 3600],
])

SPEECH_PRESETS = {
    "speech-male": {"f0": 110.0, "formant_scale": 1.0},
    "speech-female": {"f0": 210.0, "formant_scale": 1.17},
}


def _normalise(x):
    rms = np.sqrt(np.mean(x**2))
    return x * (NOMINAL_RMS / rms) if rms > 0 else x


def _resonator(x, freq, bw, fs):
    r = np.exp(-np.pi * bw / fs)
    c = 2 * r * np.cos(2 * np.pi * freq / fs)
    return lfilter([1.0 - r], [1.0, -c, r * r], x)


def _raised_cosine_env(n, ramp):
    env = np.ones(n)
    ramp = min(ramp, n // 2)
    if ramp > 0:
        w = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
        env[:ramp] = w
        env[n - ramp:] = w[::-1]
    return env


def speech_like(duration, seed, sample_rate=16000, f0=110.0, formant_scale=1.0):
    """Formant-filtered glottal pulse train organised in ~4 Hz syllables.

    Syllables carry a voiced vowel nucleus and, at random, a fricative
    noise onset; pauses separate phrase-like groups.
    """
    rng = np.random.default_rng(seed)
    fs = sample_rate
    n = int(round(duration * fs))
    out = np.zeros(n)
    glottal_lp = butter(2, 800.0, fs=fs, output="sos")
    fric_hp = butter(4, [2500.0, 7600.0], btype="band", fs=fs, output="sos")
    pos = int(rng.uniform(0.0, 0.1) * fs)
    while pos < n:
        syl = int(rng.uniform(0.16, 0.32) * fs)
        seg = np.zeros(syl)
        # voiced nucleus: pulse train with a gliding f0
        f0_track = f0 * (1.0 + rng.uniform(-0.15, 0.15)) * np.linspace(1.0, rng.uniform(0.85, 1.15), syl)
        phase = np.cumsum(f0_track / fs)
        pulses = np.diff(np.floor(phase), prepend=0.0)
        src = sosfilt(glottal_lp, pulses) + 0.02 * rng.standard_normal(syl)
        formants = _VOWELS[rng.integers(len(_VOWELS))] * formant_scale * rng.uniform(0.93, 1.07, 4)
        voiced = np.zeros(syl)
        for k, (f, gain) in enumerate(zip(formants, (1.0, 0.7, 0.45, 0.3))):
            voiced += gain * _resonator(src, min(f, 0.45 * fs), 60.0 + 40.0 * k, fs)
        seg += voiced * _raised_cosine_env(syl, int(0.04 * fs))
        if rng.random() < 0.5:
            fl = int(rng.uniform(0.05, 0.1) * fs)
            fric = sosfilt(fric_hp, rng.standard_normal(fl)) * _raised_cosine_env(fl, int(0.01 * fs))
            seg[:fl] += 0.6 * fric * np.std(voiced) / max(np.std(fric), 1e-12)
        end = min(n, pos + syl)
        out[pos:end] += seg[: end - pos] * rng.uniform(0.5, 1.0)
        pos += syl + int(rng.uniform(0.02, 0.08) * fs)
        if rng.random() < 0.12:
            pos += int(rng.uniform(0.15, 0.35) * fs)
    return _normalise(out)


def babble(duration, seed, n_talkers, sample_rate=16000):
    rng = np.random.default_rng(seed)
    n = int(round(duration * sample_rate))
    out = np.zeros(n)
    for _ in range(n_talkers):
        preset = SPEECH_PRESETS["speech-male" if rng.random() < 0.5 else "speech-female"]
        f0 = preset["f0"] * rng.uniform(0.8, 1.25)
        out += speech_like(duration, int(rng.integers(2**31)), sample_rate, f0, preset["formant_scale"])
    return _normalise(out)


def alarm(duration, seed, sample_rate=16000):
    """Two-tone car-alarm style harmonic complex, rhythmically gated."""
    rng = np.random.default_rng(seed)
    fs = sample_rate
    t = np.arange(int(round(duration * fs))) / fs
    period = rng.uniform(0.22, 0.3)
    pitches = np.array([650.0, 940.0]) * rng.uniform(0.97, 1.03)
    which = (np.floor(t / period) % 2).astype(int)
    f = pitches[which]
    phase = 2 * np.pi * np.cumsum(f) / fs
    sig = np.sin(phase) + 0.6 * np.sin(2 * phase) + 0.35 * np.sin(3 * phase)
    gate = 0.55 + 0.45 * np.sin(2 * np.pi * t / period * 2) ** 2
    return _normalise(sig * gate)


def drums(duration, seed, sample_rate=16000):
    """Low pitched decaying thumps with onsets every 0.2-0.5 s."""
    rng = np.random.default_rng(seed)
    fs = sample_rate
    n = int(round(duration * fs))
    out = np.zeros(n)
    lp = butter(4, 300.0, fs=fs, output="sos")
    pos = 0
    while pos < n:
        length = int(0.35 * fs)
        tt = np.arange(length) / fs
        f_start = rng.uniform(90.0, 180.0)
        freq = f_start * np.exp(-tt * 3.0)
        hit = np.sin(2 * np.pi * np.cumsum(freq) / fs) * np.exp(-tt / rng.uniform(0.06, 0.15))
        hit += 0.3 * sosfilt(lp, rng.standard_normal(length)) * np.exp(-tt / 0.03)
        end = min(n, pos + length)
        out[pos:end] += hit[: end - pos] * rng.uniform(0.6, 1.0)
        pos += int(rng.uniform(0.2, 0.5) * fs)
    return _normalise(sosfilt(lp, out))


def engine(duration, seed, sample_rate=16000):
    """Low-pass noise plus firing harmonics, amplitude modulated at 15 Hz."""
    rng = np.random.default_rng(seed)
    fs = sample_rate
    n = int(round(duration * fs))
    t = np.arange(n) / fs
    lp = butter(4, 300.0, fs=fs, output="sos")
    rumble = sosfilt(lp, rng.standard_normal(n))
    rumble /= np.std(rumble)
    f_fire = rng.uniform(40.0, 60.0)
    tones = sum(np.sin(2 * np.pi * k * f_fire * t + rng.uniform(0, 2 * np.pi)) / k for k in range(1, 5))
    return _normalise((rumble + 0.5 * tones) * (1.0 + 0.8 * np.sin(2 * np.pi * 15.0 * t)))


def piano(duration, seed, sample_rate=16000):
    """Fast sequence of decaying harmonic notes, energy mostly below 2 kHz."""
    rng = np.random.default_rng(seed)
    fs = sample_rate
    n = int(round(duration * fs))
    out = np.zeros(n)
    pos = 0
    while pos < n:
        length = int(0.6 * fs)
        tt = np.arange(length) / fs
        f0 = 110.0 * 2 ** (rng.integers(0, 30) / 12.0)
        note = np.zeros(length)
        for k in range(1, 9):
            if k * f0 > 2000.0:
                break
            note += np.sin(2 * np.pi * k * f0 * tt) / k * np.exp(-tt * (2.0 + k))
        end = min(n, pos + length)
        out[pos:end] += note[: end - pos] * rng.uniform(0.5, 1.0)
        pos += int(rng.uniform(0.1, 0.2) * fs)
    return _normalise(out)


def baby(duration, seed, sample_rate=16000):
    """High-pitched harmonic cries of about a second with gliding pitch."""
    rng = np.random.default_rng(seed)
    fs = sample_rate
    n = int(round(duration * fs))
    out = np.zeros(n)
    pos = int(rng.uniform(0, 0.2) * fs)
    while pos < n:
        length = int(rng.uniform(0.7, 1.4) * fs)
        tt = np.arange(length) / fs
        f0 = rng.uniform(380.0, 520.0) * (1.0 + 0.15 * np.sin(np.pi * tt / tt[-1]))
        phase = 2 * np.pi * np.cumsum(f0) / fs
        cry = sum(np.sin(k * phase) * np.exp(-((k * 450.0 - 1300.0) / 1200.0) ** 2) for k in range(1, 9))
        cry *= _raised_cosine_env(length, int(0.08 * fs))
        end = min(n, pos + length)
        out[pos:end] += cry[: end - pos]
        pos += length + int(rng.uniform(0.2, 0.5) * fs)
    return _normalise(out)


def phone(duration, seed, sample_rate=16000):
    """Telephone ring: 1 kHz and 3.2 kHz components, 20 Hz warble, 0.4 s on / 0.2 s off."""
    rng = np.random.default_rng(seed)
    fs = sample_rate
    t = np.arange(int(round(duration * fs))) / fs
    offset = rng.uniform(0.0, 0.6)
    on = ((t + offset) % 0.6) < 0.4
    warble = 0.5 + 0.5 * np.sign(np.sin(2 * np.pi * 20.0 * t))
    sig = np.sin(2 * np.pi * 1000.0 * t) + 0.8 * np.sin(2 * np.pi * 3200.0 * t) + 0.4 * np.sin(2 * np.pi * 3700.0 * t)
    env = lfilter([0.05], [1.0, -0.95], on * (0.4 + 0.6 * warble))
    return _normalise(sig * env)


def white(duration, seed, sample_rate=16000):
    rng = np.random.default_rng(seed)
    return _normalise(rng.standard_normal(int(round(duration * sample_rate))))


_SIMPLE = {
    "alarm": alarm,
    "drums": drums,
    "engine": engine,
    "piano": piano,
    "baby": baby,
    "phone": phone,
    "white": white,
}

# masker groups: set A trains the universal background model, set B is held out
NOISE_SET_A = ("alarm", "drums", "engine", "piano", "baby", "babble-16")
NOISE_SET_B = ("phone", "babble-32")


def generator_ids():
    return sorted(list(_SIMPLE) + list(SPEECH_PRESETS) + ["speech", "babble-16", "babble-32"])


def generate(source_id, duration, seed, sample_rate=16000):
    """Mono signal for ``source_id``; identical ``(id, duration, seed)`` give identical output."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    if source_id == "speech":
        source_id = "speech-male"
    if source_id in SPEECH_PRESETS:
        return speech_like(duration, seed, sample_rate, **SPEECH_PRESETS[source_id])
    if source_id.startswith("babble-"):
        try:
            n_talkers = int(source_id.split("-", 1)[1])
        except ValueError:
            raise ValueError(f"unknown generator {source_id!r}") from None
        if n_talkers < 1:
            raise ValueError(f"unknown generator {source_id!r}")
        return babble(duration, seed, n_talkers, sample_rate)
    if source_id not in _SIMPLE:
        raise ValueError(f"unknown generator {source_id!r}; known: {', '.join(generator_ids())}")
    return _SIMPLE[source_id](duration, seed, sample_rate)
