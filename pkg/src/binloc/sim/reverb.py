"""Statistics-matched reverberation: exponentially decaying, binaurally
decorrelated noise tails with a prescribed T60 and direct-to-reverberant ratio."""

import numpy as np
from scipy.signal import oaconvolve

from ..frontend import AudioBuffer

# (T60 in s, DRR in dB) of the four rooms of the Surrey BRIR set
ROOM_PRESETS = {
    "anechoic": (0.0, np.inf),
    "A": (0.32, 6.09),
    "B": (0.47, 5.31),
    "C": (0.68, 8.82),
    "D": (0.89, 6.12),
}

PREDELAY = 0.002


def reverb_tails(t60, drr_db, seed, sample_rate=16000, length_factor=1.2):
    """Two independent tails, shape ``(2, n)``, each with energy ``10^(-drr/10)``.

    The direct path (unit impulse at lag 0) is not included.
    """
    rng = np.random.default_rng(seed)
    n = int(round(length_factor * t60 * sample_rate))
    start = int(round(PREDELAY * sample_rate))
    t = np.arange(n) / sample_rate
    env = np.exp(-3.0 * np.log(10.0) * t / t60)  # 60 dB energy decay over t60
    tails = rng.standard_normal((2, n)) * env
    tails[:, :start] = 0.0
    energy = np.sum(tails**2, axis=1, keepdims=True)
    return tails * np.sqrt(10.0 ** (-drr_db / 10.0) / energy)


def parametric_reverb(dry, t60, drr_db, seed=0):
    """Add a synthetic reverberant tail to each ear of ``dry``; ``t60 == 0`` is the identity."""
    if t60 < 0:
        raise ValueError("t60 must be non-negative")
    if t60 == 0 or not np.isfinite(drr_db):
        return dry
    tails = reverb_tails(t60, drr_db, seed, dry.sample_rate)
    n = len(dry)
    left = dry.left + oaconvolve(dry.left, tails[0])[:n]
    right = dry.right + oaconvolve(dry.right, tails[1])[:n]
    return AudioBuffer(left, right, dry.sample_rate)


def room(name):
    try:
        return ROOM_PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown room {name!r}; known: {', '.join(ROOM_PRESETS)}") from None


def schroeder_t60(ir, sample_rate=16000, fit_range=(-5.0, -35.0)):
    """T60 from Schroeder backward integration, line fit over ``fit_range`` dB."""
    edc = np.cumsum((np.asarray(ir) ** 2)[::-1])[::-1]
    edc_db = 10.0 * np.log10(edc / edc[0])
    sel = (edc_db <= fit_range[0]) & (edc_db >= fit_range[1])
    t = np.arange(edc.size) / sample_rate
    slope = np.polyfit(t[sel], edc_db[sel], 1)[0]
    return -60.0 / slope
