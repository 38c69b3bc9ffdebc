"""Parametric spherical-head spatialisation.

A self-contained stand-in for measured HRIRs: Woodworth ITD applied to the
far ear with a windowed-sinc fractional delay, the magnitude of a
one-pole/one-zero head-shadow filter per ear (ears set slightly behind the
interaural axis, which makes level differences front-back asymmetric), and a
rear-hemifield high-shelf cut as a crude pinna cue. The shelf is weighted
toward the near ear so that it also shows up in the level difference; a
shelf applied equally to both ears would be invisible to binaural features.

Azimuth convention: degrees clockwise seen from above, 0 = front,
+90 = right, -90 (= 270) = left.
"""

import glob
import os
import re
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter, oaconvolve

from ..frontend import AudioBuffer
from ..wavio import read_wav

GRID_STEP = 5.0


@dataclass(frozen=True)
class HeadModel:
    radius: float = 0.0875
    speed_of_sound: float = 343.0
    ear_angle: float = 100.0  # ear position, degrees from front
    shadow_alpha_min: float = 0.1
    shadow_theta_min: float = 150.0
    rear_shelf_db: float = -6.0
    rear_shelf_hz: float = 4000.0
    # share of the rear shelf moved to the near ear: per-ear gain is
    # shelf * (1 + k * lateral), so the two-ear mean stays at the shelf
    front_back_asymmetry: float = 1.0
    sinc_half_width: int = 32

    def __post_init__(self):
        if self.radius <= 0 or self.speed_of_sound <= 0:
            raise ValueError("radius and speed of sound must be positive")

    def itd_seconds(self, azimuth):
        """Woodworth ITD magnitude for the lateral angle of ``azimuth``."""
        lateral = np.arcsin(np.minimum(np.abs(np.sin(np.radians(azimuth))), 1.0))
        return self.radius / self.speed_of_sound * (lateral + np.sin(lateral))

    def shadow_alpha(self, angle_to_ear):
        theta = np.radians(angle_to_ear)
        a_min = self.shadow_alpha_min
        return (1.0 + a_min / 2) + (1.0 - a_min / 2) * np.cos(theta / np.radians(self.shadow_theta_min) * np.pi)


def check_grid(azimuth):
    if abs(azimuth / GRID_STEP - round(azimuth / GRID_STEP)) > 1e-9:
        raise ValueError(f"azimuth {azimuth} is not on the {GRID_STEP:g} degree grid")


def _angle_between(a, b):
    d = abs(a - b) % 360.0
    return min(d, 360.0 - d)


def fractional_delay(x, delay, half_width=32):
    """Delay ``x`` by ``delay`` samples (>= 0), output the same length.

    Integer part by shifting, fractional part by a Blackman-windowed sinc.
    """
    if delay < 0:
        raise ValueError("delay must be non-negative")
    whole = int(np.floor(delay))
    frac = delay - whole
    y = x
    if frac > 1e-12:
        k = np.arange(-half_width, half_width + 1)
        h = np.sinc(k - frac) * np.blackman(2 * half_width + 3)[1:-1]
        h /= h.sum()
        y = oaconvolve(x, h)[half_width:half_width + x.size]
    if whole:
        y = np.concatenate([np.zeros(whole), y[:-whole]]) if whole < y.size else np.zeros_like(y)
    return y


def shadow_kernel(alpha, head, sample_rate, half_width=64):
    """Zero-phase FIR with the magnitude of the Brown-Duda head-shadow filter
    ``(alpha s + b) / (s + b)``, ``b = 2c/a``.

    Using the magnitude only keeps all interaural phase in the ITD delay.
    """
    nfft = 4 * half_width
    w = 2.0 * np.pi * np.fft.rfftfreq(nfft, 1.0 / sample_rate)
    b = 2.0 * head.speed_of_sound / head.radius
    mag = np.abs((1j * alpha * w + b) / (1j * w + b))
    h = np.roll(np.fft.irfft(mag, nfft), half_width)[: 2 * half_width + 1]
    return h * np.hanning(2 * half_width + 3)[1:-1]


def head_shadow(x, alpha, head, sample_rate):
    h = shadow_kernel(alpha, head, sample_rate)
    half = (h.size - 1) // 2
    return oaconvolve(x, h)[half:half + x.size]


def high_shelf(x, gain_db, corner_hz, sample_rate):
    """RBJ-cookbook high shelf (slope 1)."""
    if gain_db == 0:
        return x
    amp = 10.0 ** (gain_db / 40.0)
    w0 = 2.0 * np.pi * corner_hz / sample_rate
    alpha = np.sin(w0) / 2.0 * np.sqrt(2.0)
    cw = np.cos(w0)
    sa = 2.0 * np.sqrt(amp) * alpha
    b = np.array([amp * ((amp + 1) + (amp - 1) * cw + sa),
                  -2 * amp * ((amp - 1) + (amp + 1) * cw),
                  amp * ((amp + 1) + (amp - 1) * cw - sa)])
    a = np.array([(amp + 1) - (amp - 1) * cw + sa,
                  2 * ((amp - 1) - (amp + 1) * cw),
                  (amp + 1) - (amp - 1) * cw - sa])
    return lfilter(b / a[0], a / a[0], x)


class ParametricHead:
    """Spatialiser backed by a :class:`HeadModel`."""

    def __init__(self, head=None, sample_rate=16000):
        self.head = head or HeadModel()
        self.sample_rate = sample_rate

    def spatialize(self, mono, azimuth):
        check_grid(azimuth)
        return spatialize(mono, azimuth, self.head, self.sample_rate)


def spatialize(mono, azimuth, head=None, sample_rate=16000):
    """Render a mono signal at ``azimuth`` degrees to a two-ear AudioBuffer."""
    head = head or HeadModel()
    check_grid(azimuth)
    mono = np.asarray(mono, dtype=np.float64)
    if mono.ndim != 1 or not np.all(np.isfinite(mono)):
        raise ValueError("mono signal must be a finite 1-D array")
    az = float(azimuth) % 360.0
    rearness = max(0.0, -np.cos(np.radians(az)))

    itd = float(head.itd_seconds(az)) * sample_rate
    side = np.sin(np.radians(az))
    delays = {"left": itd if side > 1e-12 else 0.0, "right": itd if side < -1e-12 else 0.0}
    ears = {"left": -head.ear_angle % 360.0, "right": head.ear_angle}
    toward = {"left": -side, "right": side}
    out = {}
    for ear in ("left", "right"):
        shelf = head.rear_shelf_db * rearness * (1.0 + head.front_back_asymmetry * toward[ear])
        src = high_shelf(mono, shelf, head.rear_shelf_hz, sample_rate)
        alpha = float(head.shadow_alpha(_angle_between(az, ears[ear])))
        sig = head_shadow(src, alpha, head, sample_rate)
        out[ear] = fractional_delay(sig, delays[ear], head.sinc_half_width)
    return AudioBuffer(out["left"], out["right"], sample_rate)


def diffuse_field(duration, head=None, seed=0, sample_rate=16000, spatializer=None, n_sources=72):
    """Sum of independent white-noise sources on the full azimuth circle.

    Each channel is normalised to unit RMS.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    n = int(round(duration * sample_rate))
    spatializer = spatializer or ParametricHead(head, sample_rate)
    rng = np.random.default_rng(seed)
    left = np.zeros(n)
    right = np.zeros(n)
    for i in range(n_sources):
        buf = spatializer.spatialize(rng.standard_normal(n), i * 360.0 / n_sources)
        left += buf.left
        right += buf.right
    left /= np.sqrt(np.mean(left**2))
    right /= np.sqrt(np.mean(right**2))
    return AudioBuffer(left, right, sample_rate)


class HrirCatalog:
    """Spatialiser backed by user-supplied HRIRs.

    ``directory`` holds one stereo 16-bit WAV per azimuth with the azimuth
    encoded in the filename as ``az<degrees>``, e.g. ``kemar_az-30.wav`` or
    ``az315.wav``.
    """

    _pattern = re.compile(r"az(-?\d+(?:\.\d+)?)")

    def __init__(self, directory, sample_rate=16000):
        self.sample_rate = sample_rate
        self.irs = {}
        for path in sorted(glob.glob(os.path.join(directory, "*.wav"))):
            m = self._pattern.search(os.path.basename(path))
            if not m:
                continue
            data, _ = read_wav(path, expected_rate=sample_rate)
            if data.shape[0] != 2:
                raise ValueError(f"{path}: HRIR must be stereo")
            self.irs[float(m.group(1)) % 360.0] = data
        if not self.irs:
            raise FileNotFoundError(f"no az<deg>.wav HRIR files in {directory}")

    @property
    def azimuths(self):
        return sorted(self.irs)

    def spatialize(self, mono, azimuth):
        key = float(azimuth) % 360.0
        if key not in self.irs:
            raise ValueError(f"no HRIR for azimuth {azimuth}")
        ir = self.irs[key]
        mono = np.asarray(mono, dtype=np.float64)
        return AudioBuffer(oaconvolve(mono, ir[0])[:mono.size], oaconvolve(mono, ir[1])[:mono.size], self.sample_rate)
