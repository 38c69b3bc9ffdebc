"""Two-source binaural scenes: TMR mixing with premix stems."""

from dataclasses import dataclass, field

import numpy as np

from ..frontend import AudioBuffer
from .generators import generate
from .head import ParametricHead, check_grid
from .reverb import parametric_reverb, room

REFERENCE_RMS = 0.05


@dataclass(frozen=True)
class SourceSpec:
    generator: str
    azimuth: float
    seed: int = 0


@dataclass(frozen=True)
class SceneSpec:
    target: SourceSpec
    masker: SourceSpec = None
    tmr_db: float = 0.0
    room: str = "anechoic"
    seed: int = 0
    duration: float = 2.0

    def __post_init__(self):
        check_grid(self.target.azimuth)
        if self.masker is not None:
            check_grid(self.masker.azimuth)
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        room(self.room)


@dataclass(frozen=True)
class Mixture:
    mixture: AudioBuffer
    target: AudioBuffer
    masker: AudioBuffer
    metadata: dict = field(default_factory=dict)


def rms(x):
    return float(np.sqrt(np.mean(np.asarray(x, dtype=np.float64) ** 2)))


def match_length(x, n):
    """Trim or loop ``x`` to ``n`` samples."""
    x = np.asarray(x, dtype=np.float64)
    if x.size >= n:
        return x[:n]
    return np.tile(x, int(np.ceil(n / x.size)))[:n]


def mix_at_tmr(target, masker, tmr_db, target_azimuth, masker_azimuth, spatializer=None,
               reference_rms=REFERENCE_RMS):
    """RMS-normalise two mono sources, set the masker level for ``tmr_db``,
    spatialise each and sum.

    Both sources are scaled to ``reference_rms`` before the masker gain
    ``10^(-tmr/20)``. The masker is trimmed or looped to the target length.
    Returns a :class:`Mixture` whose stems add exactly to the mixture.
    """
    spatializer = spatializer or ParametricHead()
    target = np.asarray(target, dtype=np.float64)
    masker = match_length(masker, target.size)
    t_rms, m_rms = rms(target), rms(masker)
    if t_rms == 0 or m_rms == 0:
        raise ValueError("sources must have non-zero RMS")
    t_mono = target * (reference_rms / t_rms)
    m_mono = masker * (reference_rms / m_rms) * 10.0 ** (-tmr_db / 20.0)
    t_bin = spatializer.spatialize(t_mono, target_azimuth)
    m_bin = spatializer.spatialize(m_mono, masker_azimuth)
    return Mixture(t_bin + m_bin, t_bin, m_bin,
                   {"target_rms": rms(t_mono), "masker_rms": rms(m_mono), "tmr_db": tmr_db})


def render_scene(spec, spatializer=None, sample_rate=16000):
    """Synthesise a :class:`SceneSpec`; each stem gets its own reverb tail."""
    spatializer = spatializer or ParametricHead(sample_rate=sample_rate)
    t60, drr = room(spec.room)
    target = generate(spec.target.generator, spec.duration, spec.target.seed, sample_rate)
    if spec.masker is None:
        t_mono = target * (REFERENCE_RMS / rms(target))
        t_bin = parametric_reverb(spatializer.spatialize(t_mono, spec.target.azimuth), t60, drr, spec.seed)
        silent = AudioBuffer(np.zeros(len(t_bin)), np.zeros(len(t_bin)), sample_rate)
        return Mixture(t_bin, t_bin, silent, {"tmr_db": np.inf})
    masker = generate(spec.masker.generator, spec.duration, spec.masker.seed, sample_rate)
    mix = mix_at_tmr(target, masker, spec.tmr_db, spec.target.azimuth, spec.masker.azimuth, spatializer)
    t_bin = parametric_reverb(mix.target, t60, drr, 2 * spec.seed)
    m_bin = parametric_reverb(mix.masker, t60, drr, 2 * spec.seed + 1)
    return Mixture(t_bin + m_bin, t_bin, m_bin, mix.metadata)
