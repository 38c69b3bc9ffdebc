"""Multi-condition training data for the band classifiers.

Clean utterances are spatialised at every grid azimuth, mixed with a
diffuse noise field at several SNRs, and reduced to CCF+ILD features. Only
time-frequency bins whose a-priori SNR (from the premixed stems) exceeds the
gate are kept.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .azimuth_net import AZIMUTH_GRID
from .frontend import AudioBuffer, FilterbankOutput, band_frame_energy, features_from_filterbank, gammatone_analyze
from .sim.scene import REFERENCE_RMS, rms

log = logging.getLogger(__name__)

SNR_GATE_DB = -5.0


@dataclass
class MctDataset:
    features: list  # per band: (N_b, 34)
    labels: list  # per band: (N_b,) azimuth class index
    stats: dict = field(default_factory=dict)

    @property
    def n_bands(self):
        return len(self.features)

    def save(self, path):
        arrays = {}
        for b, (x, y) in enumerate(zip(self.features, self.labels)):
            arrays[f"x{b:02d}"] = x
            arrays[f"y{b:02d}"] = y
        np.savez_compressed(path, **arrays)

    @classmethod
    def load(cls, path):
        with np.load(path) as data:
            n = len([k for k in data.files if k.startswith("x")])
            return cls([data[f"x{b:02d}"] for b in range(n)], [data[f"y{b:02d}"] for b in range(n)])


def a_priori_snr_db(target_energy, noise_energy, floor=1e-12):
    return 10.0 * np.log10(np.maximum(target_energy, floor) / np.maximum(noise_energy, floor))


def _combine(fb_a, fb_b, gain):
    return FilterbankOutput(fb_a.bands + gain * fb_b.bands, fb_a.center_frequencies, fb_a.sample_rate)


def _excerpt(field_, n, rng):
    start = int(rng.integers(0, len(field_) - n + 1))
    return AudioBuffer(field_.left[start:start + n], field_.right[start:start + n], field_.sample_rate)


def mixture_gate(target_fb, noise_fb, noise_gain, gate_db=SNR_GATE_DB):
    """Boolean ``(frames, bands)`` mask of bins whose a-priori SNR exceeds ``gate_db``."""
    et = band_frame_energy(target_fb[0]) + band_frame_energy(target_fb[1])
    if noise_fb is None:
        en = np.zeros_like(et)
    else:
        en = noise_gain**2 * (band_frame_energy(noise_fb[0]) + band_frame_energy(noise_fb[1]))
    return a_priori_snr_db(et, en) > gate_db


def build_mct_dataset(utterances, spatializer, snrs=(20.0, 10.0, 0.0), diffuse=None, seed=0,
                      azimuths=AZIMUTH_GRID, gate_db=SNR_GATE_DB):
    """Assemble per-band training sets.

    ``utterances[i]`` is the list of mono signals rendered at ``azimuths[i]``.
    ``snrs`` may contain ``None`` for a noise-free copy; otherwise a long
    ``diffuse`` field is required, from which random excerpts are taken.
    """
    if any(s is not None for s in snrs) and diffuse is None:
        raise ValueError("a diffuse field is required for finite SNRs")
    rng = np.random.default_rng(seed)
    per_band_x, per_band_y = None, None
    kept = total = 0
    for cls, (az, utts) in enumerate(zip(azimuths, utterances)):
        for mono in utts:
            mono = np.asarray(mono, dtype=np.float64) * (REFERENCE_RMS / rms(mono))
            tgt = spatializer.spatialize(mono, float(az))
            fb_t = gammatone_analyze(tgt)
            fb_n = None
            if diffuse is not None:
                noise = _excerpt(diffuse, len(tgt), rng)
                fb_n = gammatone_analyze(noise)
                p_t = np.mean(tgt.left**2) + np.mean(tgt.right**2)
                p_n = np.mean(noise.left**2) + np.mean(noise.right**2)
            for snr in snrs:
                if snr is None:
                    gain = 0.0
                    fb = fb_t
                else:
                    gain = np.sqrt(p_t / p_n / 10.0 ** (snr / 10.0))
                    fb = (_combine(fb_t[0], fb_n[0], gain), _combine(fb_t[1], fb_n[1], gain))
                feats = features_from_filterbank(*fb).features.stacked()  # (T, B, 34)
                mask = mixture_gate(fb_t, fb_n if snr is not None else None, gain, gate_db)
                if per_band_x is None:
                    per_band_x = [[] for _ in range(feats.shape[1])]
                    per_band_y = [[] for _ in range(feats.shape[1])]
                for b in range(feats.shape[1]):
                    sel = feats[mask[:, b], b]
                    per_band_x[b].append(sel)
                    per_band_y[b].append(np.full(sel.shape[0], cls, dtype=np.int64))
                kept += int(mask.sum())
                total += mask.size
    if per_band_x is None:
        raise ValueError("no utterances supplied")
    features = [np.concatenate(x) for x in per_band_x]
    labels = [np.concatenate(y) for y in per_band_y]
    log.info("MCT dataset: kept %d of %d band-frames", kept, total)
    return MctDataset(features, labels, {"kept": kept, "total": total})
