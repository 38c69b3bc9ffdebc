"""Fusion of band posteriors across frequency and time, and azimuth picking."""

from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from .azimuth_net import AZIMUTH_GRID, AZIMUTH_STEP, N_AZIMUTHS

POSTERIOR_FLOOR = 1e-12


@dataclass(frozen=True)
class LocalisationResult:
    posterior: np.ndarray  # (72,)
    estimates: list  # azimuths in degrees on the 0..355 grid, ascending
    frame_posteriors: np.ndarray  # (T, 72)


def fuse_frames(band_posteriors, weights):
    """Weighted product of band posteriors per frame, renormalised over azimuth.

    ``band_posteriors`` is ``(T, bands, 72)`` and ``weights`` ``(T, bands)``;
    the product ``prod_f P(phi|o_tf)^w_tf`` is accumulated in the log domain.
    """
    logp = np.log(np.maximum(band_posteriors, POSTERIOR_FLOOR))
    score = np.einsum("tf,tfa->ta", np.asarray(weights, dtype=np.float64), logp)
    return softmax(score, axis=-1)


def fuse_frame(band_posteriors, weights):
    """Single-frame version of :func:`fuse_frames`: ``(bands, 72)``, ``(bands,)``."""
    return fuse_frames(np.asarray(band_posteriors)[None], np.asarray(weights)[None])[0]


def fuse_segment(frame_posteriors):
    """Average frame posteriors over time."""
    frame_posteriors = np.asarray(frame_posteriors, dtype=np.float64)
    if frame_posteriors.ndim != 2 or frame_posteriors.shape[0] == 0:
        raise ValueError("need at least one frame posterior")
    return frame_posteriors.mean(0)


def circular_distance(a, b):
    d = np.abs(np.asarray(a, dtype=np.float64) - b) % 360.0
    return np.minimum(d, 360.0 - d)


def wrap_azimuth(deg):
    """Map any azimuth in degrees onto [0, 360)."""
    return np.mod(deg, 360.0)


def pick_azimuths(posterior, n_sources=1, min_separation=10.0):
    """Greedy circular peak picking on the 72-bin posterior.

    Takes the global maximum, suppresses every bin within ``min_separation``
    degrees of it, and repeats. If the suppression leaves too few bins the
    remaining picks fall back to the highest unused bins. Ties go to the
    lower azimuth index; estimates are returned sorted ascending.
    """
    if n_sources < 1:
        raise ValueError("n_sources must be >= 1")
    posterior = np.asarray(posterior, dtype=np.float64)
    available = np.ones(posterior.size, dtype=bool)
    picked = []
    for _ in range(min(n_sources, posterior.size)):
        if available.any():
            idx = int(np.argmax(np.where(available, posterior, -np.inf)))
        else:
            used = np.zeros(posterior.size, dtype=bool)
            used[picked] = True
            idx = int(np.argmax(np.where(used, -np.inf, posterior)))
        picked.append(idx)
        grid = np.arange(posterior.size) * (360.0 / posterior.size)
        available &= circular_distance(grid, grid[idx]) > min_separation
        available[picked] = False
    return sorted(float(i * 360.0 / posterior.size) for i in picked)


@dataclass(frozen=True)
class GraceResult:
    hit: bool
    front_back: bool


def front_back_mirror(azimuth):
    return wrap_azimuth(180.0 - azimuth)


def grace_match(estimates, true_azimuth, grace=5.0):
    """Score estimates against the true target azimuth.

    A hit is any estimate within ``grace`` degrees (circular, inclusive). A
    miss counts as a front-back error when some estimate is within ``grace``
    of the mirror image across the interaural axis.
    """
    if grace < 0:
        raise ValueError("grace must be non-negative")
    est = np.asarray(estimates, dtype=np.float64)
    if est.size == 0:
        return GraceResult(False, False)
    hit = bool(np.any(circular_distance(est, true_azimuth) <= grace + 1e-9))
    fb = (not hit) and bool(np.any(circular_distance(est, front_back_mirror(true_azimuth)) <= grace + 1e-9))
    return GraceResult(hit, fb)


def localise(band_posteriors, weights=None, n_sources=1, min_separation=10.0):
    """Fuse ``(T, bands, 72)`` band posteriors with optional ``(T, bands)`` weights."""
    if weights is None:
        weights = np.ones(band_posteriors.shape[:2])
    frames = fuse_frames(band_posteriors, weights)
    posterior = fuse_segment(frames)
    return LocalisationResult(posterior, pick_azimuths(posterior, n_sources, min_separation), frames)


__all__ = [
    "AZIMUTH_GRID", "AZIMUTH_STEP", "N_AZIMUTHS", "LocalisationResult", "GraceResult",
    "fuse_frame", "fuse_frames", "fuse_segment", "pick_azimuths", "grace_match",
    "circular_distance", "wrap_azimuth", "front_back_mirror", "localise",
]
