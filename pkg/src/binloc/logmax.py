"""Target-dominance weights under the log-max interaction model.

For an observed log-ratemap frame ``y`` and two diagonal GMMs (target and
background) every band is explained either by the target (``x = y``,
``n <= y``) or by the background (``n = y``, ``x < y``). The localisation
weight of a band is the posterior probability of the first case,
averaged over all component pairs with their joint posteriors.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from .source_models import gaussian_eval, log_normal_cdf, log_normal_pdf

LOG_FLOOR = -700.0


@dataclass(frozen=True)
class LogmaxTerms:
    """Log-domain pieces of the pair likelihood for a block of frames.

    ``log_target`` is ``log p_x(y|kx) + log C_n(y|kn)`` and ``log_masker``
    is ``log p_n(y|kn) + log C_x(y|kx)``; both shaped ``(T, Kx, Kn, D)``.
    """

    log_target: np.ndarray
    log_masker: np.ndarray
    log_band: np.ndarray  # floored log p(y_f | kx, kn)
    log_pair: np.ndarray  # (T, Kx, Kn): sum over bands
    log_joint: np.ndarray  # (T, Kx, Kn): log_pair + log P(kx) + log P(kn)

    @property
    def gamma(self):
        norm = logsumexp(self.log_joint, axis=(1, 2), keepdims=True)
        g = np.exp(self.log_joint - norm)
        bad = ~np.isfinite(norm[:, 0, 0])
        if np.any(bad):
            g[bad] = 1.0 / (g.shape[1] * g.shape[2])
        return g

    @property
    def tpp(self):
        return _tpp_from_logs(self.log_target, self.log_masker)

    def frame_log_likelihood(self):
        """``log sum_{kx,kn} P(kx) P(kn) p(y_t | kx, kn)`` per frame."""
        return logsumexp(self.log_joint, axis=(1, 2))


def _check_dims(frames, target, background):
    frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    if target.dim != background.dim:
        raise ValueError(f"target dimension {target.dim} != background dimension {background.dim}")
    if frames.shape[-1] != target.dim:
        raise ValueError(f"frame dimension {frames.shape[-1]} != model dimension {target.dim}")
    return frames


def _tpp_from_logs(log_target, log_masker):
    # logistic of the log ratio: exactly 0.5 for equal terms, 0.5 when both vanish
    with np.errstate(invalid="ignore"):
        tpp = expit(log_target - log_masker)
    return np.where(np.isfinite(np.logaddexp(log_target, log_masker)), tpp, 0.5)


def logmax_terms(frames, target, background, background_offset=None):
    """Evaluate the log-max pair likelihood terms for every frame.

    ``background_offset`` (length ``D``) shifts the background means, as
    used by level adaptation.
    """
    frames = _check_dims(frames, target, background)
    mu_n = background.means if background_offset is None else background.means + np.asarray(background_offset)
    y = frames[:, None, :]
    lpx = log_normal_pdf(y, target.means, target.variances)  # (T, Kx, D)
    lcx = log_normal_cdf(y, target.means, target.variances)
    lpn = log_normal_pdf(y, mu_n, background.variances)  # (T, Kn, D)
    lcn = log_normal_cdf(y, mu_n, background.variances)
    log_target = lpx[:, :, None, :] + lcn[:, None, :, :]
    log_masker = lpn[:, None, :, :] + lcx[:, :, None, :]
    log_band = np.maximum(np.logaddexp(log_target, log_masker), LOG_FLOOR)
    log_pair = log_band.sum(-1)
    log_joint = log_pair + np.log(target.weights)[:, None] + np.log(background.weights)[None, :]
    return LogmaxTerms(log_target, log_masker, log_band, log_pair, log_joint)


def pair_observation_loglik(y, target, background, kx, kn):
    """Per-band ``p(y_f | kx, kn)`` and the total ``log p(y | kx, kn)`` for one pair.

    The per-band values follow the closed form
    ``p_x(y) C_n(y) + p_n(y) C_x(y)``, evaluated with :func:`gaussian_eval`;
    the total sums per-band logs, each floored at -700.
    """
    y = _check_dims(y, target, background)[0]
    dens = np.empty(y.size)
    for f, yf in enumerate(y):
        gx = gaussian_eval(target.means[kx, f], target.variances[kx, f], yf)
        gn = gaussian_eval(background.means[kn, f], background.variances[kn, f], yf)
        dens[f] = gx.pdf * gn.cdf + gn.pdf * gx.cdf
    # log-domain total so that underflowing bands still contribute
    terms = logmax_terms(y, target, background)
    total = float(terms.log_pair[0, kx, kn])
    return dens, total


def pair_posteriors(y, target, background):
    """Posterior over component pairs ``gamma[kx, kn]`` for one frame."""
    return logmax_terms(y, target, background).gamma[0]


def target_presence_tpp(y, target_mean, target_var, background_mean, background_var):
    """Probability that the target explains ``y`` given one component pair.

    ``p_x(y) C_n(y) / (p_x(y) C_n(y) + p_n(y) C_x(y))``; returns 0.5 when
    both terms underflow. Broadcasts over array arguments.
    """
    tv = np.asarray(target_var, dtype=np.float64)
    bv = np.asarray(background_var, dtype=np.float64)
    if np.any(tv <= 0) or np.any(bv <= 0):
        raise ValueError("variances must be positive")
    lt = log_normal_pdf(y, target_mean, tv) + log_normal_cdf(y, background_mean, bv)
    lm = log_normal_pdf(y, background_mean, bv) + log_normal_cdf(y, target_mean, tv)
    out = _tpp_from_logs(lt, lm)
    return float(out) if np.ndim(out) == 0 else out


def localisation_weights(frames, target, background, background_offset=None, block=256):
    """Weights ``omega[t, f]`` in [0, 1]: the expected target presence per bin.

    ``omega_f = sum_{kx,kn} gamma^(kx,kn) TPP_f(kx, kn)``. Frames are
    processed independently, in blocks of ``block`` to bound memory.
    """
    frames = _check_dims(frames, target, background)
    out = np.empty(frames.shape)
    for start in range(0, frames.shape[0], block):
        terms = logmax_terms(frames[start:start + block], target, background, background_offset)
        out[start:start + block] = np.einsum("tij,tijf->tf", terms.gamma, terms.tpp)
    return np.clip(out, 0.0, 1.0)


def save_weight_mask_csv(path, weights):
    """Write a ``(frames, bands)`` weight mask as CSV with a versioned header."""
    weights = np.asarray(weights)
    header = "# binloc weight-mask v1\n" + ",".join(f"band{b:02d}" for b in range(weights.shape[1]))
    np.savetxt(path, weights, delimiter=",", fmt="%.6f", header=header, comments="")
