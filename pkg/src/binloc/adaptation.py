"""On-the-fly level adaptation of the background model.

A per-band offset ``beta`` is added to every background-model mean and is
re-estimated by EM from the mixed observation itself. The target model is
never adapted.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfcx

from .logmax import logmax_terms
from .source_models import DiagonalGmm

log = logging.getLogger(__name__)

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def truncated_gaussian_mean(mean, variance, upper):
    """``E[n | n <= upper]`` for ``n ~ N(mean, variance)``.

    Uses ``phi(z) / Phi(z) = sqrt(2/pi) / erfcx(-z / sqrt(2))`` so that deep
    truncation (very negative ``z``) stays accurate. Broadcasts.
    """
    variance = np.asarray(variance, dtype=np.float64)
    if np.any(variance <= 0):
        raise ValueError("variance must be positive")
    sd = np.sqrt(variance)
    z = (np.asarray(upper, dtype=np.float64) - mean) / sd
    with np.errstate(over="ignore", invalid="ignore"):
        ratio = SQRT_2_OVER_PI / erfcx(-z / math.sqrt(2.0))
        out = mean - sd * ratio
    # the conditional mean lies strictly below the bound; fall back to it
    # when the tail ratio is not representable
    out = np.where(np.isfinite(out), np.minimum(out, np.nextafter(upper, -np.inf)), upper)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class LevelOffset:
    beta: np.ndarray
    iterations_run: int = 0
    converged: bool = False
    log_likelihood: list = field(default_factory=list)
    step_halvings: int = 0

    def save_csv(self, path):
        np.savetxt(path, self.beta[None, :], delimiter=",", fmt="%.9g",
                   header="# binloc level-offset v1\n" + ",".join(f"band{b:02d}" for b in range(self.beta.size)),
                   comments="")


def apply_offset(background, beta):
    """Return ``background`` with ``beta`` added to every component mean."""
    beta = np.asarray(getattr(beta, "beta", beta), dtype=np.float64)
    if beta.shape != (background.dim,):
        raise ValueError(f"offset has shape {beta.shape}, model dimension is {background.dim}")
    return DiagonalGmm(background.weights, background.means + beta, background.variances,
                       background.label, dict(background.metadata))


def mixture_log_likelihood(frames, target, background, beta):
    """``sum_t log sum_{kx,kn} P(kx) P(kn) p(y_t | kx, kn, beta)``."""
    return float(logmax_terms(frames, target, background, beta).frame_log_likelihood().sum())


def _beta_update(frames, target, background, beta):
    terms = logmax_terms(frames, target, background, beta)
    gamma = terms.gamma  # (T, Kx, Kn)
    alpha = terms.tpp  # (T, Kx, Kn, D)
    y = frames[:, None, :]
    n_tilde = truncated_gaussian_mean(background.means + beta, background.variances, y)  # (T, Kn, D)
    n_bar = alpha * n_tilde[:, None] + (1.0 - alpha) * frames[:, None, None, :]
    dev = n_bar - background.means[None, None]
    new_beta = np.einsum("tij,tijf->f", gamma, dev) / frames.shape[0]
    return new_beta, float(terms.frame_log_likelihood().sum())


def adapt_background(background, target, frames, max_iters=30, tol=1e-3, beta0=None, max_halvings=20):
    """Estimate the background level offset from mixed log-ratemap frames.

    Each iteration applies the closed-form update
    ``beta_f = 1/T sum_t sum_{kx,kn} gamma (n_bar - mu_n)`` computed under
    the current estimate, where ``n_bar`` mixes the truncated-Gaussian
    background estimate (target-dominated case) with the observation
    (background-dominated case). If the mixture likelihood would drop, the
    step toward the new value is halved. Stops when ``max |delta beta| < tol``.
    """
    frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    if frames.shape[0] == 0:
        raise ValueError("at least one frame is required")
    if frames.shape[1] != background.dim or target.dim != background.dim:
        raise ValueError("frame and model dimensions must agree")
    beta = np.zeros(background.dim) if beta0 is None else np.array(beta0, dtype=np.float64)
    result = LevelOffset(beta=beta.copy())
    if max_iters <= 0:
        return result

    proposal, current_ll = _beta_update(frames, target, background, beta)
    result.log_likelihood.append(current_ll)
    for it in range(max_iters):
        step = proposal - beta
        candidate = proposal
        cand_proposal, cand_ll = _beta_update(frames, target, background, candidate)
        halvings = 0
        while cand_ll < current_ll - 1e-9 * abs(current_ll) and halvings < max_halvings:
            step = 0.5 * step
            candidate = beta + step
            cand_proposal, cand_ll = _beta_update(frames, target, background, candidate)
            halvings += 1
        if halvings:
            result.step_halvings += halvings
            log.debug("adaptation iteration %d: step halved %d times", it, halvings)
        if cand_ll < current_ll - 1e-9 * abs(current_ll):
            # no ascent direction found along the update; keep the estimate
            result.iterations_run = it + 1
            result.converged = True
            break
        beta, proposal, current_ll = candidate, cand_proposal, cand_ll
        result.log_likelihood.append(current_ll)
        result.iterations_run = it + 1
        if np.max(np.abs(step)) < tol:
            result.converged = True
            break
    result.beta = beta
    return result
