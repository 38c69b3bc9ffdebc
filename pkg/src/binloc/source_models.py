"""Diagonal-covariance Gaussian mixture models of log-ratemap spectra."""

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_ndtr, logsumexp, ndtr

log = logging.getLogger(__name__)

GMM_FORMAT_VERSION = 1
VARIANCE_FLOOR = 1e-3
LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianEval:
    pdf: float
    cdf: float


def gaussian_eval(mean, variance, y):
    """Scalar Gaussian density and cumulative probability at ``y``."""
    if not variance > 0:
        raise ValueError(f"variance must be positive, got {variance}")
    sd = math.sqrt(variance)
    z = (y - mean) / sd
    pdf = math.exp(-0.5 * z * z) / (sd * math.sqrt(2.0 * math.pi))
    cdf = 0.5 * math.erfc(-z / math.sqrt(2.0))
    return GaussianEval(pdf, min(cdf, 1.0))


def log_normal_pdf(y, mean, variance):
    """Elementwise log N(y; mean, variance)."""
    return -0.5 * (LOG_2PI + np.log(variance) + (y - mean) ** 2 / variance)


def log_normal_cdf(y, mean, variance):
    return log_ndtr((y - mean) / np.sqrt(variance))


def normal_cdf(y, mean, variance):
    return ndtr((y - mean) / np.sqrt(variance))


@dataclass(frozen=True)
class DiagonalGmm:
    weights: np.ndarray  # (K,)
    means: np.ndarray  # (K, D)
    variances: np.ndarray  # (K, D)
    label: str = ""
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        mu = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        var = np.atleast_2d(np.asarray(self.variances, dtype=np.float64))
        if w.size < 1:
            raise ValueError("a mixture needs at least one component")
        if mu.shape != var.shape or mu.shape[0] != w.size:
            raise ValueError(f"inconsistent shapes: weights {w.shape}, means {mu.shape}, variances {var.shape}")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights must be a probability vector (sum={w.sum()!r})")
        if np.any(~(var > 0)):
            raise ValueError("variances must be positive")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(var))):
            raise ValueError("parameters must be finite")
        for name, arr in (("weights", w), ("means", mu), ("variances", var)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_components(self):
        return self.weights.size

    @property
    def dim(self):
        return self.means.shape[1]

    def component_log_likelihood(self, frames):
        """``log w_k + log N(y; mu_k, Sigma_k)`` for each frame, shape ``(T, K)``."""
        frames = self._check_frames(frames)
        quad = np.einsum("tkd->tk", (frames[:, None, :] - self.means) ** 2 / self.variances)
        logdet = np.sum(np.log(self.variances), axis=1)
        return np.log(self.weights) - 0.5 * (self.dim * LOG_2PI + logdet + quad)

    def _check_frames(self, frames):
        frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
        if frames.shape[-1] != self.dim:
            raise ValueError(f"frame dimension {frames.shape[-1]} does not match model dimension {self.dim}")
        return frames

    def to_dict(self):
        return {
            "version": GMM_FORMAT_VERSION,
            "label": self.label,
            "K": int(self.n_components),
            "dim": int(self.dim),
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("version") != GMM_FORMAT_VERSION:
            raise ValueError(f"unsupported GMM document version {doc.get('version')!r}")
        model = cls(doc["weights"], doc["means"], doc["variances"], doc.get("label", ""), doc.get("metadata", {}))
        if model.n_components != doc["K"] or model.dim != doc["dim"]:
            raise ValueError("GMM document K/dim do not match its arrays")
        return model

    def save(self, path):
        # repr-based float formatting round-trips doubles exactly
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def gmm_log_likelihood(model, frames):
    """``log sum_k w_k prod_f N(y_f; mu_kf, var_kf)``.

    Accepts one frame ``(D,)`` (returns a float) or ``(T, D)`` (returns ``(T,)``).
    """
    single = np.ndim(frames) == 1
    ll = logsumexp(model.component_log_likelihood(frames), axis=1)
    return float(ll[0]) if single else ll


def _kmeans(data, k, rng, n_iter=10, subset=5000):
    idx = rng.choice(data.shape[0], size=min(subset, data.shape[0]), replace=False)
    sample = data[np.sort(idx)]
    centres = sample[rng.choice(sample.shape[0], size=k, replace=False)].copy()
    for _ in range(n_iter):
        d2 = ((sample[:, None, :] - centres[None]) ** 2).sum(-1)
        assign = d2.argmin(1)
        for j in range(k):
            members = sample[assign == j]
            if members.shape[0]:
                centres[j] = members.mean(0)
    return centres


@dataclass
class EmTrace:
    log_likelihood: list = field(default_factory=list)
    reseeded: list = field(default_factory=list)
    converged: bool = False


def gmm_fit_em(data, n_components, max_iters=100, tol=1e-5, seed=0, label="",
               variance_floor=VARIANCE_FLOOR, return_trace=False):
    """Fit a diagonal GMM by EM from a k-means initialisation.

    Iterates until the relative change of the total log-likelihood falls
    below ``tol`` or ``max_iters`` is reached. A component whose
    responsibility mass collapses is re-seeded on the worst-explained
    data point.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError("data must be (frames, dim)")
    n, dim = data.shape
    k = int(n_components)
    if k < 1:
        raise ValueError("n_components must be >= 1")
    if n < 10 * k:
        raise ValueError(f"need at least {10 * k} frames for {k} components, got {n}")
    rng = np.random.default_rng(seed)

    means = _kmeans(data, k, rng)
    global_var = np.maximum(data.var(0), variance_floor)
    d2 = ((data[:, None, :] - means[None]) ** 2).sum(-1)
    resp = np.zeros((n, k))
    resp[np.arange(n), d2.argmin(1)] = 1.0
    _reseed(resp, -d2.min(1))
    weights, means, variances = _m_step(data, resp, variance_floor, global_var)

    trace = EmTrace()
    prev = -np.inf
    for it in range(max_iters):
        model = DiagonalGmm(weights, means, variances, label)
        comp = model.component_log_likelihood(data)
        frame_ll = logsumexp(comp, axis=1)
        total = float(frame_ll.sum())
        trace.log_likelihood.append(total)
        if np.isfinite(prev) and abs(total - prev) <= tol * abs(prev):
            trace.converged = True
            break
        prev = total
        resp = np.exp(comp - frame_ll[:, None])
        empty = _reseed(resp, frame_ll)
        if empty.size:
            trace.reseeded.append(it)
            log.debug("EM iteration %d: re-seeded components %s", it, empty.tolist())
        weights, means, variances = _m_step(data, resp, variance_floor, global_var)

    model = DiagonalGmm(weights, means, variances, label,
                        {"em_iterations": len(trace.log_likelihood), "log_likelihood": trace.log_likelihood[-1]})
    return (model, trace) if return_trace else model


def _reseed(resp, score):
    """Give every collapsed component the frame with the lowest ``score``."""
    n = resp.shape[0]
    empty = np.flatnonzero(resp.sum(0) < 1e-8 * n)
    if empty.size:
        worst = np.argsort(score, kind="stable")[: empty.size]
        for j, i in zip(empty, worst):
            resp[:, j] = 0.0
            resp[i, :] = 0.0
            resp[i, j] = 1.0
    return empty


def _m_step(data, resp, variance_floor, fallback_var):
    mass = resp.sum(0)
    weights = mass / mass.sum()
    safe = np.maximum(mass, 1e-300)[:, None]
    means = resp.T @ data / safe
    variances = np.empty_like(means)
    for j in range(means.shape[0]):
        variances[j] = resp[:, j] @ (data - means[j]) ** 2 / safe[j]
    variances = np.maximum(variances, variance_floor)
    dead = mass <= 0
    if np.any(dead):
        variances[dead] = fallback_var
    return weights, means, variances
