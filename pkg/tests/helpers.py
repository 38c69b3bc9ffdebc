"""Shared test fixtures: synthetic source models and tiny networks."""

import numpy as np

from binloc import azimuth_net as an
from binloc.source_models import DiagonalGmm


def background_model(rng, k=3, d=32):
    w = rng.random(k) + 0.3
    return DiagonalGmm(w / w.sum(), rng.normal(-4.0, 1.5, (k, d)), rng.uniform(0.3, 1.5, (k, d)), "bg")


def quiet_target(background, gap=30.0):
    return DiagonalGmm(background.weights, background.means - gap, background.variances, "target")


def sample_mixture(rng, target, background, shift, n_frames=200):
    kx = rng.choice(target.n_components, size=n_frames, p=target.weights)
    kn = rng.choice(background.n_components, size=n_frames, p=background.weights)
    x = rng.normal(target.means[kx], np.sqrt(target.variances[kx]))
    n = rng.normal(background.means[kn] + shift, np.sqrt(background.variances[kn]))
    return np.maximum(x, n)


def tiny_net(rng, sizes=(3, 4, 5, 3)):
    mlp = an.init_mlp(list(sizes), rng)
    for b in mlp.biases:
        b[:] = rng.normal(0, 0.5, b.shape)
    return mlp


def numeric_grads(mlp, z, labels, eps=1e-4):
    out = []
    for p in mlp.params():
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            orig = p[i]
            p[i] = orig + eps
            up, _ = an.loss_and_grads(mlp, z, labels)
            p[i] = orig - eps
            down, _ = an.loss_and_grads(mlp, z, labels)
            p[i] = orig
            g[i] = (up - down) / (2 * eps)
        out.append(g)
    return out


def max_relative_error(analytic, numeric):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.abs(a) + np.abs(n), 1e-8)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst
