"""Per-band azimuth classifiers.

Each frequency band has its own small MLP (34 -> 128 -> 128 -> 72, sigmoid
hidden units, softmax output) mapping the z-scored CCF+ILD feature of one
time-frequency bin to a posterior over the 72 azimuths of the 5-degree grid.
"""

import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_softmax, softmax

log = logging.getLogger(__name__)

N_AZIMUTHS = 72
AZIMUTH_STEP = 5
AZIMUTH_GRID = np.arange(N_AZIMUTHS) * AZIMUTH_STEP
N_FEATURES = 34
HIDDEN = (128, 128)
STD_FLOOR = 1e-6
BUNDLE_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 128
    learning_rate: float = 0.05
    momentum: float = 0.9
    decay_every: int = 10
    decay_factor: float = 0.5
    holdout_fraction: float = 0.1


@dataclass
class BandMlp:
    """Sigmoid MLP with softmax output and built-in input normalisation.

    ``weights[i]`` has shape ``(n_in, n_out)``; layers are ordered input to
    output.
    """

    weights: list
    biases: list
    norm_mean: np.ndarray
    norm_std: np.ndarray
    band_index: int = 0
    metadata: dict = field(default_factory=dict)

    @property
    def layer_sizes(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def normalize(self, features):
        return normalize_input(features, self.norm_mean, self.norm_std)

    def logits(self, z):
        """Output-layer pre-activations for already-normalised input."""
        h = np.asarray(z, dtype=np.float64)
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = expit(h @ w + b)
        return h @ self.weights[-1] + self.biases[-1]

    def forward(self, features):
        """Posterior over classes for raw (unnormalised) features, ``(..., n_classes)``."""
        return softmax(self.logits(self.normalize(features)), axis=-1)

    def params(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out


def normalize_input(features, mean, std):
    return (np.asarray(features, dtype=np.float64) - mean) / np.maximum(std, STD_FLOOR)


def normalization_stats(features):
    features = np.asarray(features, dtype=np.float64)
    return features.mean(0), np.maximum(features.std(0), STD_FLOOR)


def forward(mlp, feature):
    """Azimuth posterior of one normalised feature vector or a batch."""
    return softmax(mlp.logits(feature), axis=-1)


def init_mlp(layer_sizes, rng, band_index=0):
    """Xavier-uniform weights, zero biases, identity normalisation."""
    weights, biases = [], []
    for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        limit = np.sqrt(6.0 / (n_in + n_out))
        weights.append(rng.uniform(-limit, limit, size=(n_in, n_out)))
        biases.append(np.zeros(n_out))
    return BandMlp(weights, biases, np.zeros(layer_sizes[0]), np.ones(layer_sizes[0]), band_index)


def loss_and_grads(mlp, z, labels):
    """Mean cross-entropy and its gradients for normalised inputs ``z``.

    Returns ``(loss, grads)`` where ``grads`` follows the order of
    :meth:`BandMlp.params` (w0, b0, w1, b1, ...).
    """
    activations = [np.asarray(z, dtype=np.float64)]
    for w, b in zip(mlp.weights[:-1], mlp.biases[:-1]):
        activations.append(expit(activations[-1] @ w + b))
    logits = activations[-1] @ mlp.weights[-1] + mlp.biases[-1]
    logp = log_softmax(logits, axis=-1)
    n = z.shape[0]
    loss = -np.mean(logp[np.arange(n), labels])

    delta = np.exp(logp)
    delta[np.arange(n), labels] -= 1.0
    delta /= n
    grads = []
    for layer in range(len(mlp.weights) - 1, -1, -1):
        a = activations[layer]
        grads.append(delta.sum(0))
        grads.append(a.T @ delta)
        if layer:
            delta = (delta @ mlp.weights[layer].T) * a * (1.0 - a)
    grads.reverse()
    # reversed list is (w0, b0, w1, b1, ...)
    return loss, grads


def train_band(features, labels, config=TrainConfig(), seed=0, band_index=0,
               n_classes=N_AZIMUTHS, hidden=HIDDEN):
    """Train one band classifier by mini-batch SGD with momentum.

    A held-out split (``config.holdout_fraction``) is scored after
    training and stored in ``metadata["holdout_accuracy"]``; the per-epoch
    mean training loss goes to ``metadata["epoch_loss"]``.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("training set is empty")
    if x.shape[0] != y.shape[0]:
        raise ValueError("features and labels differ in length")
    if np.unique(y).size < 2:
        raise ValueError("training set needs at least two classes")
    rng = np.random.default_rng(seed)

    order = rng.permutation(x.shape[0])
    n_hold = int(round(config.holdout_fraction * x.shape[0]))
    hold, train = order[:n_hold], order[n_hold:]
    mean, std = normalization_stats(x[train])
    z_train = normalize_input(x[train], mean, std)
    y_train = y[train]

    mlp = init_mlp([x.shape[1], *hidden, n_classes], rng, band_index)
    mlp.norm_mean, mlp.norm_std = mean, std
    velocity = [np.zeros_like(p) for p in mlp.params()]
    epoch_loss = []
    for epoch in range(config.epochs):
        lr = config.learning_rate * config.decay_factor ** (epoch // config.decay_every)
        perm = rng.permutation(z_train.shape[0])
        total = 0.0
        for start in range(0, perm.size, config.batch_size):
            idx = perm[start:start + config.batch_size]
            loss, grads = loss_and_grads(mlp, z_train[idx], y_train[idx])
            total += loss * idx.size
            for p, v, g in zip(mlp.params(), velocity, grads):
                v *= config.momentum
                v -= lr * g
                p += v
        epoch_loss.append(total / perm.size)
        log.debug("band %d epoch %d loss %.4f", band_index, epoch, epoch_loss[-1])

    mlp.metadata["epoch_loss"] = epoch_loss
    mlp.metadata["n_train"] = int(train.size)
    if n_hold:
        pred = mlp.forward(x[hold]).argmax(-1)
        mlp.metadata["holdout_accuracy"] = float(np.mean(pred == y[hold]))
    return mlp


# -- model bundle -----------------------------------------------------------

def _band_path(directory, band):
    return os.path.join(directory, f"band_{band:02d}.bin")


def save_bundle(directory, mlps):
    """Write band classifiers as flat little-endian float64 files plus a manifest.

    Each ``band_XX.bin`` holds, in order: norm_mean, norm_std, then per layer
    (input to output) the row-major ``(n_in, n_out)`` weight matrix and the
    bias vector.
    """
    os.makedirs(directory, exist_ok=True)
    manifest = {
        "version": BUNDLE_VERSION,
        "azimuth_grid_deg": AZIMUTH_GRID.tolist(),
        "feature_layout": {"ccf_lags": list(range(-16, 17)), "ild_db": 33, "n_features": N_FEATURES},
        "layer_sizes": mlps[0].layer_sizes,
        "activation": ["sigmoid"] * (len(mlps[0].weights) - 1) + ["softmax"],
        "layout": "norm_mean, norm_std, (W row-major [n_in, n_out], b) per layer input->output; float64 little-endian",
        "bands": [],
    }
    for mlp in mlps:
        blob = np.concatenate([mlp.norm_mean, mlp.norm_std] + [p.ravel() for p in mlp.params()])
        blob.astype("<f8").tofile(_band_path(directory, mlp.band_index))
        manifest["bands"].append({"band": mlp.band_index, "file": os.path.basename(_band_path(directory, mlp.band_index)),
                                  "metadata": mlp.metadata})
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1)


def load_bundle(directory):
    path = os.path.join(directory, "manifest.json")
    if not os.path.exists(path):
        raise FileNotFoundError(f"no classifier bundle at {directory}")
    with open(path) as fh:
        manifest = json.load(fh)
    if manifest.get("version") != BUNDLE_VERSION:
        raise ValueError(f"unsupported bundle version {manifest.get('version')!r}")
    sizes = manifest["layer_sizes"]
    mlps = []
    for entry in manifest["bands"]:
        blob = np.fromfile(os.path.join(directory, entry["file"]), dtype="<f8")
        pos = 0

        def take(n, shape=None):
            nonlocal pos
            arr = blob[pos:pos + n]
            pos += n
            return arr.reshape(shape) if shape else arr.copy()

        mean, std = take(sizes[0]), take(sizes[0])
        weights, biases = [], []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            weights.append(take(n_in * n_out, (n_in, n_out)).copy())
            biases.append(take(n_out))
        if pos != blob.size:
            raise ValueError(f"{entry['file']}: size does not match declared layout")
        mlps.append(BandMlp(weights, biases, mean, std, entry["band"], entry.get("metadata", {})))
    return mlps


def band_posteriors(mlps, features):
    """Apply each band's classifier; ``features`` is ``(T, bands, 34)``, result ``(T, bands, 72)``."""
    features = np.asarray(features)
    out = np.empty(features.shape[:2] + (mlps[0].weights[-1].shape[1],))
    for mlp in mlps:
        out[:, mlp.band_index] = mlp.forward(features[:, mlp.band_index])
    return out
