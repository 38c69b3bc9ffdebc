"""Training of the band classifiers and the spectral source models."""

import logging
import os
import zlib
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..azimuth_net import TrainConfig, load_bundle, save_bundle, train_band
from ..frontend import analyze
from ..mct import MctDataset, build_mct_dataset
from ..sim.generators import generate, speech_like
from ..sim.head import HrirCatalog, ParametricHead, diffuse_field
from ..sim.reverb import parametric_reverb, room
from ..sim.scene import REFERENCE_RMS, rms
from ..source_models import DiagonalGmm, gmm_fit_em

log = logging.getLogger(__name__)

TRAIN_FRACTION = 0.8


class ModelNotFound(FileNotFoundError):
    """A trained model required by the command is missing (CLI exit code 3)."""


def stream(seed, *labels):
    """Independent RNG for ``(seed, labels...)``; labels may be strings or ints."""
    keys = [zlib.crc32(str(x).encode()) if not isinstance(x, (int, np.integer)) else int(x) for x in labels]
    return np.random.default_rng(np.random.SeedSequence([int(seed), *keys]))


def make_spatializer(cfg):
    if cfg.hrir_dir:
        return HrirCatalog(cfg.hrir_dir, cfg.sample_rate)
    return ParametricHead(sample_rate=cfg.sample_rate)


# -- localisation classifiers -------------------------------------------------

def training_utterances(cfg, n_azimuths=72):
    """Speech-like training utterances per grid azimuth.

    Talker parameters (f0, formant scale) are drawn per utterance so the
    classifiers never see the exact presets used for testing.
    """
    rng = stream(cfg.seed, "mct-utterances")
    out = []
    for _ in range(n_azimuths):
        utts = []
        for _ in range(cfg.mct.utterances_per_azimuth):
            utts.append(speech_like(cfg.mct.utterance_duration, int(rng.integers(2**31)), cfg.sample_rate,
                                    f0=float(rng.uniform(90.0, 250.0)), formant_scale=float(rng.uniform(0.95, 1.2))))
        out.append(utts)
    return out


def build_training_set(cfg):
    spatializer = make_spatializer(cfg)
    snrs = [None if s is None else float(s) for s in cfg.mct.snrs]
    diffuse = None
    if any(s is not None for s in snrs):
        diffuse = diffuse_field(cfg.mct.diffuse_duration, seed=int(stream(cfg.seed, "diffuse").integers(2**31)),
                                sample_rate=cfg.sample_rate, spatializer=spatializer)
    return build_mct_dataset(training_utterances(cfg), spatializer, snrs=snrs, diffuse=diffuse,
                             seed=int(stream(cfg.seed, "mct-mix").integers(2**31)))


def _train_one(args):
    x, y, train_cfg, seed, band = args
    return train_band(x, y, train_cfg, seed=seed, band_index=band)


def train_classifiers(cfg, dataset, jobs=1):
    """Train one classifier per band; band ``b`` uses seed ``cfg.seed + b``."""
    train_cfg = TrainConfig(epochs=cfg.mct.epochs, batch_size=cfg.mct.batch_size, learning_rate=cfg.mct.learning_rate)
    tasks = []
    for b in range(dataset.n_bands):
        x, y = dataset.features[b], dataset.labels[b]
        limit = cfg.mct.max_frames_per_band
        if limit and x.shape[0] > limit:
            keep = np.sort(stream(cfg.seed, "mct-subset", b).choice(x.shape[0], size=limit, replace=False))
            x, y = x[keep], y[keep]
        tasks.append((x, y, train_cfg, cfg.seed + b, b))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            mlps = list(pool.map(_train_one, tasks))
    else:
        mlps = [_train_one(t) for t in tasks]
    for m in mlps:
        log.info("band %02d: %d training frames, held-out accuracy %.3f",
                 m.band_index, m.metadata["n_train"], m.metadata.get("holdout_accuracy", float("nan")))
    return mlps


def train_dnn(cfg, jobs=1, dataset=None):
    if dataset is None:
        dataset = build_training_set(cfg)
    mlps = train_classifiers(cfg, dataset, jobs)
    save_bundle(cfg.dnn_dir, mlps)
    return mlps


def load_classifiers(cfg):
    try:
        return load_bundle(cfg.dnn_dir)
    except FileNotFoundError:
        raise ModelNotFound(f"no classifier bundle in {cfg.dnn_dir}; run 'binloc train-dnn' first") from None


# -- source models ----------------------------------------------------------------

def source_material(cfg, source_id, part="train"):
    """The train (first 4/5) or test (last 1/5) share of a source's signal."""
    total = generate(source_id, cfg.gmm.material_duration, int(stream(cfg.seed, "material", source_id).integers(2**31)),
                     cfg.sample_rate)
    cut = int(round(TRAIN_FRACTION * total.size))
    return total[:cut] if part == "train" else total[cut:]


def material_ratemaps(cfg, source_id, part="train", spatializer=None):
    """Log-ratemap frames of spatialised, reverberated chunks of a source.

    Chunks cycle over azimuths -90..90 in ``gmm.azimuth_step`` steps; each
    chunk is scaled to the reference RMS before spatialisation, matching
    the level convention of the test scenes.
    """
    spatializer = spatializer or make_spatializer(cfg)
    signal = source_material(cfg, source_id, part)
    n = int(round(cfg.gmm.chunk_duration * cfg.sample_rate))
    step = cfg.gmm.azimuth_step
    azimuths = [a * step for a in range(int(-90 // step), int(90 // step) + 1)]
    t60, drr = room(cfg.gmm.room)
    frames = []
    for i, start in enumerate(range(0, signal.size - n + 1, n)):
        chunk = signal[start:start + n]
        level = rms(chunk)
        if level == 0:
            continue
        binaural = spatializer.spatialize(chunk * (REFERENCE_RMS / level), float(azimuths[i % len(azimuths)] % 360))
        binaural = parametric_reverb(binaural, t60, drr, seed=i)
        frames.append(analyze(binaural).ratemap)
    if not frames:
        raise ValueError(f"{source_id}: material shorter than one chunk")
    return np.concatenate(frames)


def _subsample(frames, limit, rng):
    if frames.shape[0] <= limit:
        return frames
    return frames[np.sort(rng.choice(frames.shape[0], size=limit, replace=False))]


def fit_source_model(cfg, label, frames):
    k = int(cfg.gmm.components[label])
    data = _subsample(frames, cfg.gmm.max_frames, stream(cfg.seed, "subsample", label))
    model = gmm_fit_em(data, k, seed=int(stream(cfg.seed, "em", label).integers(2**31)), label=label)
    log.info("%s: K=%d fitted on %d frames", label, k, data.shape[0])
    return model


def _fit_source(args):
    cfg, source_id = args
    return fit_source_model(cfg, source_id, material_ratemaps(cfg, source_id))


def train_source_models(cfg, jobs=1, sources=None):
    """Fit and store target and masker models; returns ``{label: DiagonalGmm}``."""
    sources = list(sources if sources is not None else list(cfg.gmm.targets) + list(cfg.gmm.maskers))
    tasks = [(cfg, s) for s in sources]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            models = list(pool.map(_fit_source, tasks))
    else:
        models = [_fit_source(t) for t in tasks]
    os.makedirs(cfg.gmm_dir, exist_ok=True)
    for m in models:
        m.save(os.path.join(cfg.gmm_dir, f"{m.label}.json"))
    return {m.label: m for m in models}


def train_ubm(cfg, jobs=1):
    """Universal background model over the pooled training material of ``gmm.ubm_sources``."""
    if jobs > 1 and len(cfg.gmm.ubm_sources) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(material_ratemaps, [cfg] * len(cfg.gmm.ubm_sources), cfg.gmm.ubm_sources))
    else:
        parts = [material_ratemaps(cfg, s) for s in cfg.gmm.ubm_sources]
    # equal share per source so no masker dominates the pool
    rng = stream(cfg.seed, "ubm-pool")
    share = min(p.shape[0] for p in parts)
    pooled = np.concatenate([_subsample(p, share, rng) for p in parts])
    model = fit_source_model(cfg, "ubm", pooled)
    os.makedirs(cfg.gmm_dir, exist_ok=True)
    model.save(os.path.join(cfg.gmm_dir, "ubm.json"))
    return model


def load_source_model(cfg, label):
    path = os.path.join(cfg.gmm_dir, f"{label}.json")
    if not os.path.exists(path):
        raise ModelNotFound(f"no source model {path}; run 'binloc train-gmm' / 'binloc train-ubm' first")
    return DiagonalGmm.load(path)


def load_dataset(path):
    if not os.path.exists(path):
        raise ModelNotFound(f"no training set at {path}")
    return MctDataset.load(path)
