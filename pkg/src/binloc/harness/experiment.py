"""Localisation experiments over scenario grids.

Every trial synthesises one scene, extracts features once and then scores
all requested weighting modes on that same scene, so modes are compared on
matched material. Trials are seeded from ``(seed, masker, trial index)``;
the TMR only changes the masker gain, not the draw.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..adaptation import adapt_background, apply_offset
from ..azimuth_net import band_posteriors
from ..frontend import analyze, band_frame_energy, gammatone_analyze
from ..localizer import grace_match, localise
from ..logmax import localisation_weights
from ..sim.scene import SceneSpec, SourceSpec, render_scene
from .training import ModelNotFound, load_classifiers, load_source_model, make_spatializer, stream

log = logging.getLogger(__name__)

MIN_SOURCE_SEPARATION = 10.0


def db_to_log_energy(db):
    """Level change in dB expressed in log-ratemap units (natural log of energy)."""
    return db / 10.0 * math.log(10.0)


@dataclass
class TrialRecord:
    condition: str
    trial: int
    target: str
    target_azimuth: float
    masker_azimuth: float
    estimates: list
    hit: bool
    front_back: bool


@dataclass
class ConditionResult:
    condition: str
    errors: int
    front_back: int
    trials: int

    @property
    def error_rate(self):
        return self.errors / self.trials if self.trials else 0.0

    @property
    def front_back_rate(self):
        return self.front_back / self.trials if self.trials else 0.0


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)

    def __getitem__(self, condition):
        for row in self.rows:
            if row.condition == condition:
                return row
        raise KeyError(condition)

    def conditions(self):
        return [r.condition for r in self.rows]

    def error_rate(self, condition):
        return self[condition].error_rate


def condition_name(masker, tmr_db, mode):
    if masker is None:
        return f"none|clean|{mode}"
    return f"{masker}|tmr{tmr_db:+g}|{mode}"


def split_condition(name):
    masker, tmr, mode = name.split("|")
    return masker, tmr, mode


def _wrap(az):
    return float(az) % 360.0


def trial_layout(cfg, masker, index):
    """Target generator, azimuths and seeds of one trial."""
    ex = cfg.experiment
    grid = ex.azimuth_grid()
    rng = stream(cfg.seed, "trial", masker or "none", index)
    # talkers alternate; each talker walks the azimuth grid in order
    target = ex.targets[index % len(ex.targets)]
    target_az = grid[(index // len(ex.targets)) % len(grid)]
    candidates = [a for a in grid if abs(a - target_az) >= MIN_SOURCE_SEPARATION]
    masker_az = candidates[int(rng.integers(len(candidates)))] if candidates else target_az
    return {
        "target": target,
        "target_azimuth": target_az,
        "masker_azimuth": masker_az,
        "target_seed": int(rng.integers(2**31)),
        "masker_seed": int(rng.integers(2**31)),
        "scene_seed": int(rng.integers(2**31)),
    }


def oracle_weights(mixture):
    """1 where the target stem's band energy (both ears) is at least the masker's, else 0."""
    t_l, t_r = gammatone_analyze(mixture.target)
    m_l, m_r = gammatone_analyze(mixture.masker)
    et = band_frame_energy(t_l) + band_frame_energy(t_r)
    em = band_frame_energy(m_l) + band_frame_energy(m_r)
    return (et >= em).astype(np.float64)


class ModelStore:
    """Lazily loaded models for one configuration."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.mlps = load_classifiers(cfg)
        self._gmms = {}

    def gmm(self, label):
        if label not in self._gmms:
            self._gmms[label] = load_source_model(self.cfg, label)
        return self._gmms[label]


def required_models(cfg):
    """Labels of source models a run will need."""
    ex = cfg.experiment
    if ex.single_source:
        return []
    needed = set()
    if any(m.startswith(("masker", "ubm")) for m in ex.modes):
        needed.update(ex.targets)
    if any(m.startswith("masker") for m in ex.modes):
        needed.update(ex.maskers)
    if any(m.startswith("ubm") for m in ex.modes):
        needed.add("ubm")
    return sorted(needed)


def check_models(cfg):
    """Fail before any audio work if a required model is missing."""
    store = ModelStore(cfg)
    for label in required_models(cfg):
        store.gmm(label)
    return store


def model_weights(store, ratemap, target, background, adapt, mismatch_db):
    ex = store.cfg.experiment
    tgt = store.gmm(target)
    bg = store.gmm(background)
    if mismatch_db:
        # the model believes the background is quieter than it is
        bg = apply_offset(bg, np.full(bg.dim, -db_to_log_energy(mismatch_db)))
    if not adapt:
        return localisation_weights(ratemap, tgt, bg), None
    offset = adapt_background(bg, tgt, ratemap, max_iters=ex.adapt_max_iters, tol=ex.adapt_tol)
    return localisation_weights(ratemap, tgt, bg, background_offset=offset.beta), offset


def score_scene(store, mixture, layout, masker, modes, n_sources):
    """Localise one rendered scene under each mode; returns ``{mode: (estimates, GraceResult)}``."""
    out = analyze(mixture.mixture)
    post = band_posteriors(store.mlps, out.features.stacked())
    results = {}
    for mode in modes:
        if mode == "baseline":
            w = np.ones(post.shape[:2])
        elif mode == "oracle":
            w = oracle_weights(mixture)
        else:
            background = masker if mode.startswith("masker") else "ubm"
            w, _ = model_weights(store, out.ratemap, layout["target"], background, mode.endswith("-adapted"),
                                 store.cfg.experiment.level_mismatch_db)
        res = localise(post, w, n_sources=n_sources)
        results[mode] = (res.estimates, grace_match(res.estimates, _wrap(layout["target_azimuth"])))
    return results


def render_trial(cfg, layout, masker, tmr_db, spatializer):
    ex = cfg.experiment
    target = SourceSpec(layout["target"], _wrap(layout["target_azimuth"]), layout["target_seed"])
    masker_spec = None if masker is None else SourceSpec(masker, _wrap(layout["masker_azimuth"]), layout["masker_seed"])
    spec = SceneSpec(target, masker_spec, float(tmr_db), ex.room, layout["scene_seed"], ex.duration)
    return render_scene(spec, spatializer, cfg.sample_rate)


_WORKER = {}


def _init_worker(cfg):
    _WORKER["store"] = ModelStore(cfg)
    _WORKER["spatializer"] = make_spatializer(cfg)


def _run_job(job):
    masker, index = job
    store = _WORKER["store"]
    cfg = store.cfg
    ex = cfg.experiment
    layout = trial_layout(cfg, masker, index)
    records = []
    if masker is None:
        modes = ["baseline"]
        tmrs = [None]
    else:
        modes = list(ex.modes)
        tmrs = list(ex.tmr_db)
    for tmr in tmrs:
        mixture = render_trial(cfg, layout, masker, 0.0 if tmr is None else tmr, _WORKER["spatializer"])
        scored = score_scene(store, mixture, layout, masker, modes, 1 if masker is None else 2)
        for mode in modes:
            estimates, grace = scored[mode]
            records.append(TrialRecord(condition_name(masker, tmr, mode), index, layout["target"],
                                       _wrap(layout["target_azimuth"]),
                                       float("nan") if masker is None else _wrap(layout["masker_azimuth"]),
                                       estimates, bool(grace.hit), bool(grace.front_back)))
    return records


def conditions(cfg):
    ex = cfg.experiment
    if ex.single_source:
        return [condition_name(None, None, "baseline")]
    return [condition_name(m, t, mode) for m in ex.maskers for t in ex.tmr_db for mode in ex.modes]


def run_experiment(cfg, jobs=1):
    """Run every trial of ``cfg.experiment``; returns ``(ResultTable, [TrialRecord])``.

    Raises :class:`ModelNotFound` before synthesising anything if a model
    is missing.
    """
    ex = cfg.experiment
    check_models(cfg)
    if ex.single_source:
        jobs_list = [(None, i) for i in range(ex.trials)]
    else:
        jobs_list = [(m, i) for m in ex.maskers for i in range(ex.trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(cfg,)) as pool:
            chunks = list(pool.map(_run_job, jobs_list, chunksize=max(1, len(jobs_list) // (4 * jobs))))
    else:
        _init_worker(cfg)
        chunks = [_run_job(j) for j in jobs_list]
    records = [r for chunk in chunks for r in chunk]
    order = {c: i for i, c in enumerate(conditions(cfg))}
    records.sort(key=lambda r: (order[r.condition], r.trial))
    table = ResultTable()
    for cond in conditions(cfg):
        rs = [r for r in records if r.condition == cond]
        table.rows.append(ConditionResult(cond, sum(not r.hit for r in rs), sum(r.front_back for r in rs), len(rs)))
        log.info("%s: error %.3f (front-back %.3f) over %d trials", cond, table.rows[-1].error_rate,
                 table.rows[-1].front_back_rate, len(rs))
    return table, records


__all__ = [
    "ConditionResult", "ModelNotFound", "ResultTable", "TrialRecord", "condition_name", "db_to_log_energy",
    "oracle_weights", "run_experiment", "trial_layout",
]
