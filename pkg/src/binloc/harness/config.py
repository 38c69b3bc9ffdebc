"""Declarative experiment configuration.

A config file is YAML (JSON is accepted too, being a subset). Every key is
optional; missing keys take the values of the selected profile. Example::

    profile: ci
    seed: 7
    models: out/models
    experiment:
      maskers: [alarm]
      tmr_db: [-6]
      trials: 100
      modes: [baseline, oracle, ubm, ubm-adapted]

Profiles: ``tiny`` (seconds, for smoke tests), ``ci`` (desk-scale
acceptance) and ``full`` (training corpus at the published scale).
"""

import copy
import dataclasses
import json
import os
from dataclasses import dataclass, field

import yaml

from ..sim.generators import NOISE_SET_A, NOISE_SET_B, generator_ids
from ..sim.reverb import ROOM_PRESETS

MODES = ("baseline", "oracle", "masker", "masker-adapted", "ubm", "ubm-adapted")

# mixture components per source model
DEFAULT_COMPONENTS = {
    "speech-male": 16, "speech-female": 16,
    "alarm": 2, "drums": 2, "engine": 2, "piano": 3, "baby": 3, "babble-16": 4,
    "ubm": 8,
}


class ConfigError(ValueError):
    """Invalid or inconsistent configuration (CLI exit code 2)."""


@dataclass
class MctConfig:
    utterances_per_azimuth: int = 30
    utterance_duration: float = 1.5
    snrs: list = field(default_factory=lambda: [20.0, 10.0, 0.0])
    diffuse_duration: float = 30.0
    epochs: int = 30
    batch_size: int = 128
    learning_rate: float = 0.05
    max_frames_per_band: int = 0  # random subset per band; 0 keeps all


@dataclass
class GmmConfig:
    targets: list = field(default_factory=lambda: ["speech-male", "speech-female"])
    maskers: list = field(default_factory=lambda: list(NOISE_SET_A))
    ubm_sources: list = field(default_factory=lambda: list(NOISE_SET_A))
    material_duration: float = 90.0  # seconds of signal per source, split 4/5 train
    chunk_duration: float = 1.5
    azimuth_step: float = 5.0
    room: str = "A"
    components: dict = field(default_factory=lambda: dict(DEFAULT_COMPONENTS))
    max_frames: int = 40000


@dataclass
class ExperimentSettings:
    scenario: str = "noise-set-a"
    targets: list = field(default_factory=lambda: ["speech-male", "speech-female"])
    maskers: list = field(default_factory=lambda: list(NOISE_SET_A))
    tmr_db: list = field(default_factory=lambda: [0.0, -6.0])
    azimuths: list = field(default_factory=lambda: [-90.0, 90.0, 10.0])  # start, stop (inclusive), step
    trials: int = 50
    duration: float = 2.0
    room: str = "anechoic"
    modes: list = field(default_factory=lambda: list(MODES))
    level_mismatch_db: float = 0.0
    single_source: bool = False
    adapt_max_iters: int = 30
    adapt_tol: float = 1e-3

    def azimuth_grid(self):
        start, stop, step = self.azimuths
        n = int(round((stop - start) / step)) + 1
        return [start + i * step for i in range(n)]


@dataclass
class SceneConfig:
    target: str = "speech-male"
    masker: str = "alarm"
    azimuths: list = field(default_factory=lambda: [30.0, -15.0])
    tmr_db: float = 0.0
    room: str = "anechoic"
    seed: int = 0
    duration: float = 2.0


@dataclass
class ExperimentConfig:
    profile: str = "full"
    seed: int = 1234
    sample_rate: int = 16000
    models: str = "models"
    hrir_dir: str = None
    mct: MctConfig = field(default_factory=MctConfig)
    gmm: GmmConfig = field(default_factory=GmmConfig)
    experiment: ExperimentSettings = field(default_factory=ExperimentSettings)
    scene: SceneConfig = field(default_factory=SceneConfig)

    @property
    def dnn_dir(self):
        return os.path.join(self.models, "dnn")

    @property
    def gmm_dir(self):
        return os.path.join(self.models, "gmm")

    def to_dict(self):
        return dataclasses.asdict(self)


PROFILES = {
    "full": {},
    "ci": {
        "mct": {"utterances_per_azimuth": 12, "utterance_duration": 1.0, "diffuse_duration": 20.0,
                "max_frames_per_band": 120000, "batch_size": 256, "learning_rate": 0.1},
        "gmm": {"material_duration": 30.0},
        "experiment": {"trials": 10},
    },
    "tiny": {
        "mct": {"utterances_per_azimuth": 1, "utterance_duration": 0.3, "diffuse_duration": 2.0, "epochs": 2},
        "gmm": {"material_duration": 4.0, "chunk_duration": 0.5, "azimuth_step": 45.0,
                "targets": ["speech-male"], "maskers": ["alarm"], "ubm_sources": ["alarm", "drums"],
                "components": {"speech-male": 2, "alarm": 1, "drums": 1, "ubm": 2}},
        "experiment": {"trials": 2, "duration": 0.5, "maskers": ["alarm"], "tmr_db": [0.0],
                       "targets": ["speech-male"]},
    },
}


def _merge(base, override, path=""):
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in out:
            raise ConfigError(f"unknown config key {path + key!r}")
        if isinstance(out[key], dict) and isinstance(value, dict) and key != "components":
            out[key] = _merge(out[key], value, f"{path}{key}.")
        elif key == "components" and isinstance(value, dict):
            out[key] = dict(value)
        else:
            out[key] = value
    return out


def _build(doc):
    try:
        return ExperimentConfig(
            profile=doc["profile"], seed=int(doc["seed"]), sample_rate=int(doc["sample_rate"]),
            models=str(doc["models"]), hrir_dir=doc["hrir_dir"],
            mct=MctConfig(**doc["mct"]), gmm=GmmConfig(**doc["gmm"]),
            experiment=ExperimentSettings(**doc["experiment"]), scene=SceneConfig(**doc["scene"]),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from None


def make_config(overrides=None, profile=None):
    """Build a validated config from a profile plus nested ``overrides``."""
    overrides = dict(overrides or {})
    profile = profile or overrides.get("profile", "full")
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}; choose from {', '.join(PROFILES)}")
    doc = dataclasses.asdict(ExperimentConfig())
    doc = _merge(doc, PROFILES[profile])
    doc = _merge(doc, overrides)
    doc["profile"] = profile
    cfg = _build(doc)
    validate(cfg)
    return cfg


def load_config(path=None, profile=None, **top_level):
    """Read a YAML/JSON config file (or none) and apply top-level overrides such as ``seed``."""
    doc = {}
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        try:
            doc = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: not valid YAML/JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
    for key, value in top_level.items():
        if value is not None:
            doc[key] = value
    return make_config(doc, profile or doc.get("profile"))


def dump_config(cfg, path):
    with open(path, "w") as fh:
        if str(path).endswith(".json"):
            json.dump(cfg.to_dict(), fh, indent=2)
        else:
            yaml.safe_dump(cfg.to_dict(), fh, sort_keys=False)


def validate(cfg):
    known = set(generator_ids())
    ex = cfg.experiment
    if cfg.sample_rate != 16000:
        raise ConfigError("only 16 kHz material is supported")
    if ex.trials < 1:
        raise ConfigError("experiment.trials must be >= 1")
    if len(ex.azimuths) != 3 or ex.azimuths[2] <= 0 or ex.azimuths[1] < ex.azimuths[0]:
        raise ConfigError("experiment.azimuths must be [start, stop, step] with step > 0")
    grid = ex.azimuth_grid()
    if any(abs(a / 5.0 - round(a / 5.0)) > 1e-9 for a in grid):
        raise ConfigError("experiment azimuths must lie on the 5 degree grid")
    if not ex.tmr_db:
        raise ConfigError("experiment.tmr_db must not be empty")
    if not ex.targets:
        raise ConfigError("experiment.targets must not be empty")
    bad_modes = set(ex.modes) - set(MODES)
    if bad_modes or not ex.modes:
        raise ConfigError(f"unknown modes {sorted(bad_modes)}; choose from {', '.join(MODES)}")
    for gid in list(ex.targets) + list(ex.maskers) + list(cfg.gmm.targets) + list(cfg.gmm.maskers) + list(cfg.gmm.ubm_sources):
        if gid not in known:
            raise ConfigError(f"unknown generator {gid!r}")
    if not ex.single_source and not ex.maskers:
        raise ConfigError("experiment.maskers must not be empty for two-source runs")
    for r in (ex.room, cfg.gmm.room, cfg.scene.room):
        if r not in ROOM_PRESETS:
            raise ConfigError(f"unknown room {r!r}; choose from {', '.join(ROOM_PRESETS)}")
    for gid in list(cfg.gmm.targets) + list(cfg.gmm.maskers) + ["ubm"]:
        if gid not in cfg.gmm.components:
            raise ConfigError(f"gmm.components has no entry for {gid!r}")
    if cfg.mct.utterances_per_azimuth < 1 or cfg.mct.utterance_duration <= 0 or cfg.mct.epochs < 1:
        raise ConfigError("mct sizes must be positive")
    if cfg.gmm.material_duration <= 0 or cfg.gmm.chunk_duration <= 0:
        raise ConfigError("gmm durations must be positive")
    if ex.duration <= 0:
        raise ConfigError("experiment.duration must be positive")
    if len(cfg.scene.azimuths) not in (1, 2):
        raise ConfigError("scene.azimuths takes one (target) or two (target, masker) values")
    return cfg


def noise_set(name):
    """Masker list of a named noise set (``A`` or ``B``)."""
    sets = {"A": list(NOISE_SET_A), "B": list(NOISE_SET_B)}
    try:
        return sets[name.upper()]
    except KeyError:
        raise ConfigError(f"unknown noise set {name!r}") from None
