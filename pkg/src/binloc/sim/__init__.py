"""Binaural scene simulation: spatialisation, diffuse noise, reverberation, sources."""

from .generators import NOISE_SET_A, NOISE_SET_B, generate, generator_ids
from .head import HeadModel, HrirCatalog, ParametricHead, diffuse_field, spatialize
from .reverb import ROOM_PRESETS, parametric_reverb
from .scene import Mixture, SceneSpec, SourceSpec, mix_at_tmr, render_scene

__all__ = [
    "NOISE_SET_A", "NOISE_SET_B", "generate", "generator_ids", "HeadModel", "HrirCatalog",
    "ParametricHead", "diffuse_field", "spatialize", "ROOM_PRESETS", "parametric_reverb",
    "Mixture", "SceneSpec", "SourceSpec", "mix_at_tmr", "render_scene",
]
