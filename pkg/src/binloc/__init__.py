"""Binaural localisation of an attended target source with source-model weighting."""

__version__ = "0.1.0"
