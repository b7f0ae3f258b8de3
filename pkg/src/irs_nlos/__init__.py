"""Deterministic simulator for mmWave radar NLoS localization through a switchable reflecting surface."""

__version__ = "0.1.0"
