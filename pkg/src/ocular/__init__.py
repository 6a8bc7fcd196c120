"""Ocular metrics for drowsiness monitoring: PERCLOS, saccadic ratio, spectacle detection."""

__version__ = "0.1.0"
