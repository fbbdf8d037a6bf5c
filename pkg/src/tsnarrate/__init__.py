"""Anomaly classification for multichannel time series with gradient-based,
natural-language explanations and a masking sanity check."""

from . import cli, dataset, explain, features, harness, influence, network, sanity

__all__ = [
    "cli",
    "dataset",
    "explain",
    "features",
    "harness",
    "influence",
    "network",
    "sanity",
]

__version__ = "0.1.0"
