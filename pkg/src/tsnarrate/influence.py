"""Input-influence tracing: gradient magnitudes, max-min scaling, selection.

The influence of an input value on the classifier decision is the absolute
gradient of the sigmoid output with respect to that value. Only magnitudes
matter for saliency, so signs are dropped. Scaled maps are max-min rescaled
to [0, 1], by default per channel (explanations compare points within a
channel); a global mode over the whole map is also available. A constant
raw map has no discriminative content and scales to all zeros.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dataset import TimeSeries
from .errors import ConfigError
from .network import Network, grad_input

SCALING_MODES = ("per_channel", "global")


@dataclass(frozen=True)
class SalientPolicy:
    """Keep, per channel, up to ``per_channel_cap`` points scaled >= ``threshold``."""

    threshold: float = 0.8
    per_channel_cap: int = 3

    def __post_init__(self):
        if not 0.0 < self.threshold <= 1.0:
            raise ConfigError(f"threshold must lie in (0, 1], got {self.threshold}")
        if self.per_channel_cap < 1:
            raise ConfigError(f"per_channel_cap must be >= 1, got {self.per_channel_cap}")


@dataclass(frozen=True)
class SalientPoint:
    channel: str
    index: int
    scaled_influence: float
    value: float
    # Raw gradient magnitude: comparable across channels, unlike the
    # per-channel scaled value, so cross-channel ranking uses it.
    raw_influence: float = 0.0

    def to_dict(self) -> dict:
        return {
            "channel": self.channel,
            "index": self.index,
            "scaled_influence": self.scaled_influence,
            "raw_influence": self.raw_influence,
            "value": self.value,
        }


@dataclass(frozen=True)
class InfluenceMap:
    """Raw and scaled influence per channel/timestep, plus the input values."""

    channel_names: tuple[str, ...]
    values: np.ndarray
    raw: np.ndarray
    scaled: np.ndarray
    scaling_mode: str

    def channel_row(self, name: str) -> int:
        return self.channel_names.index(name)

    def to_obj(self) -> list[dict]:
        return [
            {
                "channel": name,
                "raw": [float(v) for v in self.raw[c]],
                "scaled": [float(v) for v in self.scaled[c]],
            }
            for c, name in enumerate(self.channel_names)
        ]

    def to_json(self) -> str:
        return json.dumps(self.to_obj())


def max_min_scale(raw: np.ndarray, mode: str = "per_channel") -> np.ndarray:
    """Rescale to [0, 1] over the chosen scope; degenerate scopes become zeros."""
    if mode not in SCALING_MODES:
        raise ConfigError(f"scaling_mode must be one of {SCALING_MODES}, got {mode!r}")
    raw = np.asarray(raw, dtype=np.float64)
    scaled = np.zeros_like(raw)
    if mode == "global":
        lo, hi = raw.min(), raw.max()
        if hi > lo:
            scaled = (raw - lo) / (hi - lo)
        return scaled
    for c in range(raw.shape[0]):
        lo, hi = raw[c].min(), raw[c].max()
        if hi > lo:
            scaled[c] = (raw[c] - lo) / (hi - lo)
    return scaled


def trace(network: Network, series: TimeSeries, scaling_mode: str = "per_channel") -> InfluenceMap:
    """Backward pass from output to input, keeping gradient magnitudes."""
    raw = np.abs(grad_input(network, series))
    return InfluenceMap(
        channel_names=series.channel_names,
        values=series.values.copy(),
        raw=raw,
        scaled=max_min_scale(raw, scaling_mode),
        scaling_mode=scaling_mode,
    )


def top_salient(imap: InfluenceMap, policy: SalientPolicy = SalientPolicy()) -> list[SalientPoint]:
    """Strongest points per channel, by descending influence, ties to lower index.

    Channels appear in map order. An empty result is legal (nothing reached
    the threshold).
    """
    points: list[SalientPoint] = []
    for c, name in enumerate(imap.channel_names):
        row = imap.scaled[c]
        candidates = [int(i) for i in np.nonzero(row >= policy.threshold)[0]]
        candidates.sort(key=lambda i: (-row[i], i))
        for i in candidates[: policy.per_channel_cap]:
            points.append(
                SalientPoint(
                    channel=name,
                    index=i,
                    scaled_influence=float(row[i]),
                    value=float(imap.values[c, i]),
                    raw_influence=float(imap.raw[c, i]),
                )
            )
    return points
