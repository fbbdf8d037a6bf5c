"""Masking-based reliability check for explanations.

Points referenced by an explanation are suppressed by linear interpolation
between the last retained point before the masked run and the first
retained point after it; runs touching a boundary are filled with the
single retained endpoint. Windows centered on each point merge when they
overlap or touch, so interpolation never reads a value that is itself
masked. The masked series is re-classified: a changed label ("flip") means
the points were decision-relevant and the explanation gets high confidence,
otherwise low.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dataset import TimeSeries
from .errors import MaskError
from .network import Network, Prediction, forward


@dataclass(frozen=True)
class MaskSpec:
    """Points to suppress, each widened to an odd ``window`` centered on it."""

    points: tuple[tuple[str, int], ...]
    window: int = 1

    def __post_init__(self):
        object.__setattr__(self, "points", tuple((str(c), int(i)) for c, i in self.points))
        if self.window < 1 or self.window % 2 == 0:
            raise MaskError(f"window must be odd and >= 1, got {self.window}")


@dataclass(frozen=True)
class SanityResult:
    original: Prediction
    masked: Prediction
    flipped: bool
    confidence: str
    masked_series: TimeSeries

    def to_dict(self) -> dict:
        return {
            "original": self.original.to_dict(),
            "masked": self.masked.to_dict(),
            "flipped": self.flipped,
            "confidence": self.confidence,
        }


def _merge_runs(starts_ends: list[tuple[int, int]]) -> list[tuple[int, int]]:
    """Merge overlapping or adjacent inclusive runs."""
    merged: list[tuple[int, int]] = []
    for start, end in sorted(starts_ends):
        if merged and start <= merged[-1][1] + 1:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return merged


def mask(series: TimeSeries, spec: MaskSpec) -> TimeSeries:
    """Replace masked runs by linear interpolation between retained neighbors."""
    t_len = series.length
    half = (spec.window - 1) // 2
    by_channel: dict[str, list[tuple[int, int]]] = {}
    for chan, idx in spec.points:
        if chan not in series.channel_names:
            raise MaskError(f"series {series.id}: no channel named {chan!r}")
        if not 0 <= idx < t_len:
            raise MaskError(f"series {series.id}: index {idx} outside [0, {t_len})")
        by_channel.setdefault(chan, []).append((max(0, idx - half), min(t_len - 1, idx + half)))

    values = series.values.copy()
    for chan, runs in by_channel.items():
        row = values[series.channel_names.index(chan)]
        for start, end in _merge_runs(runs):
            if start == 0 and end == t_len - 1:
                raise MaskError(
                    f"series {series.id}: mask covers all of channel {chan!r}, nothing retained"
                )
            if start == 0:
                row[: end + 1] = row[end + 1]
            elif end == t_len - 1:
                row[start:] = row[start - 1]
            else:
                left, right = row[start - 1], row[end + 1]
                span = end + 1 - (start - 1)
                for j, i in enumerate(range(start, end + 1), start=1):
                    row[i] = left + (right - left) * j / span
    return replace(series, values=values, injection_sites=None)


def check(network: Network, series: TimeSeries, spec: MaskSpec) -> SanityResult:
    """Classify the series before and after masking; high confidence iff flipped."""
    original = forward(network, series)
    masked_series = mask(series, spec)
    masked = forward(network, masked_series)
    flipped = original.label != masked.label
    return SanityResult(
        original=original,
        masked=masked,
        flipped=flipped,
        confidence="high" if flipped else "low",
        masked_series=masked_series,
    )
