"""Sequence-wise and point-wise statistical features.

Six sequence-wise features characterize a channel as a whole:

* ``lumpiness`` — population variance of the per-block population variances
  over consecutive blocks of ``n`` points (trailing remainder dropped).
* ``level_shift`` — maximum absolute difference between consecutive block
  means.
* ``kl_score`` — blocks are histogrammed on shared bin edges spanning the
  whole sequence's range, smoothed by adding ``epsilon`` to every bin mass
  and renormalizing; consecutive-pair divergences KL(P_i || P_{i+1}) are
  then reduced to a score. The default ``max_kl`` mode takes the largest
  pairwise divergence; ``max_diff`` takes the largest absolute difference
  between successive pairwise divergences (falling back to the single
  divergence when only two blocks exist).
* ``num_peaks`` — Ricker-wavelet CWT peak count, see below.
* ``ratio_beyond_r_sigma`` — fraction of points more than r population
  standard deviations from the mean (0 for constant sequences).
* ``std_dev`` — population standard deviation.

Variance and standard deviation are population (divide by N) throughout.

Peak counting convolves the signal with Ricker wavelets of widths
1..max_width (edge-replicated padding, so constant signals give flat rows
and no peaks), finds strict interior local maxima per width row, links them
top-down into ridge lines (nearest candidate within max(1, ceil(w/4))
columns, ties to the lower column, no gaps), and accepts ridges that span
at least ceil(max_width/4) widths and whose strongest (signed) CWT value is
at least ``snr`` times the 90th-percentile magnitude of its row.

Point-wise features describe one index against its channel: z-score,
global max/min (strict extremes; constant channels set no flags), local
peak/valley (strictly greater/less than both neighbors, single-neighbor
comparison at the boundaries) and highest-spike/lowest-valley (the local
peak/valley with the most extreme z-score, ties to the lower index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dataset import TimeSeries
from .errors import ConfigError, FeatureError, ReportError
from .influence import SalientPoint

KL_MODES = ("max_kl", "max_diff")


@dataclass(frozen=True)
class FeatureConfig:
    block_size: int = 10
    kl_bins: int = 5
    kl_epsilon: float = 1e-4
    r_sigma: float = 3.0
    peak_max_width: int = 5
    peak_snr: float = 1.0
    kl_mode: str = "max_kl"

    def __post_init__(self):
        if self.block_size < 2:
            raise ConfigError(f"block_size must be >= 2, got {self.block_size}")
        if self.kl_bins < 2:
            raise ConfigError(f"kl_bins must be >= 2, got {self.kl_bins}")
        if self.kl_epsilon <= 0:
            raise ConfigError(f"kl_epsilon must be > 0, got {self.kl_epsilon}")
        if self.r_sigma <= 0:
            raise ConfigError(f"r_sigma must be > 0, got {self.r_sigma}")
        if self.peak_max_width < 1:
            raise ConfigError(f"peak_max_width must be >= 1, got {self.peak_max_width}")
        if self.peak_snr <= 0:
            raise ConfigError(f"peak_snr must be > 0, got {self.peak_snr}")
        if self.kl_mode not in KL_MODES:
            raise ConfigError(f"kl_mode must be one of {KL_MODES}, got {self.kl_mode!r}")

    def to_dict(self) -> dict:
        return {
            "block_size": self.block_size,
            "kl_bins": self.kl_bins,
            "kl_epsilon": self.kl_epsilon,
            "r_sigma": self.r_sigma,
            "peak_max_width": self.peak_max_width,
            "peak_snr": self.peak_snr,
            "kl_mode": self.kl_mode,
        }


@dataclass(frozen=True)
class SequenceFeatures:
    lumpiness: float
    level_shift: float
    kl_score: float
    num_peaks: int
    ratio_beyond_r_sigma: float
    std_dev: float

    def to_dict(self) -> dict:
        return {
            "lumpiness": self.lumpiness,
            "level_shift": self.level_shift,
            "kl_score": self.kl_score,
            "num_peaks": self.num_peaks,
            "ratio_beyond_r_sigma": self.ratio_beyond_r_sigma,
            "std_dev": self.std_dev,
        }


@dataclass(frozen=True)
class PointFeatures:
    index: int
    value: float
    z_score: float
    is_global_max: bool
    is_global_min: bool
    is_local_peak: bool
    is_local_valley: bool
    is_highest_spike: bool
    is_lowest_valley: bool

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "value": self.value,
            "z_score": self.z_score,
            "is_global_max": self.is_global_max,
            "is_global_min": self.is_global_min,
            "is_local_peak": self.is_local_peak,
            "is_local_valley": self.is_local_valley,
            "is_highest_spike": self.is_highest_spike,
            "is_lowest_valley": self.is_lowest_valley,
        }


@dataclass(frozen=True)
class FeatureReport:
    """Sequence features for every channel plus descriptors of salient points."""

    channels: dict[str, SequenceFeatures]
    points: tuple[tuple[str, PointFeatures], ...]
    config: FeatureConfig = field(default_factory=FeatureConfig)

    def to_dict(self) -> dict:
        return {
            "channels": {name: f.to_dict() for name, f in self.channels.items()},
            "points": [
                {"channel": name, **pf.to_dict()} for name, pf in self.points
            ],
            "config": self.config.to_dict(),
        }


def _as_array(values: Iterable[float]) -> np.ndarray:
    arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=np.float64)
    if arr.ndim != 1:
        raise FeatureError(f"expected a 1-D sequence, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise FeatureError("sequence contains non-finite values")
    return arr


def _blocks(values: np.ndarray, n: int, what: str) -> np.ndarray:
    if len(values) < 2 * n:
        raise FeatureError(f"{what}: need at least {2 * n} points, got {len(values)}")
    n_blocks = len(values) // n
    return values[: n_blocks * n].reshape(n_blocks, n)


def lumpiness(values: Iterable[float], n: int) -> float:
    """Variance of block variances (volatility clustering)."""
    blocks = _blocks(_as_array(values), n, "lumpiness")
    return float(np.var(np.var(blocks, axis=1)))


def level_shift(values: Iterable[float], n: int) -> float:
    """Largest jump in mean between consecutive blocks."""
    means = _blocks(_as_array(values), n, "level_shift").mean(axis=1)
    return float(np.max(np.abs(np.diff(means))))


def _smoothed_histograms(blocks: np.ndarray, lo: float, hi: float, bins: int, epsilon: float) -> np.ndarray:
    edges = np.linspace(lo, hi, bins + 1)
    probs = np.empty((blocks.shape[0], bins))
    for i, block in enumerate(blocks):
        counts, _ = np.histogram(block, bins=edges)
        probs[i] = counts / block.size
    probs = probs + epsilon
    return probs / probs.sum(axis=1, keepdims=True)


def kl_score(
    values: Iterable[float],
    n: int,
    bins: int,
    epsilon: float,
    mode: str = "max_kl",
) -> float:
    """Distributional-change score from consecutive block histogram divergences."""
    if mode not in KL_MODES:
        raise ConfigError(f"kl mode must be one of {KL_MODES}, got {mode!r}")
    arr = _as_array(values)
    blocks = _blocks(arr, n, "kl_score")
    lo, hi = float(arr.min()), float(arr.max())
    if hi == lo:
        return 0.0
    probs = _smoothed_histograms(blocks, lo, hi, bins, epsilon)
    divergences = [
        float(np.sum(p * np.log(p / q))) for p, q in zip(probs[:-1], probs[1:])
    ]
    if mode == "max_kl" or len(divergences) == 1:
        return max(divergences)
    return max(abs(b - a) for a, b in zip(divergences[:-1], divergences[1:]))


def _ricker_kernel(width: int, max_len: int) -> np.ndarray:
    """Ricker (Mexican hat) wavelet sampled at integer offsets, odd length <= max_len."""
    half = min(5 * width, (max_len - 1) // 2)
    t = np.arange(-half, half + 1, dtype=np.float64)
    norm = 2.0 / (math.sqrt(3.0 * width) * math.pi**0.25)
    return norm * (1.0 - (t / width) ** 2) * np.exp(-(t**2) / (2.0 * width**2))


def _cwt_rows(values: np.ndarray, max_width: int) -> list[np.ndarray]:
    rows = []
    for width in range(1, max_width + 1):
        kernel = _ricker_kernel(width, len(values))
        half = (len(kernel) - 1) // 2
        padded = np.concatenate(
            [np.full(half, values[0]), values, np.full(half, values[-1])]
        )
        rows.append(np.convolve(padded, kernel, mode="valid"))
    return rows


def _local_maxima(row: np.ndarray) -> list[int]:
    """Strict interior local maxima; boundary columns are never maxima."""
    return [
        c for c in range(1, len(row) - 1) if row[c] > row[c - 1] and row[c] > row[c + 1]
    ]


def num_peaks(values: Iterable[float], max_width: int, snr: float) -> int:
    """CWT ridge-line peak count (see module docstring for the exact rules)."""
    arr = _as_array(values)
    if len(arr) < 4:
        raise FeatureError(f"num_peaks: need at least 4 points, got {len(arr)}")
    rows = _cwt_rows(arr, max_width)
    maxima = [_local_maxima(row) for row in rows]

    # Ridges as lists of (row, col), built from the widest row downward.
    ridges: list[list[tuple[int, int]]] = [[(max_width - 1, c)] for c in maxima[-1]]
    open_ridges = list(range(len(ridges)))
    for r in range(max_width - 1, 0, -1):
        reach = max(1, math.ceil((r + 1) / 4))
        extendable = set(open_ridges)
        next_open = []
        for col in maxima[r - 1]:
            best = None
            for ridge_id in extendable:
                last_col = ridges[ridge_id][-1][1]
                dist = abs(last_col - col)
                if dist <= reach and (
                    best is None or (dist, last_col) < (best[0], ridges[best[1]][-1][1])
                ):
                    best = (dist, ridge_id)
            if best is not None:
                ridge_id = best[1]
                extendable.discard(ridge_id)
                ridges[ridge_id].append((r - 1, col))
                next_open.append(ridge_id)
            else:
                ridges.append([(r - 1, col)])
                next_open.append(len(ridges) - 1)
        open_ridges = next_open

    min_length = math.ceil(max_width / 4)
    accepted = 0
    for ridge in ridges:
        if len(ridge) < min_length:
            continue
        peak_row, peak_col = max(ridge, key=lambda rc: rows[rc[0]][rc[1]])
        peak_val = rows[peak_row][peak_col]
        if peak_val <= 0:
            continue
        noise = float(np.percentile(np.abs(rows[peak_row]), 90))
        if noise == 0.0 or peak_val / noise >= snr:
            accepted += 1
    return accepted


def ratio_beyond_r_sigma(values: Iterable[float], r: float) -> float:
    """Fraction of points more than r population standard deviations from the mean."""
    arr = _as_array(values)
    if len(arr) < 1:
        raise FeatureError("ratio_beyond_r_sigma: empty sequence")
    std = float(np.std(arr))
    if std == 0.0:
        return 0.0
    return float(np.count_nonzero(np.abs(arr - arr.mean()) > r * std) / len(arr))


def std_dev(values: Iterable[float]) -> float:
    arr = _as_array(values)
    if len(arr) < 1:
        raise FeatureError("std_dev: empty sequence")
    return float(np.std(arr))


def _local_peak_flags(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(is_local_peak, is_local_valley) with single-neighbor boundary rule."""
    n = len(values)
    peaks = np.zeros(n, dtype=bool)
    valleys = np.zeros(n, dtype=bool)
    for i in range(n):
        left = values[i] > values[i - 1] if i > 0 else True
        right = values[i] > values[i + 1] if i < n - 1 else True
        peaks[i] = left and right and n > 1
        left = values[i] < values[i - 1] if i > 0 else True
        right = values[i] < values[i + 1] if i < n - 1 else True
        valleys[i] = left and right and n > 1
    return peaks, valleys


def point_features(values: Iterable[float], index: int) -> PointFeatures:
    """Descriptors of one point relative to its whole channel."""
    arr = _as_array(values)
    if not 0 <= index < len(arr):
        raise FeatureError(f"point index {index} outside [0, {len(arr)})")
    mean = float(arr.mean())
    std = float(np.std(arr))
    z_all = (arr - mean) / std if std > 0 else np.zeros_like(arr)
    peaks, valleys = _local_peak_flags(arr)
    constant = bool(arr.max() == arr.min())

    highest_spike = lowest_valley = None
    if peaks.any():
        peak_idx = np.nonzero(peaks)[0]
        highest_spike = int(peak_idx[np.argmax(z_all[peak_idx])])
    if valleys.any():
        valley_idx = np.nonzero(valleys)[0]
        lowest_valley = int(valley_idx[np.argmin(z_all[valley_idx])])

    return PointFeatures(
        index=index,
        value=float(arr[index]),
        z_score=float(z_all[index]),
        is_global_max=not constant and bool(arr[index] == arr.max()),
        is_global_min=not constant and bool(arr[index] == arr.min()),
        is_local_peak=bool(peaks[index]),
        is_local_valley=bool(valleys[index]),
        is_highest_spike=index == highest_spike,
        is_lowest_valley=index == lowest_valley,
    )


def sequence_features(values: Iterable[float], config: FeatureConfig) -> SequenceFeatures:
    arr = _as_array(values)
    return SequenceFeatures(
        lumpiness=lumpiness(arr, config.block_size),
        level_shift=level_shift(arr, config.block_size),
        kl_score=kl_score(arr, config.block_size, config.kl_bins, config.kl_epsilon, config.kl_mode),
        num_peaks=num_peaks(arr, config.peak_max_width, config.peak_snr),
        ratio_beyond_r_sigma=ratio_beyond_r_sigma(arr, config.r_sigma),
        std_dev=std_dev(arr),
    )


def feature_report(
    series: TimeSeries,
    salient_points: Sequence[SalientPoint],
    config: FeatureConfig = FeatureConfig(),
) -> FeatureReport:
    """Sequence features for every channel plus point features per salient point."""
    channels = {
        name: sequence_features(series.values[c], config)
        for c, name in enumerate(series.channel_names)
    }
    points = []
    for sp in salient_points:
        if sp.channel not in series.channel_names:
            raise ReportError(
                f"salient point references unknown channel {sp.channel!r}"
            )
        if not 0 <= sp.index < series.length:
            raise ReportError(
                f"salient point ({sp.channel!r}, {sp.index}) outside [0, {series.length})"
            )
        points.append((sp.channel, point_features(series.channel(sp.channel), sp.index)))
    return FeatureReport(channels=channels, points=tuple(points), config=config)
