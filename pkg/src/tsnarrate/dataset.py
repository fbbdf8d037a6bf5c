"""Synthetic data generation, CSV ingestion and stratified splitting.

The synthetic generator produces fixed-length three-channel sequences
(pressure, torque, temperature). Each channel is a sinusoid with per-series
random amplitude, frequency and phase plus small clipped Gaussian noise.
Anomalous series carry one or two point spikes injected into the torque
and/or temperature channel; the pressure channel is never spiked. Spikes
displace the base value away from the channel mean by ``m`` channel standard
deviations with ``m`` drawn from ``spike_magnitude_range``, which keeps the
spiked point above three sigma for the default range while clipped noise
keeps every unspiked point safely below it.

CSV interchange uses a wide layout, one row per series::

    id,label,<chan>_t0,...,<chan>_t{T-1},...   (channels in schema order)

Values are written with ``repr`` (shortest exact round-trip, always more
than 12 significant digits). Injection sites travel in a sibling
``<name>.truth.json`` file keyed by series id; they are evaluation-only
ground truth and are never exposed to the classifier.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, FormatError, LabelError, ParseError, SplitError

DEFAULT_CHANNELS = ("pressure", "torque", "temperature")
SPIKE_CHANNELS = ("torque", "temperature")

# Spikes per anomalous series are drawn uniformly from this inclusive range.
SPIKES_PER_SERIES = (1, 2)

LABEL_NORMAL = 0
LABEL_ANOMALOUS = 1


@dataclass(frozen=True)
class TimeSeries:
    """A fixed-length multichannel sequence.

    ``values`` has shape (channels, T) aligned with ``channel_names``.
    ``injection_sites`` records where spikes were injected (generator ground
    truth, evaluation only); ``None`` for real or normal data.
    """

    id: int
    channel_names: tuple[str, ...]
    values: np.ndarray
    label: int | None = None
    injection_sites: tuple[tuple[str, int], ...] | None = None

    def __post_init__(self):
        try:
            vals = np.asarray(self.values, dtype=np.float64)
        except ValueError:
            raise FormatError(f"series {self.id}: channels have ragged lengths") from None
        if vals.ndim != 2:
            raise FormatError(f"series {self.id}: values must be 2-D (channels, T)")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "channel_names", tuple(self.channel_names))
        if len(self.channel_names) != vals.shape[0]:
            raise FormatError(
                f"series {self.id}: {len(self.channel_names)} channel names "
                f"for {vals.shape[0]} channels"
            )
        if len(set(self.channel_names)) != len(self.channel_names):
            raise FormatError(f"series {self.id}: duplicate channel names")
        if vals.size and not np.all(np.isfinite(vals)):
            raise FormatError(f"series {self.id}: non-finite values")
        if self.label is not None and self.label not in (LABEL_NORMAL, LABEL_ANOMALOUS):
            raise LabelError(f"series {self.id}: label must be 0 or 1, got {self.label!r}")

    @property
    def length(self) -> int:
        return self.values.shape[1]

    @property
    def n_channels(self) -> int:
        return self.values.shape[0]

    def channel(self, name: str) -> np.ndarray:
        try:
            idx = self.channel_names.index(name)
        except ValueError:
            raise FormatError(f"series {self.id}: no channel named {name!r}") from None
        return self.values[idx]

    def validate(self) -> None:
        """Full invariant check; structural checks already ran at construction."""
        if self.n_channels == 0:
            raise FormatError(f"series {self.id}: no channels")
        if self.length < 2:
            raise FormatError(f"series {self.id}: length {self.length} < 2")

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (
            self.id == other.id
            and self.channel_names == other.channel_names
            and self.label == other.label
            and self.injection_sites == other.injection_sites
            and self.values.shape == other.values.shape
            and bool(np.array_equal(self.values, other.values))
        )


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of series sharing one channel schema and length."""

    series: tuple[TimeSeries, ...]
    channel_schema: tuple[str, ...]
    split: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "series", tuple(self.series))
        object.__setattr__(self, "channel_schema", tuple(self.channel_schema))
        if self.split not in (None, "train", "val", "test"):
            raise ConfigError(f"split must be train/val/test, got {self.split!r}")
        ids = [s.id for s in self.series]
        if len(set(ids)) != len(ids):
            raise FormatError("duplicate series ids in dataset")
        lengths = {s.length for s in self.series}
        if len(lengths) > 1:
            raise FormatError(f"series lengths differ: {sorted(lengths)}")
        for s in self.series:
            if s.channel_names != self.channel_schema:
                raise FormatError(
                    f"series {s.id}: channels {s.channel_names} do not match "
                    f"schema {self.channel_schema}"
                )

    def __len__(self) -> int:
        return len(self.series)

    def __iter__(self):
        return iter(self.series)

    @property
    def length(self) -> int:
        if not self.series:
            raise FormatError("empty dataset has no length")
        return self.series[0].length

    def validate(self) -> None:
        if not self.channel_schema:
            raise FormatError("dataset has an empty channel schema")
        for s in self.series:
            s.validate()

    def labels(self) -> np.ndarray:
        labs = []
        for s in self.series:
            if s.label is None:
                raise LabelError(f"series {s.id} is unlabeled")
            labs.append(s.label)
        return np.asarray(labs, dtype=np.int64)

    def to_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Stacked (N, C, T) values and (N,) labels."""
        x = np.stack([s.values for s in self.series]) if self.series else np.zeros((0, 0, 0))
        return x, self.labels()

    def by_id(self, series_id: int) -> TimeSeries:
        for s in self.series:
            if s.id == series_id:
                return s
        raise FormatError(f"no series with id {series_id}")


@dataclass(frozen=True)
class GenConfig:
    """Knobs of the synthetic generator.

    ``spike_magnitude_range`` is expressed in multiples of the pre-spike
    channel standard deviation; the lower bound must stay >= 3 so injected
    points remain separable from clipped background noise.
    """

    n_series: int
    length: int = 50
    anomaly_fraction: float = 0.15
    spike_magnitude_range: tuple[float, float] = (4.0, 8.0)
    seed: int = 0

    def __post_init__(self):
        if self.n_series < 1:
            raise ConfigError(f"n_series must be >= 1, got {self.n_series}")
        if self.length < 8:
            raise ConfigError(f"length must be >= 8, got {self.length}")
        if not 0.0 < self.anomaly_fraction < 1.0:
            raise ConfigError(
                f"anomaly_fraction must lie in (0, 1), got {self.anomaly_fraction}"
            )
        low, high = self.spike_magnitude_range
        if low < 3.0:
            raise ConfigError(f"spike_magnitude_range low must be >= 3, got {low}")
        if high < low:
            raise ConfigError(
                f"spike_magnitude_range high {high} is below low {low}"
            )


def generate_synthetic(config: GenConfig) -> Dataset:
    """Generate a labeled synthetic dataset, deterministically per seed.

    Exactly ``round(n_series * anomaly_fraction)`` series are anomalous.
    Draw order is fixed: series in id order, channels in schema order, spike
    parameters after the base signals of their series.
    """
    rng = np.random.default_rng(config.seed)
    n = config.n_series
    t_len = config.length
    n_anomalous = int(round(n * config.anomaly_fraction))
    anomalous_ids = set(int(i) for i in rng.permutation(n)[:n_anomalous])

    t = np.arange(t_len, dtype=np.float64)
    series = []
    for i in range(n):
        values = np.empty((len(DEFAULT_CHANNELS), t_len))
        for c in range(len(DEFAULT_CHANNELS)):
            amp = rng.uniform(0.5, 2.0)
            freq = rng.uniform(1.0, 4.0)
            phase = rng.uniform(0.0, 2.0 * math.pi)
            noise_sigma = 0.1 * amp
            noise = rng.normal(0.0, noise_sigma, size=t_len)
            np.clip(noise, -3.0 * noise_sigma, 3.0 * noise_sigma, out=noise)
            values[c] = amp * np.sin(2.0 * math.pi * freq * t / t_len + phase) + noise

        sites: tuple[tuple[str, int], ...] | None = None
        if i in anomalous_ids:
            sites = _inject_spikes(rng, values, config)
        series.append(
            TimeSeries(
                id=i,
                channel_names=DEFAULT_CHANNELS,
                values=values,
                label=LABEL_ANOMALOUS if sites is not None else LABEL_NORMAL,
                injection_sites=sites,
            )
        )
    return Dataset(series=tuple(series), channel_schema=DEFAULT_CHANNELS)


def _inject_spikes(rng, values: np.ndarray, config: GenConfig) -> tuple[tuple[str, int], ...]:
    """Inject 1-2 point spikes into torque/temperature, in place.

    The spike displaces the base value away from the channel mean, so its
    deviation is at least ``m`` pre-spike standard deviations regardless of
    where on the sinusoid it lands. Means/stds are taken before any spike is
    applied so a second spike cannot shrink the first one's margin.
    """
    t_len = values.shape[1]
    spikeable = [DEFAULT_CHANNELS.index(name) for name in SPIKE_CHANNELS]
    pre_mean = values.mean(axis=1)
    pre_std = values.std(axis=1)

    n_spikes = int(rng.integers(SPIKES_PER_SERIES[0], SPIKES_PER_SERIES[1] + 1))
    sites: list[tuple[str, int]] = []
    taken: set[tuple[int, int]] = set()
    for _ in range(n_spikes):
        while True:
            chan = int(rng.choice(spikeable))
            idx = int(rng.integers(0, t_len))
            if (chan, idx) not in taken:
                taken.add((chan, idx))
                break
        magnitude = rng.uniform(*config.spike_magnitude_range)
        base = values[chan, idx]
        sign = 1.0 if base >= pre_mean[chan] else -1.0
        values[chan, idx] = base + sign * magnitude * pre_std[chan]
        sites.append((DEFAULT_CHANNELS[chan], idx))
    return tuple(sites)


@dataclass(frozen=True)
class SchemaSpec:
    """Declares how a CSV file maps onto series.

    ``wide`` layout: one row per series, columns ``<chan>_t<k>``.
    ``long`` layout: one row per timestep, one column per channel, rows
    grouped by id in file order (or ordered by ``time_column`` if given).
    ``channels`` may be left empty for wide files, where the channel order
    is recovered from the header.
    """

    layout: str = "wide"
    id_column: str = "id"
    label_column: str = "label"
    time_column: str | None = None
    channels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.layout not in ("wide", "long"):
            raise ConfigError(f"layout must be 'wide' or 'long', got {self.layout!r}")
        object.__setattr__(self, "channels", tuple(self.channels))


def _truth_path(path: Path) -> Path:
    name = path.name[: -len(".csv")] if path.name.endswith(".csv") else path.name
    return path.with_name(name + ".truth.json")


def save_csv(dataset: Dataset, path: str | Path) -> None:
    """Write a dataset in wide CSV layout plus a truth sidecar if needed."""
    dataset.validate()
    path = Path(path)
    header = ["id", "label"]
    t_len = dataset.length if len(dataset) else 0
    for chan in dataset.channel_schema:
        header.extend(f"{chan}_t{k}" for k in range(t_len))

    lines = [",".join(header)]
    for s in dataset.series:
        cells = [str(s.id), "" if s.label is None else str(s.label)]
        for row in s.values:
            cells.extend(repr(float(v)) for v in row)
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")

    truth = {
        str(s.id): [{"channel": c, "index": i} for c, i in s.injection_sites]
        for s in dataset.series
        if s.injection_sites
    }
    if truth:
        _truth_path(path).write_text(
            json.dumps(truth, sort_keys=True), encoding="utf-8", newline="\n"
        )


def load_csv(path: str | Path, schema: SchemaSpec | None = None) -> Dataset:
    """Parse a CSV file into a validated dataset.

    Raises FormatError (ragged rows, citing the 1-based file row), ParseError
    (non-numeric cells) or LabelError (labels other than 0/1/empty).
    """
    schema = schema or SchemaSpec()
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty file")
    header, data_rows = rows[0], rows[1:]

    if schema.layout == "wide":
        dataset = _parse_wide(path, header, data_rows, schema)
    else:
        dataset = _parse_long(path, header, data_rows, schema)

    truth_file = _truth_path(path)
    if truth_file.exists():
        truth = json.loads(truth_file.read_text(encoding="utf-8"))
        patched = []
        for s in dataset.series:
            entry = truth.get(str(s.id))
            if entry:
                sites = tuple((d["channel"], int(d["index"])) for d in entry)
                patched.append(replace(s, injection_sites=sites))
            else:
                patched.append(s)
        dataset = Dataset(tuple(patched), dataset.channel_schema, dataset.split)
    dataset.validate()
    return dataset


def _parse_label(raw: str, where: str) -> int | None:
    raw = raw.strip()
    if raw == "":
        return None
    if raw == "0":
        return LABEL_NORMAL
    if raw == "1":
        return LABEL_ANOMALOUS
    raise LabelError(f"{where}: unknown label value {raw!r}")


def _parse_id(raw: str, where: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ParseError(f"{where}: id {raw!r} is not an integer") from None


def _parse_cell(raw: str, where: str) -> float:
    try:
        val = float(raw)
    except ValueError:
        raise ParseError(f"{where}: {raw!r} is not numeric") from None
    if not math.isfinite(val):
        raise ParseError(f"{where}: non-finite value {raw!r}")
    return val


def _wide_channels(header: list[str], schema: SchemaSpec) -> tuple[tuple[str, ...], int]:
    """Recover (channel order, T) from `<chan>_t<k>` header columns."""
    if header[:2] != [schema.id_column, schema.label_column]:
        raise FormatError(
            f"header must start with '{schema.id_column},{schema.label_column}', "
            f"got {header[:2]}"
        )
    channels: list[str] = []
    counts: dict[str, int] = {}
    for col in header[2:]:
        name, sep, step = col.rpartition("_t")
        if not sep or not step.isdigit():
            raise FormatError(f"column {col!r} does not match '<channel>_t<k>'")
        if name not in counts:
            channels.append(name)
            counts[name] = 0
        if int(step) != counts[name]:
            raise FormatError(f"column {col!r} out of order (expected t{counts[name]})")
        counts[name] += 1
    if not channels:
        raise FormatError("no channel columns in header")
    t_len = counts[channels[0]]
    for name, cnt in counts.items():
        if cnt != t_len:
            raise FormatError(f"channel {name!r} has {cnt} steps, expected {t_len}")
    if schema.channels and tuple(channels) != schema.channels:
        raise FormatError(
            f"header channels {tuple(channels)} do not match declared {schema.channels}"
        )
    return tuple(channels), t_len


def _parse_wide(path, header, data_rows, schema) -> Dataset:
    channels, t_len = _wide_channels(header, schema)
    expected = 2 + len(channels) * t_len
    series = []
    for rownum, row in enumerate(data_rows, start=2):
        where = f"{path}:row {rownum}"
        if len(row) != expected:
            raise FormatError(f"{where}: {len(row)} fields, expected {expected}")
        sid = _parse_id(row[0], where)
        label = _parse_label(row[1], where)
        flat = [_parse_cell(cell, where) for cell in row[2:]]
        values = np.asarray(flat).reshape(len(channels), t_len)
        series.append(TimeSeries(sid, channels, values, label))
    return Dataset(tuple(series), channels)


def _parse_long(path, header, data_rows, schema) -> Dataset:
    if not schema.channels:
        fixed = {schema.id_column, schema.label_column, schema.time_column}
        channels = tuple(col for col in header if col not in fixed)
    else:
        channels = schema.channels
    for col in (schema.id_column, schema.label_column, *channels):
        if col not in header:
            raise FormatError(f"missing column {col!r} in header")
    col_of = {name: header.index(name) for name in header}
    time_col = col_of[schema.time_column] if schema.time_column else None

    groups: dict[int, list[tuple[int, list[float], int | None]]] = {}
    order: list[int] = []
    for rownum, row in enumerate(data_rows, start=2):
        where = f"{path}:row {rownum}"
        if len(row) != len(header):
            raise FormatError(f"{where}: {len(row)} fields, expected {len(header)}")
        sid = _parse_id(row[col_of[schema.id_column]], where)
        label = _parse_label(row[col_of[schema.label_column]], where)
        point = [_parse_cell(row[col_of[ch]], where) for ch in channels]
        tick = _parse_id(row[time_col], where) if time_col is not None else rownum
        if sid not in groups:
            groups[sid] = []
            order.append(sid)
        groups[sid].append((tick, point, label))

    series = []
    t_len = None
    for sid in order:
        entries = sorted(groups[sid], key=lambda e: e[0])
        if t_len is None:
            t_len = len(entries)
        elif len(entries) != t_len:
            raise FormatError(
                f"{path}: series {sid} has {len(entries)} timesteps, expected {t_len}"
            )
        labels = {e[2] for e in entries}
        if len(labels) > 1:
            raise LabelError(f"{path}: series {sid} has conflicting labels")
        values = np.asarray([e[1] for e in entries]).T
        series.append(TimeSeries(sid, channels, values, labels.pop()))
    return Dataset(tuple(series), channels)


def _largest_remainder(quotas: Sequence[float], total: int) -> list[int]:
    """Integer allocation matching `total`, each part within 1 of its quota."""
    floors = [int(math.floor(q)) for q in quotas]
    leftover = total - sum(floors)
    by_frac = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - floors[i]), i))
    for i in by_frac[:leftover]:
        floors[i] += 1
    return floors


def split(
    dataset: Dataset,
    fractions: tuple[float, float, float],
    seed: int,
) -> tuple[Dataset, Dataset, Dataset]:
    """Partition into train/val/test, stratified by label.

    Split sizes follow the fractions by largest remainder; the anomalous
    class is then allocated the same way inside those sizes, so each split's
    anomalous count stays within one series of proportional.
    """
    if any(f <= 0 for f in fractions):
        raise ConfigError(f"fractions must be positive, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"fractions must sum to 1, got {sum(fractions)!r}")
    n = len(dataset)
    sizes = _largest_remainder([f * n for f in fractions], n)
    if any(s == 0 for s in sizes):
        raise SplitError(f"fractions {fractions} leave an empty split for {n} series")

    labels = dataset.labels()
    anom_idx = [i for i, y in enumerate(labels) if y == LABEL_ANOMALOUS]
    norm_idx = [i for i, y in enumerate(labels) if y == LABEL_NORMAL]
    quota = [f * len(anom_idx) for f in fractions]
    anom_counts = _largest_remainder(quota, len(anom_idx))
    # A tiny split can be allocated more anomalous members than it has room
    # for; push the overflow into the split with the most spare capacity.
    for i in range(3):
        while anom_counts[i] > sizes[i]:
            spare = max(range(3), key=lambda j: sizes[j] - anom_counts[j])
            anom_counts[i] -= 1
            anom_counts[spare] += 1

    rng = np.random.default_rng(seed)
    anom_perm = [anom_idx[i] for i in rng.permutation(len(anom_idx))]
    norm_perm = [norm_idx[i] for i in rng.permutation(len(norm_idx))]

    parts = []
    a_at = n_at = 0
    for name, size, a_count in zip(("train", "val", "test"), sizes, anom_counts):
        take = anom_perm[a_at : a_at + a_count] + norm_perm[n_at : n_at + size - a_count]
        a_at += a_count
        n_at += size - a_count
        members = tuple(dataset.series[i] for i in sorted(take))
        parts.append(Dataset(members, dataset.channel_schema, split=name))
    return parts[0], parts[1], parts[2]
