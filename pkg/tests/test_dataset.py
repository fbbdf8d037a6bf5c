from __future__ import annotations

import hashlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsnarrate.dataset import (
    Dataset,
    GenConfig,
    SchemaSpec,
    TimeSeries,
    generate_synthetic,
    load_csv,
    save_csv,
    split,
)
from tsnarrate.errors import ConfigError, FormatError, LabelError, ParseError, SplitError

from golden_values import SMALL_DATASET_SHA256


def z_scores(row: np.ndarray) -> np.ndarray:
    return np.abs(row - row.mean()) / row.std()


class TestGenerate:
    def test_anomaly_count_exact(self):
        data = generate_synthetic(GenConfig(n_series=10, anomaly_fraction=0.2, seed=7))
        assert len(data) == 10
        assert int(data.labels().sum()) == 2

    def test_deterministic_per_seed(self):
        cfg = GenConfig(n_series=10, anomaly_fraction=0.2, seed=7)
        a, b = generate_synthetic(cfg), generate_synthetic(cfg)
        assert a.series == b.series

    def test_different_seeds_differ(self):
        a = generate_synthetic(GenConfig(n_series=10, anomaly_fraction=0.2, seed=1))
        b = generate_synthetic(GenConfig(n_series=10, anomaly_fraction=0.2, seed=2))
        assert a.series != b.series

    def test_zscore_scan_separates_labels(self):
        # Independent z-score pass over a large generated set: anomalous
        # series show a >3 sigma point in torque/temperature, normals never
        # do in any channel, and pressure stays below 3 sigma everywhere.
        data = generate_synthetic(GenConfig(n_series=1000, anomaly_fraction=0.15, seed=1))
        for series in data:
            by_name = {
                name: z_scores(series.values[c]).max()
                for c, name in enumerate(series.channel_names)
            }
            spike_z = max(by_name["torque"], by_name["temperature"])
            assert by_name["pressure"] <= 3
            if series.label == 1:
                assert spike_z > 3, f"series {series.id} labeled anomalous without a spike"
            else:
                assert max(by_name.values()) <= 3, f"normal series {series.id} has z > 3"

    def test_label_iff_injection_sites(self):
        data = generate_synthetic(GenConfig(n_series=200, anomaly_fraction=0.3, seed=5))
        for series in data:
            if series.label == 1:
                assert series.injection_sites
                assert all(c in ("torque", "temperature") for c, _ in series.injection_sites)
                assert 1 <= len(series.injection_sites) <= 2
            else:
                assert series.injection_sites is None

    @pytest.mark.parametrize(
        "kwargs, field",
        [
            (dict(n_series=0), "n_series"),
            (dict(n_series=5, length=4), "length"),
            (dict(n_series=5, anomaly_fraction=0.0), "anomaly_fraction"),
            (dict(n_series=5, anomaly_fraction=1.0), "anomaly_fraction"),
            (dict(n_series=5, spike_magnitude_range=(2.0, 8.0)), "spike_magnitude_range"),
            (dict(n_series=5, spike_magnitude_range=(4.0, 3.0)), "spike_magnitude_range"),
        ],
    )
    def test_invalid_config_names_field(self, kwargs, field):
        with pytest.raises(ConfigError, match=field):
            GenConfig(**kwargs)


class TestCsv:
    def _tiny(self) -> Dataset:
        series = [
            TimeSeries(0, ("a", "b"), [[1.0, 2.0, 3.0, 4.0], [0.1, 0.2, 0.3, 0.4]], label=0),
            TimeSeries(1, ("a", "b"), [[4.0, 3.0, 2.0, 1.0], [0.4, 0.3, 0.2, 0.1]], label=1),
            TimeSeries(2, ("a", "b"), [[1.5, 2.5, 3.5, 4.5], [0.0, 0.0, 0.0, 0.0]], label=0),
        ]
        return Dataset(tuple(series), ("a", "b"))

    def test_wide_parse(self, tmp_path):
        path = tmp_path / "tiny.csv"
        save_csv(self._tiny(), path)
        loaded = load_csv(path)
        assert len(loaded) == 3
        assert int(loaded.labels().sum()) == 1
        assert loaded.channel_schema == ("a", "b")

    def test_round_trip_exact(self, tmp_path):
        data = generate_synthetic(GenConfig(n_series=12, anomaly_fraction=0.25, seed=3))
        path = tmp_path / "data.csv"
        save_csv(data, path)
        loaded = load_csv(path)
        assert loaded.series == data.series  # includes injection metadata

    def test_ragged_row_cites_row_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,label,a_t0,a_t1\n0,0,1.0,2.0\n1,1,3.0\n")
        with pytest.raises(FormatError, match="row 3"):
            load_csv(path)

    def test_non_numeric_cell_location(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,label,a_t0,a_t1\n0,0,1.0,oops\n")
        with pytest.raises(ParseError, match="row 2.*oops"):
            load_csv(path)

    def test_unknown_label(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,label,a_t0,a_t1\n0,7,1.0,2.0\n")
        with pytest.raises(LabelError, match="7"):
            load_csv(path)

    def test_empty_channel_dataset_rejected(self, tmp_path):
        empty = Dataset((TimeSeries(0, (), np.zeros((0, 4))),), ())
        with pytest.raises(FormatError):
            save_csv(empty, tmp_path / "never.csv")

    def test_golden_bytes_stable(self, tmp_path):
        data = generate_synthetic(GenConfig(n_series=10, anomaly_fraction=0.2, seed=7))
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        save_csv(data, a)
        save_csv(data, b)
        assert a.read_bytes() == b.read_bytes()
        assert hashlib.sha256(a.read_bytes()).hexdigest() == SMALL_DATASET_SHA256

    def test_truth_sidecar_written_for_anomalies(self, tmp_path):
        data = generate_synthetic(GenConfig(n_series=10, anomaly_fraction=0.2, seed=7))
        path = tmp_path / "data.csv"
        save_csv(data, path)
        assert (tmp_path / "data.truth.json").exists()

    def test_long_layout(self, tmp_path):
        path = tmp_path / "long.csv"
        lines = ["id,label,t,a,b"]
        for sid, label in ((0, 0), (1, 1)):
            for t in range(4):
                lines.append(f"{sid},{label},{t},{t + sid}.5,{t * 2}.0")
        path.write_text("\n".join(lines) + "\n")
        loaded = load_csv(path, SchemaSpec(layout="long", time_column="t"))
        assert len(loaded) == 2
        assert loaded.channel_schema == ("a", "b")
        assert loaded.series[1].label == 1
        np.testing.assert_array_equal(loaded.series[0].channel("a"), [0.5, 1.5, 2.5, 3.5])

    def test_long_ragged_group(self, tmp_path):
        path = tmp_path / "long.csv"
        rows = ["id,label,a", "0,0,1.0", "0,0,2.0", "1,0,1.0"]
        path.write_text("\n".join(rows) + "\n")
        with pytest.raises(FormatError, match="series 1"):
            load_csv(path, SchemaSpec(layout="long"))


class TestSplit:
    def test_sizes(self):
        data = generate_synthetic(GenConfig(n_series=10, anomaly_fraction=0.2, seed=7))
        tr, va, te = split(data, (0.6, 0.2, 0.2), seed=0)
        assert (len(tr), len(va), len(te)) == (6, 2, 2)
        assert (tr.split, va.split, te.split) == ("train", "val", "test")

    def test_deterministic(self):
        data = generate_synthetic(GenConfig(n_series=20, anomaly_fraction=0.25, seed=2))
        first = split(data, (0.5, 0.25, 0.25), seed=9)
        second = split(data, (0.5, 0.25, 0.25), seed=9)
        for a, b in zip(first, second):
            assert [s.id for s in a] == [s.id for s in b]

    def test_reference_60000_split(self):
        values = np.array([[0.0, 1.0]])
        series = tuple(
            TimeSeries(i, ("x",), values, label=int(i < 10054)) for i in range(60000)
        )
        data = Dataset(series, ("x",))
        tr, va, te = split(data, (0.75, 1 / 12, 1 / 6), seed=0)
        assert (len(tr), len(va), len(te)) == (45000, 5000, 10000)

    def test_partition_and_stratification(self):
        data = generate_synthetic(GenConfig(n_series=53, anomaly_fraction=0.21, seed=11))
        fractions = (0.5, 0.3, 0.2)
        parts = split(data, fractions, seed=3)
        ids = [s.id for part in parts for s in part]
        assert sorted(ids) == [s.id for s in data]
        assert len(set(ids)) == len(ids)
        n_anom = int(data.labels().sum())
        for part, frac in zip(parts, fractions):
            assert abs(int(part.labels().sum()) - frac * n_anom) <= 1

    def test_empty_split_rejected(self):
        data = generate_synthetic(GenConfig(n_series=2, anomaly_fraction=0.4, seed=0))
        with pytest.raises(SplitError):
            split(data, (0.8, 0.1, 0.1), seed=0)

    def test_bad_fractions(self):
        data = generate_synthetic(GenConfig(n_series=10, anomaly_fraction=0.2, seed=0))
        with pytest.raises(ConfigError):
            split(data, (0.5, 0.4, 0.2), seed=0)
        with pytest.raises(ConfigError):
            split(data, (0.8, -0.1, 0.3), seed=0)

    @settings(max_examples=25, deadline=None)
    @given(
        n=st.integers(min_value=6, max_value=60),
        seed=st.integers(min_value=0, max_value=2**31),
    )
    def test_partition_property(self, n, seed):
        frac = max(1, round(0.2 * n)) / n
        if not 0 < frac < 1:
            frac = 0.2
        data = generate_synthetic(GenConfig(n_series=n, anomaly_fraction=frac, seed=seed % 997))
        parts = split(data, (0.5, 0.25, 0.25), seed=seed)
        ids = sorted(s.id for part in parts for s in part)
        assert ids == sorted(s.id for s in data)


class TestInvariants:
    def test_duplicate_channel_names(self):
        with pytest.raises(FormatError):
            TimeSeries(0, ("a", "a"), np.zeros((2, 4)))

    def test_non_finite_values(self):
        with pytest.raises(FormatError):
            TimeSeries(0, ("a",), [[1.0, np.nan, 2.0]])

    def test_ragged_channels(self):
        with pytest.raises(FormatError):
            TimeSeries(0, ("a", "b"), [[1.0, 2.0], [1.0, 2.0, 3.0]])

    def test_duplicate_ids(self):
        s = TimeSeries(0, ("a",), [[1.0, 2.0]])
        with pytest.raises(FormatError):
            Dataset((s, s), ("a",))

    def test_schema_mismatch(self):
        s = TimeSeries(0, ("a",), [[1.0, 2.0]])
        with pytest.raises(FormatError):
            Dataset((s,), ("b",))
