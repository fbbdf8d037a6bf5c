from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import pytest

from tsnarrate import explain as ex
from tsnarrate import network
from tsnarrate.dataset import Dataset, GenConfig, generate_synthetic, save_csv, split
from tsnarrate.features import FeatureConfig

from golden_values import (
    GOLDEN_FRACTIONS,
    GOLDEN_INIT_SEED,
    GOLDEN_N_SERIES,
    GOLDEN_SEED,
    GOLDEN_SPLIT_SEED,
)


@dataclass(frozen=True)
class GoldenRun:
    """Seeded end-to-end artifacts shared by the whole session."""

    dataset: Dataset
    train_set: Dataset
    val_set: Dataset
    test_set: Dataset
    net: network.Network
    thresholds: dict
    dir: Path
    model_path: Path
    train_csv: Path
    val_csv: Path
    test_csv: Path


@pytest.fixture(scope="session")
def golden(tmp_path_factory) -> GoldenRun:
    out = tmp_path_factory.mktemp("golden")
    data = generate_synthetic(
        GenConfig(n_series=GOLDEN_N_SERIES, anomaly_fraction=0.15, seed=GOLDEN_SEED)
    )
    train_set, val_set, test_set = split(data, GOLDEN_FRACTIONS, seed=GOLDEN_SPLIT_SEED)

    net = network.init(network.default_architecture(), seed=GOLDEN_INIT_SEED)
    trained = network.train(net, train_set, val_set, network.TrainConfig())
    feature_config = FeatureConfig()
    meta = dict(trained.training_meta)
    meta["explain_thresholds"] = ex.feature_thresholds(train_set, feature_config)
    meta["explain_feature_config"] = feature_config.to_dict()
    trained = network.Network(trained.architecture, trained.params, meta)

    paths = {}
    for part, name in ((train_set, "train"), (val_set, "val"), (test_set, "test")):
        paths[name] = out / f"golden_{name}.csv"
        save_csv(part, paths[name])
    model_path = out / "golden_model.tsxn"
    network.save(trained, model_path)

    return GoldenRun(
        dataset=data,
        train_set=train_set,
        val_set=val_set,
        test_set=test_set,
        net=trained,
        thresholds=meta["explain_thresholds"],
        dir=out,
        model_path=model_path,
        train_csv=paths["train"],
        val_csv=paths["val"],
        test_csv=paths["test"],
    )
