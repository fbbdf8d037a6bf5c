#!/usr/bin/env python3
"""Regenerate the seeded golden artifacts and print their regression values.

The numbers this prints (accuracies, flip counts, dataset hash, golden
series id) are frozen into tests/golden_values.py; the explanation texts go
to tests/data/. Run it after any intentional change to the generator,
training defaults or explanation templates, and update the frozen values in
the same commit.

Usage: python3 scripts/golden_run.py [--out DIR]
"""

from __future__ import annotations

import argparse
import hashlib
import json
from pathlib import Path

from tsnarrate import explain as ex
from tsnarrate import network
from tsnarrate.cli import explain_series
from tsnarrate.dataset import GenConfig, generate_synthetic, save_csv, split
from tsnarrate.features import FeatureConfig
from tsnarrate.harness import classify_all, flip_rate, render_flip_table

GOLDEN_GEN = GenConfig(n_series=1500, length=50, anomaly_fraction=0.15, seed=7)
GOLDEN_FRACTIONS = (1000 / 1500, 200 / 1500, 300 / 1500)
GOLDEN_SPLIT_SEED = 7
GOLDEN_INIT_SEED = 1


def build(out_dir: Path) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    data = generate_synthetic(GOLDEN_GEN)
    dataset_csv = out_dir / "golden_all.csv"
    save_csv(data, dataset_csv)
    dataset_sha = hashlib.sha256(dataset_csv.read_bytes()).hexdigest()

    train_set, val_set, test_set = split(data, GOLDEN_FRACTIONS, seed=GOLDEN_SPLIT_SEED)
    for part, name in ((train_set, "train"), (val_set, "val"), (test_set, "test")):
        save_csv(part, out_dir / f"golden_{name}.csv")

    net = network.init(network.default_architecture(), seed=GOLDEN_INIT_SEED)
    trained = network.train(net, train_set, val_set, network.TrainConfig())
    feature_config = FeatureConfig()
    meta = dict(trained.training_meta)
    meta["explain_thresholds"] = ex.feature_thresholds(train_set, feature_config)
    meta["explain_feature_config"] = feature_config.to_dict()
    trained = network.Network(trained.architecture, trained.params, meta)
    network.save(trained, out_dir / "golden_model.tsxn")

    val_metrics, _ = classify_all(trained, val_set)
    test_metrics, test_preds = classify_all(trained, test_set)
    flips = {w: flip_rate(trained, test_set, window=w) for w in (1, 3)}

    golden_series = None
    for series, pred in zip(test_set.series, test_preds):
        if series.label == 1 and pred.label == 1:
            golden_series = series
            break
    texts = {}
    for level in ("expert", "novice"):
        explanation = explain_series(
            trained,
            golden_series,
            level=level,
            thresholds=meta["explain_thresholds"],
        )
        texts[level] = ex.render(explanation, "plain_text")
        (out_dir / f"golden_explanation_{level}.txt").write_text(
            texts[level] + "\n", encoding="utf-8"
        )

    print(render_flip_table(list(flips.values())))
    return {
        "dataset_sha256": dataset_sha,
        "val_accuracy": val_metrics.accuracy,
        "test_accuracy": test_metrics.accuracy,
        "test_metrics": test_metrics.to_dict(),
        "epochs_trained": meta["epochs_trained"],
        "best_epoch": meta["best_epoch"],
        "best_val_loss": meta["best_val_loss"],
        "flip_window1": flips[1].to_dict(),
        "flip_window3": flips[3].to_dict(),
        "golden_series_id": golden_series.id,
        "explain_thresholds": meta["explain_thresholds"],
    }


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="golden_artifacts", help="output directory")
    args = parser.parse_args()
    summary = build(Path(args.out))
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
