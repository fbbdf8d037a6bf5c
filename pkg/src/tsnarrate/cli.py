"""Command-line front end.

Subcommands: ``gen`` (synthesize and split a dataset), ``train`` (fit the
classifier and store explanation thresholds with it), ``explain`` (run the
full per-series pipeline: classify, trace influence, extract features,
sanity-check, generate text), ``eval`` (metrics plus the flip-rate table)
and ``features`` (ad-hoc feature report for one series).

Configuration is a single flat JSON document; command-line flags override
file values and unknown keys are rejected. Every run logs its fully
resolved configuration to stderr; stdout carries only the primary output.
Failures exit non-zero with a one-line ``error: <category>: <message>``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import dataset as ds
from . import explain as ex
from . import harness, influence, network, sanity
from .errors import EXIT_CODES, ConfigError, ToolkitError
from .features import FeatureConfig, feature_report

log = logging.getLogger("tsnarrate")

DEFAULTS: dict = {
    "seed": 0,
    "out": None,
    # gen
    "n_series": 1500,
    "length": 50,
    "anomaly_fraction": 0.15,
    "spike_low": 4.0,
    "spike_high": 8.0,
    "train_fraction": 0.7,
    "val_fraction": 0.15,
    "test_fraction": 0.15,
    "prefix": "data",
    # train
    "train_csv": None,
    "val_csv": None,
    "lr": 0.05,
    "epochs": 30,
    "batch_size": 4,
    "lambda": 1e-3,
    "beta": 1.0,
    "patience": 30,
    # explain / eval / features
    "model": None,
    "data_csv": None,
    "test_csv": None,
    "id": None,
    "index": None,
    "level": "expert",
    "window": 1,
    "tau": 0.8,
    "top_k": 3,
    "format": None,
    "windows": [1, 3],
    # feature extraction
    "block_size": 10,
    "kl_bins": 5,
    "kl_epsilon": 1e-4,
    "r_sigma": 3.0,
    "peak_max_width": 5,
    "peak_snr": 1.0,
    "kl_mode": "max_kl",
}


def _load_config_file(path: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path}: expected a flat JSON object")
    for key in doc:
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
    return doc


def _resolve(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        cfg.update(_load_config_file(args.config))
    for key in DEFAULTS:
        flag = getattr(args, key.replace("-", "_"), None)
        if flag is not None:
            cfg[key] = flag
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["out"] = args.out
    log.info("resolved config: %s", json.dumps(cfg, sort_keys=True))
    return cfg


def _feature_config(cfg: dict) -> FeatureConfig:
    return FeatureConfig(
        block_size=int(cfg["block_size"]),
        kl_bins=int(cfg["kl_bins"]),
        kl_epsilon=float(cfg["kl_epsilon"]),
        r_sigma=float(cfg["r_sigma"]),
        peak_max_width=int(cfg["peak_max_width"]),
        peak_snr=float(cfg["peak_snr"]),
        kl_mode=str(cfg["kl_mode"]),
    )


def _policy(cfg: dict) -> influence.SalientPolicy:
    return influence.SalientPolicy(
        threshold=float(cfg["tau"]), per_channel_cap=int(cfg["top_k"])
    )


def _pick_series(data: ds.Dataset, cfg: dict) -> ds.TimeSeries:
    if cfg["id"] is not None:
        return data.by_id(int(cfg["id"]))
    if cfg["index"] is not None:
        idx = int(cfg["index"])
        if not 0 <= idx < len(data):
            raise ConfigError(f"index {idx} outside dataset of {len(data)} series")
        return data.series[idx]
    raise ConfigError("select a series with 'id' or 'index'")


def _emit(text: str, cfg: dict) -> None:
    print(text)
    if cfg.get("out"):
        Path(cfg["out"]).write_text(text + "\n", encoding="utf-8")


def explain_series(
    net: network.Network,
    series: ds.TimeSeries,
    *,
    level: str = "expert",
    window: int = 1,
    policy: influence.SalientPolicy = influence.SalientPolicy(),
    feature_config: FeatureConfig = FeatureConfig(),
    thresholds: dict | None = None,
) -> ex.Explanation:
    """Full per-series pipeline; inactive explanation for normal predictions."""
    prediction = network.forward(net, series)
    if prediction.label == ds.LABEL_NORMAL:
        return ex.Explanation(active=False, level=level, prediction=prediction)
    imap = influence.trace(net, series)
    points = influence.top_salient(imap, policy)
    report = feature_report(series, points, feature_config)
    spec = sanity.MaskSpec(
        points=tuple((sp.channel, sp.index) for sp in points), window=window
    )
    sanity_result = sanity.check(net, series, spec)
    return ex.generate(
        prediction, points, report, sanity_result, level, thresholds=thresholds
    )


def cmd_gen(cfg: dict) -> int:
    gen_config = ds.GenConfig(
        n_series=int(cfg["n_series"]),
        length=int(cfg["length"]),
        anomaly_fraction=float(cfg["anomaly_fraction"]),
        spike_magnitude_range=(float(cfg["spike_low"]), float(cfg["spike_high"])),
        seed=int(cfg["seed"]),
    )
    data = ds.generate_synthetic(gen_config)
    fractions = (
        float(cfg["train_fraction"]),
        float(cfg["val_fraction"]),
        float(cfg["test_fraction"]),
    )
    parts = ds.split(data, fractions, seed=int(cfg["seed"]))
    out_dir = Path(cfg["out"] or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    summary: dict = {}
    for part in parts:
        path = out_dir / f"{cfg['prefix']}_{part.split}.csv"
        ds.save_csv(part, path)
        summary[f"{part.split}_csv"] = str(path)
        summary[f"n_{part.split}"] = len(part)
        summary[f"n_{part.split}_anomalous"] = int(part.labels().sum())
    print(json.dumps(summary))
    return 0


def cmd_train(cfg: dict) -> int:
    if not cfg["train_csv"] or not cfg["val_csv"]:
        raise ConfigError("train needs 'train_csv' and 'val_csv'")
    train_set = ds.load_csv(cfg["train_csv"])
    val_set = ds.load_csv(cfg["val_csv"])
    arch = network.Architecture(
        input_channels=len(train_set.channel_schema), input_length=train_set.length
    )
    train_config = network.TrainConfig(
        lr=float(cfg["lr"]),
        epochs=int(cfg["epochs"]),
        batch_size=int(cfg["batch_size"]),
        lambda_=float(cfg["lambda"]),
        beta=float(cfg["beta"]),
        seed=int(cfg["seed"]),
        early_stop_patience=int(cfg["patience"]),
    )
    net = network.init(arch, seed=train_config.seed)
    trained = network.train(net, train_set, val_set, train_config)

    feature_config = _feature_config(cfg)
    meta = dict(trained.training_meta)
    meta["explain_thresholds"] = ex.feature_thresholds(train_set, feature_config)
    meta["explain_feature_config"] = feature_config.to_dict()
    trained = network.Network(trained.architecture, trained.params, meta)

    out_path = Path(cfg["out"] or "model.tsxn")
    network.save(trained, out_path)
    metrics, _ = harness.classify_all(trained, val_set)
    print(
        json.dumps(
            {
                "checkpoint": str(out_path),
                "epochs_trained": meta["epochs_trained"],
                "best_epoch": meta["best_epoch"],
                "final_val_loss": meta["final_val_loss"],
                "val_accuracy": metrics.accuracy,
            }
        )
    )
    return 0


def _load_model(cfg: dict) -> network.Network:
    if not cfg["model"]:
        raise ConfigError("missing 'model' (checkpoint path)")
    return network.load(cfg["model"])


def cmd_explain(cfg: dict) -> int:
    net = _load_model(cfg)
    if not cfg["data_csv"]:
        raise ConfigError("missing 'data_csv'")
    data = ds.load_csv(cfg["data_csv"])
    series = _pick_series(data, cfg)
    explanation = explain_series(
        net,
        series,
        level=str(cfg["level"]),
        window=int(cfg["window"]),
        policy=_policy(cfg),
        feature_config=_feature_config(cfg),
        thresholds=net.training_meta.get("explain_thresholds"),
    )
    if not explanation.active:
        _emit(json.dumps({"active": False, "prediction": "normal"}), cfg)
        return 0
    fmt = cfg["format"] or "json"
    if fmt == "text":
        _emit(ex.render(explanation, "plain_text"), cfg)
    elif fmt == "json":
        _emit(ex.render(explanation, "json"), cfg)
    else:
        raise ConfigError(f"format must be 'text' or 'json', got {fmt!r}")
    return 0


def cmd_eval(cfg: dict) -> int:
    net = _load_model(cfg)
    if not cfg["test_csv"]:
        raise ConfigError("missing 'test_csv'")
    data = ds.load_csv(cfg["test_csv"])
    windows = cfg["windows"]
    if isinstance(windows, str):
        windows = [int(w) for w in windows.split(",") if w.strip()]
    metrics, _ = harness.classify_all(net, data)
    reports = [
        harness.flip_rate(net, data, window=int(w), policy=_policy(cfg)) for w in windows
    ]
    fmt = cfg["format"] or "text"
    if fmt == "json":
        _emit(
            json.dumps(
                {"metrics": metrics.to_dict(), "flip_reports": [r.to_dict() for r in reports]}
            ),
            cfg,
        )
    elif fmt == "text":
        lines = [
            f"accuracy={metrics.accuracy:.4f} precision={metrics.precision:.4f} "
            f"recall={metrics.recall:.4f} f1={metrics.f1:.4f} "
            f"(tp={metrics.tp} fp={metrics.fp} tn={metrics.tn} fn={metrics.fn})",
            harness.render_flip_table(reports),
        ]
        _emit("\n".join(lines), cfg)
    else:
        raise ConfigError(f"format must be 'text' or 'json', got {fmt!r}")
    return 0


def cmd_features(cfg: dict) -> int:
    if not cfg["data_csv"]:
        raise ConfigError("missing 'data_csv'")
    data = ds.load_csv(cfg["data_csv"])
    series = _pick_series(data, cfg)
    report = feature_report(series, [], _feature_config(cfg))
    _emit(json.dumps(report.to_dict()), cfg)
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "explain": cmd_explain,
    "eval": cmd_eval,
    "features": cmd_features,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsnarrate",
        description="Classify multichannel time series and explain anomalous decisions.",
    )
    parser.add_argument("--config", help="flat JSON config file")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", help="output path (directory for gen, file otherwise)")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate and split a synthetic dataset")
    gen.add_argument("--n-series", dest="n_series", type=int)
    gen.add_argument("--length", type=int)
    gen.add_argument("--anomaly-fraction", dest="anomaly_fraction", type=float)
    gen.add_argument("--spike-low", dest="spike_low", type=float)
    gen.add_argument("--spike-high", dest="spike_high", type=float)
    gen.add_argument("--train-fraction", dest="train_fraction", type=float)
    gen.add_argument("--val-fraction", dest="val_fraction", type=float)
    gen.add_argument("--test-fraction", dest="test_fraction", type=float)
    gen.add_argument("--prefix")

    tr = sub.add_parser("train", help="train the classifier")
    tr.add_argument("--train-csv", dest="train_csv")
    tr.add_argument("--val-csv", dest="val_csv")
    tr.add_argument("--lr", type=float)
    tr.add_argument("--epochs", type=int)
    tr.add_argument("--batch-size", dest="batch_size", type=int)
    tr.add_argument("--lambda", dest="lambda", type=float)
    tr.add_argument("--beta", type=float)
    tr.add_argument("--patience", type=int)

    xp = sub.add_parser("explain", help="explain one series end to end")
    ev = sub.add_parser("eval", help="metrics and flip-rate table")
    ft = sub.add_parser("features", help="feature report for one series")
    for p in (xp, ev, ft):
        p.add_argument("--model")
        p.add_argument("--format")
    for p in (xp, ft):
        p.add_argument("--data-csv", dest="data_csv")
        p.add_argument("--id", type=int)
        p.add_argument("--index", type=int)
        for key in ("block_size", "kl_bins", "peak_max_width"):
            p.add_argument(f"--{key.replace('_', '-')}", dest=key, type=int)
        for key in ("kl_epsilon", "r_sigma", "peak_snr"):
            p.add_argument(f"--{key.replace('_', '-')}", dest=key, type=float)
        p.add_argument("--kl-mode", dest="kl_mode")
    xp.add_argument("--level", choices=["novice", "expert"])
    xp.add_argument("--window", type=int)
    xp.add_argument("--tau", type=float)
    xp.add_argument("--top-k", dest="top_k", type=int)
    ev.add_argument("--test-csv", dest="test_csv")
    ev.add_argument("--windows")
    ev.add_argument("--tau", type=float)
    ev.add_argument("--top-k", dest="top_k", type=int)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve(args)
        return COMMANDS[args.command](cfg)
    except ToolkitError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.category, 1)
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return EXIT_CODES["io"]


if __name__ == "__main__":
    sys.exit(main())
