"""Batch evaluation: classification metrics and masking flip rates.

The flip-rate protocol measures how often masking the points an explanation
would highlight actually changes the classifier's decision. Only series the
classifier got right AND labeled anomalous enter the denominator; for each,
the influence map is traced, the salient points are selected with the same
policy the explanation path uses, the points are masked at the requested
window, and the masked series is re-classified. Per-series work is
independent, so aggregate counts do not depend on evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass

from .dataset import Dataset, LABEL_ANOMALOUS
from .influence import SalientPolicy, top_salient, trace
from .network import Network, Prediction, forward_batch
from .sanity import MaskSpec, mask


@dataclass(frozen=True)
class Metrics:
    """Confusion counts plus derived scores for the anomalous class."""

    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else 0.0

    @property
    def precision(self) -> float:
        denom = self.tp + self.fp
        return self.tp / denom if denom else 0.0

    @property
    def recall(self) -> float:
        denom = self.tp + self.fn
        return self.tp / denom if denom else 0.0

    @property
    def f1(self) -> float:
        denom = self.precision + self.recall
        return 2.0 * self.precision * self.recall / denom if denom else 0.0

    def to_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


@dataclass(frozen=True)
class FlipReport:
    window: int
    n_anomalous_correct: int
    n_flipped: int

    @property
    def empty_denominator(self) -> bool:
        return self.n_anomalous_correct == 0

    @property
    def percent_flipped(self) -> float:
        if self.empty_denominator:
            return 0.0
        return 100.0 * self.n_flipped / self.n_anomalous_correct

    def to_dict(self) -> dict:
        return {
            "window": self.window,
            "n_anomalous_correct": self.n_anomalous_correct,
            "n_flipped": self.n_flipped,
            "percent_flipped": self.percent_flipped,
            "empty_denominator": self.empty_denominator,
        }


def classify_all(network: Network, dataset: Dataset) -> tuple[Metrics, list[Prediction]]:
    """Predictions for every series plus confusion metrics against the labels."""
    x, y = dataset.to_arrays()
    p, z = forward_batch(network, x)
    predictions = [Prediction(float(pi), float(zi)) for pi, zi in zip(p, z)]
    tp = fp = tn = fn = 0
    for pred, label in zip(predictions, y):
        if label == LABEL_ANOMALOUS:
            tp += pred.label == 1
            fn += pred.label == 0
        else:
            fp += pred.label == 1
            tn += pred.label == 0
    return Metrics(tp=tp, fp=fp, tn=tn, fn=fn), predictions


def flip_rate(
    network: Network,
    dataset: Dataset,
    window: int = 1,
    policy: SalientPolicy = SalientPolicy(),
) -> FlipReport:
    """Flip statistics over correctly classified anomalous series only."""
    _, predictions = classify_all(network, dataset)
    eligible = 0
    flipped = 0
    for series, pred in zip(dataset.series, predictions):
        if series.label != LABEL_ANOMALOUS or pred.label != 1:
            continue
        eligible += 1
        points = top_salient(trace(network, series), policy)
        if not points:
            continue
        spec = MaskSpec(points=tuple((sp.channel, sp.index) for sp in points), window=window)
        masked_series = mask(series, spec)
        masked_pred_p, _ = forward_batch(network, masked_series.values[None])
        masked_label = 1 if masked_pred_p[0] >= 0.5 else 0
        flipped += masked_label != pred.label
    return FlipReport(window=window, n_anomalous_correct=eligible, n_flipped=flipped)


def render_flip_table(reports: list[FlipReport]) -> str:
    """Plain-text table, one row per window."""
    headers = (
        "Window size",
        "Anomalous sequences",
        "Flipped prediction after masking",
        "Percentage flipped",
    )
    rows = [
        (
            str(r.window),
            str(r.n_anomalous_correct) + (" (empty)" if r.empty_denominator else ""),
            str(r.n_flipped),
            f"{r.percent_flipped:.1f}%",
        )
        for r in reports
    ]
    widths = [max(len(h), *(len(row[i]) for row in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    def line(cells):
        return " | ".join(c.ljust(w) for c, w in zip(cells, widths))
    sep = "-+-".join("-" * w for w in widths)
    return "\n".join([line(headers), sep, *(line(row) for row in rows)])
