"""Rule-based natural-language explanations at two abstraction levels.

An explanation is only produced for sequences classified anomalous. The
novice level names the single most influential point and channel; the
expert level walks every channel that contains salient points, stating
point-wise descriptors (highest spike, global maximum, ...) and channel
statistics for each fired rule, with numeric values rendered at four
significant digits. Both levels close with a fixed confidence sentence
taken from the masking sanity check.

Rules live in an ordered :class:`RuleBase`, loadable from JSON. A rule is
a predicate (feature, comparator, threshold) plus a sentence template;
thresholds may be literal numbers or symbolic names resolved against a
thresholds mapping, typically the 95th percentile of each feature over the
normal training data (see :func:`feature_thresholds`), computed at train
time and stored with the model. Generation is a pure function of its
inputs, so repeated calls give byte-identical text.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dataset import Dataset, LABEL_NORMAL
from .errors import ConfigError
from .features import FeatureConfig, FeatureReport, PointFeatures, sequence_features
from .influence import SalientPoint
from .network import Prediction
from .sanity import SanityResult

LEVELS = ("novice", "expert")
SCOPES = ("summary", "point", "channel")
COMPARATORS = ("always", "truthy", ">", ">=")

HIGH_CONFIDENCE_SENTENCE = (
    "Sanity check: masking the highlighted points flips the prediction to "
    "normal, so confidence in this explanation is high."
)
LOW_CONFIDENCE_SENTENCE = (
    "Sanity check: the prediction does not change when the highlighted "
    "points are masked, so confidence in this explanation is low."
)
NO_SALIENT_SENTENCE = (
    "No salient point exceeded the influence threshold; the decision could "
    "not be localized to specific data points."
)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.4g}"


@dataclass(frozen=True)
class Rule:
    name: str
    level: str  # novice, expert or both
    scope: str
    template: str
    feature: str | None = None
    comparator: str = "always"
    threshold: float | str | None = None

    def __post_init__(self):
        if self.level not in (*LEVELS, "both"):
            raise ConfigError(f"rule {self.name}: bad level {self.level!r}")
        if self.scope not in SCOPES:
            raise ConfigError(f"rule {self.name}: bad scope {self.scope!r}")
        if self.comparator not in COMPARATORS:
            raise ConfigError(f"rule {self.name}: bad comparator {self.comparator!r}")
        if self.comparator in (">", ">=") and self.threshold is None:
            raise ConfigError(f"rule {self.name}: comparator {self.comparator} needs a threshold")

    def applies_to(self, level: str) -> bool:
        return self.level in (level, "both")

    def fires(self, value, threshold: float | None) -> bool:
        if self.comparator == "always":
            return True
        if self.comparator == "truthy":
            return bool(value)
        if threshold is None:
            return False
        return value > threshold if self.comparator == ">" else value >= threshold

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "level": self.level,
            "scope": self.scope,
            "feature": self.feature,
            "comparator": self.comparator,
            "threshold": self.threshold,
            "template": self.template,
        }


@dataclass(frozen=True)
class RuleBase:
    rules: tuple[Rule, ...]

    def to_json(self) -> str:
        return json.dumps({"rules": [r.to_dict() for r in self.rules]}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RuleBase":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"rule base is not valid JSON: {exc}") from None
        rules = []
        for entry in doc.get("rules", []):
            unknown = set(entry) - {
                "name", "level", "scope", "feature", "comparator", "threshold", "template",
            }
            if unknown:
                raise ConfigError(f"rule base: unknown rule keys {sorted(unknown)}")
            rules.append(Rule(**entry))
        return cls(rules=tuple(rules))


def default_rule_base() -> RuleBase:
    return RuleBase(
        rules=(
            Rule(
                "novice_summary", "novice", "summary",
                "The sequence was classified as anomalous mainly because of the "
                "data point at time step {index} in the {channel} channel.",
            ),
            Rule(
                "expert_summary", "expert", "summary",
                "The sequence was classified as anomalous (probability {probability}).",
            ),
            Rule(
                "salient_point", "expert", "point",
                "The data point at time step {index} in the {channel} channel "
                "(value {value}) strongly influenced the decision, with relative "
                "influence {influence}.",
            ),
            Rule(
                "highest_spike", "expert", "point",
                "The value {value} at time step {index} is the highest spike of "
                "the {channel} channel, {z_abs} standard deviations {direction} "
                "the channel mean.",
                feature="is_highest_spike", comparator="truthy",
            ),
            Rule(
                "lowest_valley", "expert", "point",
                "The value {value} at time step {index} is the lowest valley of "
                "the {channel} channel, {z_abs} standard deviations {direction} "
                "the channel mean.",
                feature="is_lowest_valley", comparator="truthy",
            ),
            Rule(
                "global_max", "expert", "point",
                "This point is also the global maximum of the {channel} channel.",
                feature="is_global_max", comparator="truthy",
            ),
            Rule(
                "global_min", "expert", "point",
                "This point is also the global minimum of the {channel} channel.",
                feature="is_global_min", comparator="truthy",
            ),
            Rule(
                "local_peak", "expert", "point",
                "The point at time step {index} forms a local peak in the "
                "{channel} channel (z-score {z_score}).",
                feature="is_plain_local_peak", comparator="truthy",
            ),
            Rule(
                "local_valley", "expert", "point",
                "The point at time step {index} forms a local valley in the "
                "{channel} channel (z-score {z_score}).",
                feature="is_plain_local_valley", comparator="truthy",
            ),
            Rule(
                "level_shift", "expert", "channel",
                "The {channel} channel jumps between consecutive blocks: "
                "level_shift = {level_shift}, above the typical {threshold} of "
                "normal training data.",
                feature="level_shift", comparator=">", threshold="level_shift_p95",
            ),
            Rule(
                "kl_score", "expert", "channel",
                "The value distribution of the {channel} channel changes sharply "
                "between blocks: kl_score = {kl_score}, above the typical "
                "{threshold} of normal training data.",
                feature="kl_score", comparator=">", threshold="kl_score_p95",
            ),
            Rule(
                "lumpiness", "expert", "channel",
                "Volatility in the {channel} channel is unevenly clustered: "
                "lumpiness = {lumpiness}, above the typical {threshold} of "
                "normal training data.",
                feature="lumpiness", comparator=">", threshold="lumpiness_p95",
            ),
            Rule(
                "ratio_beyond_r_sigma", "expert", "channel",
                "A fraction ratio_beyond_r_sigma = {ratio_beyond_r_sigma} of the "
                "{channel} channel lies more than {r} standard deviations from "
                "its mean.",
                feature="ratio_beyond_r_sigma", comparator=">", threshold=0.0,
            ),
            Rule(
                "num_peaks", "expert", "channel",
                "The wavelet detector counts num_peaks = {num_peaks} peaks in "
                "the {channel} channel.",
            ),
            Rule(
                "std_dev", "expert", "channel",
                "Overall variability of the {channel} channel: std_dev = {std_dev}.",
            ),
        )
    )


@dataclass(frozen=True)
class Statement:
    rule: str
    text: str
    values: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"rule": self.rule, "text": self.text, "values": self.values}


@dataclass(frozen=True)
class Explanation:
    """Structured, renderable explanation; inactive for normal predictions."""

    active: bool
    level: str
    prediction: Prediction
    summary: Statement | None = None
    channel_statements: tuple[tuple[str, tuple[Statement, ...]], ...] = ()
    confidence: str | None = None
    salient_points: tuple[SalientPoint, ...] = ()
    feature_report: FeatureReport | None = None
    sanity: SanityResult | None = None

    def sentences(self) -> list[str]:
        out = []
        if self.summary is not None:
            out.append(self.summary.text)
        for _, statements in self.channel_statements:
            out.extend(s.text for s in statements)
        if self.active:
            out.append(
                HIGH_CONFIDENCE_SENTENCE if self.confidence == "high" else LOW_CONFIDENCE_SENTENCE
            )
        return out

    def to_dict(self) -> dict:
        if not self.active:
            return {"active": False}
        return {
            "active": True,
            "level": self.level,
            "prediction": self.prediction.to_dict(),
            "summary": self.summary.to_dict() if self.summary else None,
            "channels": [
                {"channel": chan, "statements": [s.to_dict() for s in statements]}
                for chan, statements in self.channel_statements
            ],
            "confidence": self.confidence,
            "text": "\n".join(self.sentences()),
            "payload": {
                "salient_points": [p.to_dict() for p in self.salient_points],
                "feature_report": self.feature_report.to_dict() if self.feature_report else None,
                "sanity": self.sanity.to_dict() if self.sanity else None,
            },
        }


def _point_slots(sp: SalientPoint, pf: PointFeatures) -> dict:
    slots = pf.to_dict()
    slots["is_plain_local_peak"] = pf.is_local_peak and not pf.is_highest_spike
    slots["is_plain_local_valley"] = pf.is_local_valley and not pf.is_lowest_valley
    slots["channel"] = sp.channel
    slots["influence"] = sp.scaled_influence
    slots["z_abs"] = abs(pf.z_score)
    slots["direction"] = "above" if pf.z_score >= 0 else "below"
    return slots


def _instantiate(rule: Rule, slots: Mapping) -> Statement:
    rendered = {
        key: val if isinstance(val, str) else _fmt(val) for key, val in slots.items()
    }
    try:
        text = rule.template.format(**rendered)
    except KeyError as exc:
        raise ConfigError(f"rule {rule.name}: template slot {exc} has no value") from None
    used = {
        key: val for key, val in rendered.items() if "{%s}" % key in rule.template
    }
    return Statement(rule=rule.name, text=text, values=used)


def generate(
    prediction: Prediction,
    salient_points: Sequence[SalientPoint],
    feature_report: FeatureReport | None,
    sanity_result: SanityResult | None,
    level: str = "expert",
    *,
    rule_base: RuleBase | None = None,
    thresholds: Mapping[str, float] | None = None,
) -> Explanation:
    """Build an explanation; inactive (empty) when the prediction is normal."""
    if level not in LEVELS:
        raise ConfigError(f"level must be one of {LEVELS}, got {level!r}")
    if prediction.label == LABEL_NORMAL:
        return Explanation(active=False, level=level, prediction=prediction)

    rule_base = rule_base or default_rule_base()
    thresholds = dict(thresholds or {})
    confidence = sanity_result.confidence if sanity_result is not None else "low"
    rules = [r for r in rule_base.rules if r.applies_to(level)]

    point_feats: dict[tuple[str, int], PointFeatures] = {}
    if feature_report is not None:
        for chan, pf in feature_report.points:
            point_feats[(chan, pf.index)] = pf

    if not salient_points:
        summary = Statement(rule="no_salient_point", text=NO_SALIENT_SENTENCE)
        return Explanation(
            active=True,
            level=level,
            prediction=prediction,
            summary=summary,
            confidence="low",
            salient_points=(),
            feature_report=feature_report,
            sanity=sanity_result,
        )

    # Scaled influence is per-channel and tops out at 1.0 in every channel,
    # so the cross-channel "most salient" pick compares raw magnitudes.
    best = salient_points[0]
    for sp in salient_points[1:]:
        if sp.raw_influence > best.raw_influence:
            best = sp

    summary = None
    for rule in rules:
        if rule.scope == "summary":
            slots = {
                "channel": best.channel,
                "index": best.index,
                "probability": prediction.probability,
            }
            summary = _instantiate(rule, slots)
            break

    channel_statements: list[tuple[str, tuple[Statement, ...]]] = []
    report_channels = list(feature_report.channels) if feature_report else []
    channels_with_points = [
        chan for chan in report_channels if any(sp.channel == chan for sp in salient_points)
    ]
    for chan in channels_with_points:
        statements: list[Statement] = []
        for sp in (p for p in salient_points if p.channel == chan):
            pf = point_feats.get((chan, sp.index))
            if pf is None:
                continue
            slots = _point_slots(sp, pf)
            for rule in rules:
                if rule.scope != "point":
                    continue
                value = slots.get(rule.feature) if rule.feature else None
                if rule.fires(value, None):
                    statements.append(_instantiate(rule, slots))
        seq = feature_report.channels[chan]
        slots = dict(seq.to_dict())
        slots["channel"] = chan
        slots["r"] = feature_report.config.r_sigma
        slots["ratio_pct"] = 100.0 * seq.ratio_beyond_r_sigma
        for rule in rules:
            if rule.scope != "channel":
                continue
            resolved = None
            if isinstance(rule.threshold, str):
                if rule.threshold not in thresholds:
                    continue
                resolved = float(thresholds[rule.threshold])
            elif rule.threshold is not None:
                resolved = float(rule.threshold)
            value = slots.get(rule.feature) if rule.feature else None
            if rule.fires(value, resolved):
                rule_slots = dict(slots)
                if resolved is not None:
                    rule_slots["threshold"] = resolved
                statements.append(_instantiate(rule, rule_slots))
        if statements:
            channel_statements.append((chan, tuple(statements)))

    return Explanation(
        active=True,
        level=level,
        prediction=prediction,
        summary=summary,
        channel_statements=tuple(channel_statements),
        confidence=confidence,
        salient_points=tuple(salient_points),
        feature_report=feature_report,
        sanity=sanity_result,
    )


def render(explanation: Explanation, fmt: str = "plain_text") -> str:
    """Stable text or JSON rendering; inactive explanations render empty."""
    if fmt == "plain_text":
        if not explanation.active:
            return ""
        return "\n".join(explanation.sentences())
    if fmt == "json":
        return json.dumps(explanation.to_dict())
    raise ConfigError(f"format must be 'plain_text' or 'json', got {fmt!r}")


def feature_thresholds(
    train_set: Dataset,
    config: FeatureConfig = FeatureConfig(),
    percentile: float = 95.0,
) -> dict[str, float]:
    """Symbolic rule thresholds: feature percentiles over normal training series."""
    pools: dict[str, list[float]] = {"level_shift": [], "kl_score": [], "lumpiness": []}
    for series in train_set:
        if series.label != LABEL_NORMAL:
            continue
        for c in range(series.n_channels):
            feats = sequence_features(series.values[c], config)
            pools["level_shift"].append(feats.level_shift)
            pools["kl_score"].append(feats.kl_score)
            pools["lumpiness"].append(feats.lumpiness)
    out = {}
    for name, vals in pools.items():
        if vals:
            out[f"{name}_p95"] = float(np.percentile(vals, percentile))
    return out
