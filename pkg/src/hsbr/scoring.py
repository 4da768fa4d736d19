"""Corpus calibration, score normalization, aggregation and explanations.

Raw metric values become [0, 1] risk scores through percentile
calibration: count metrics on the log10(1+x) domain, ratios and
averages on the raw domain, and histogram metrics through the
expectation with reverse normalization (cheap promotions score high).
Dimension scores are weighted sums; community quality composes in two
levels (sub-metrics into the three group scores, groups into CQ).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

from hsbr.errors import (
    CalibrationError,
    ScoringError,
    UndefinedExpectationError,
    ValidationError,
)
from hsbr.model import (
    CQ_GROUP_METRICS,
    DIMENSION_METRICS,
    LEAF_METRICS,
    METRIC_KINDS,
    REVERSED_METRICS,
    Dimension,
    Histogram,
    HSBRReport,
    MetricId,
    MetricKind,
    RawValue,
    RiskLevel,
    RiskThresholds,
    RiskVector,
    WeightTable,
)

CALIBRATION_SCHEMA_VERSION = 1

_DOMAINS = {
    MetricKind.COUNT_LOG: "log10_1p",
    MetricKind.RATIO: "raw",
    MetricKind.NORMALIZED_DIRECT: "raw",
    MetricKind.HISTOGRAM_EXPECTATION: "expectation",
}

#: Leaf metrics that need corpus percentiles (booleans bypass them).
CALIBRATED_METRICS: tuple[MetricId, ...] = tuple(
    m for m in LEAF_METRICS if METRIC_KINDS[m] is not MetricKind.BOOLEAN
)


@dataclass(frozen=True)
class MetricStats:
    p5: float
    p95: float
    domain: str
    sample_count: int

    def __post_init__(self):
        if self.p5 > self.p95:
            raise ValidationError(f"p5 {self.p5} exceeds p95 {self.p95}")


@dataclass(frozen=True)
class CorpusStats:
    """Per-metric calibration percentiles over a repository corpus."""

    metrics: dict[MetricId, MetricStats]
    sample_count: int
    notes: tuple[str, ...] = ()


def percentile(sorted_values: list[float], q: float) -> float:
    """Linear interpolation between closest ranks on a sorted sample."""
    if not sorted_values:
        raise CalibrationError("percentile of an empty sample")
    if len(sorted_values) == 1:
        return sorted_values[0]
    rank = q * (len(sorted_values) - 1)
    low = math.floor(rank)
    high = math.ceil(rank)
    if low == high:
        return sorted_values[low]
    fraction = rank - low
    return sorted_values[low] * (1 - fraction) + sorted_values[high] * fraction


def _transform(metric: MetricId, raw: RawValue) -> float:
    kind = METRIC_KINDS[metric]
    if kind is MetricKind.COUNT_LOG:
        if isinstance(raw, Histogram) or raw < 0:
            raise ValidationError(f"{metric.value}: count must be a nonnegative number")
        return math.log10(1.0 + raw)
    if kind is MetricKind.HISTOGRAM_EXPECTATION:
        if not isinstance(raw, Histogram):
            raise ValidationError(f"{metric.value}: expected a histogram")
        return raw.expectation()
    if isinstance(raw, Histogram):
        raise ValidationError(f"{metric.value}: unexpected histogram value")
    return float(raw)


def compute_corpus_stats(raw_vectors: list[RiskVector]) -> CorpusStats:
    """Calibrate P5/P95 for every non-boolean leaf metric.

    Vectors missing a metric (or carrying an empty histogram, whose
    expectation is undefined) are excluded from that metric's sample
    with a recorded note. A histogram metric with no usable samples is
    pinned at p95 = 0 so downstream scoring yields maximal risk.
    """
    if not raw_vectors:
        raise CalibrationError("corpus is empty; nothing to calibrate")
    metrics: dict[MetricId, MetricStats] = {}
    notes: list[str] = []
    for metric in CALIBRATED_METRICS:
        samples: list[float] = []
        excluded = 0
        for vector in raw_vectors:
            if metric not in vector.raw:
                excluded += 1
                continue
            try:
                samples.append(_transform(metric, vector.raw[metric]))
            except UndefinedExpectationError:
                excluded += 1
        if excluded:
            notes.append(f"{metric.value}: {excluded} sample(s) excluded from calibration")
        domain = _DOMAINS[METRIC_KINDS[metric]]
        if not samples:
            notes.append(f"{metric.value}: no usable samples; pinned at zero")
            metrics[metric] = MetricStats(p5=0.0, p95=0.0, domain=domain, sample_count=0)
            continue
        samples.sort()
        metrics[metric] = MetricStats(
            p5=percentile(samples, 0.05),
            p95=percentile(samples, 0.95),
            domain=domain,
            sample_count=len(samples),
        )
    return CorpusStats(metrics=metrics, sample_count=len(raw_vectors),
                       notes=tuple(notes))


def reverse_normalize_expectation(e_d: float, p95_of_expectations: float) -> float:
    """Map an expectation to risk: ``1 - min(1, e_d / p95)``.

    Zero-cost promotions score 1 (maximal risk); expectations at or
    above the corpus p95 score 0. A nonpositive p95 (unobservable
    governance across the corpus) pins the score at 1.
    """
    if e_d < 0:
        raise ValidationError(f"expectation must be nonnegative, got {e_d}")
    if p95_of_expectations <= 0:
        return 1.0
    return 1.0 - min(1.0, e_d / p95_of_expectations)


def normalize(metric: MetricId, raw: RawValue, stats: CorpusStats) -> float:
    """Turn one raw value into a [0, 1] risk score under the calibration."""
    if metric not in METRIC_KINDS:
        raise ScoringError(f"unknown metric: {metric}")
    kind = METRIC_KINDS[metric]
    if kind is MetricKind.BOOLEAN:
        if raw not in (0, 1, 0.0, 1.0, False, True):
            raise ValidationError(f"{metric.value}: boolean raw value must be 0 or 1")
        return float(raw)
    entry = stats.metrics.get(metric)
    if entry is None:
        raise ScoringError(f"no calibration for metric {metric.value}")
    if kind is MetricKind.HISTOGRAM_EXPECTATION:
        try:
            expectation = _transform(metric, raw)
        except UndefinedExpectationError:
            return 1.0  # unobservable governance is treated pessimistically
        return reverse_normalize_expectation(expectation, entry.p95)
    transformed = _transform(metric, raw)
    if entry.p95 == entry.p5:
        score = 0.0 if transformed <= entry.p5 else 1.0
    else:
        score = (transformed - entry.p5) / (entry.p95 - entry.p5)
        score = min(1.0, max(0.0, score))
    if metric in REVERSED_METRICS:
        score = 1.0 - score
    return score


def normalize_vector(vector: RiskVector, stats: CorpusStats,
                     weights: WeightTable) -> RiskVector:
    """Normalize every leaf metric and derive the Q1/Q2/Q3 group scores."""
    normalized: dict[MetricId, float] = {}
    for metric in LEAF_METRICS:
        if metric not in vector.raw:
            raise ScoringError(f"raw value missing for metric {metric.value}")
        normalized[metric] = normalize(metric, vector.raw[metric], stats)
    for group, members in CQ_GROUP_METRICS.items():
        score = sum(weights.metric_weights[m] * normalized[m] for m in members)
        normalized[group] = min(1.0, max(0.0, score))  # unit-sum float drift
    return RiskVector(raw=dict(vector.raw), normalized=normalized)


def dimension_score(vector: RiskVector, weights: WeightTable,
                    dimension: Dimension) -> float:
    """Weighted sum of the dimension's normalized metrics.

    For CQ the inputs are the Q1/Q2/Q3 group scores, themselves
    weighted sums of the normalized sub-metrics.
    """
    total = 0.0
    for metric in DIMENSION_METRICS[dimension]:
        if metric not in vector.normalized:
            raise ScoringError(f"normalized score missing for metric {metric.value}")
        total += weights.metric_weights[metric] * vector.normalized[metric]
    return min(1.0, max(0.0, total))


def aggregate_scores(
    normalized: dict[MetricId, float], weights: WeightTable
) -> tuple[dict[Dimension, float], float]:
    """Dimension scores and total from normalized leaf scores alone.

    Recomputes the Q1/Q2/Q3 group scores under the given weights, so
    weight perturbations propagate through the two-level composition.
    """
    full = dict(normalized)
    for group, members in CQ_GROUP_METRICS.items():
        score = sum(weights.metric_weights[m] * full[m] for m in members)
        full[group] = min(1.0, max(0.0, score))
    vector = RiskVector(raw={}, normalized=full)
    dimensions = {d: dimension_score(vector, weights, d) for d in Dimension}
    total, _ = hsbr_total(dimensions, weights)
    return dimensions, total


def hsbr_total(
    dimension_scores: dict[Dimension, float],
    weights: WeightTable,
    thresholds: RiskThresholds = RiskThresholds(),
) -> tuple[float, RiskLevel]:
    """Aggregate the four dimension scores into the overall risk score."""
    total = 0.0
    for dimension in Dimension:
        if dimension not in dimension_scores:
            raise ScoringError(f"dimension score missing: {dimension.value}")
        score = dimension_scores[dimension]
        if not 0.0 <= score <= 1.0:
            raise ScoringError(f"dimension {dimension.value} score {score} outside [0, 1]")
        total += weights.dimension_weights[dimension] * score
    total = min(1.0, max(0.0, total))
    return total, thresholds.classify(total)


def score_repository(
    repo_id: str,
    raw_vector: RiskVector,
    stats: CorpusStats,
    weights: WeightTable,
    thresholds: RiskThresholds = RiskThresholds(),
    notes: tuple[str, ...] = (),
    explain_threshold: float = 0.66,
) -> HSBRReport:
    """Full scoring of one repository's raw vector into a report."""
    vector = normalize_vector(raw_vector, stats, weights)
    dimensions = {d: dimension_score(vector, weights, d) for d in Dimension}
    total, level = hsbr_total(dimensions, weights, thresholds)
    report = HSBRReport(
        repo_id=repo_id,
        dimension_scores=dimensions,
        total=total,
        risk_level=level,
        explanations=(),
        vector=vector,
        notes=notes,
    )
    return replace(report, explanations=explain(report, threshold=explain_threshold))


# ---------------------------------------------------------------------------
# Explanation snippets
# ---------------------------------------------------------------------------

def _pct(value: float) -> str:
    return f"{value * 100:.0f}%"


def _min_bin(hist: Histogram) -> int | None:
    populated = [k for k, v in hist.bins if v > 0]
    return min(populated) if populated else None


def _promotion_snippet(role: str, raw: Histogram) -> str:
    cheapest = _min_bin(raw)
    if cheapest is None:
        return f"no {role} promotions observed; privilege barrier unmeasurable"
    return f"user gained {role} role with only {cheapest} PR(s)"


def _snippet(metric: MetricId, raw: RawValue) -> str:
    if metric is MetricId.D1:
        return f"{int(raw)} built package(s) carry high distribution priority"
    if metric is MetricId.D2:
        return f"{int(raw)} built package(s) are marked essential"
    if metric is MetricId.D3:
        return f"{int(raw)} high-priority package(s) depend on this repository"
    if metric is MetricId.D4:
        return f"{int(raw)} essential package(s) transitively depend on this repository"
    if metric is MetricId.P1:
        return "binary files present in test files"
    if metric is MetricId.P2:
        return "binary files present in documentation"
    if metric is MetricId.P3:
        return "binary files present in code files"
    if metric is MetricId.P4:
        return "binary files present in asset files"
    if metric is MetricId.P5:
        return "binary files present outside recognized contexts"
    if metric is MetricId.P6:
        return f"{int(raw)} binary file(s) in the repository tree"
    if metric is MetricId.C1:
        return "dependabot is disabled"
    if metric is MetricId.C2:
        return f"{_pct(raw)} of CI action references come from untrusted providers"
    if metric is MetricId.C3:
        return (f"CI runs unpinned third-party actions "
                f"({_pct(raw)} of references not commit-pinned)")
    if metric is MetricId.STARGAZERS:
        return f"stargazer count {int(raw)} sits at a high corpus percentile"
    if metric is MetricId.WATCHERS:
        return f"watcher count {int(raw)} sits at a high corpus percentile"
    if metric is MetricId.FORKS:
        return f"fork count {int(raw)} sits at a high corpus percentile"
    if metric is MetricId.ACTIVE_USERS:
        return f"{int(raw)} active community user(s)"
    if metric is MetricId.AVG_ISSUE_PARTICIPANTS:
        return f"issues average {raw:.1f} participant(s)"
    if metric is MetricId.AVG_PR_PARTICIPANTS:
        return f"pull requests average {raw:.1f} participant(s)"
    if metric is MetricId.DIRECT_COMMIT_RATIO:
        return f"{_pct(raw)} of default-branch commits bypass pull requests"
    if metric is MetricId.DIRECT_COMMIT_USERS:
        return f"{int(raw)} user(s) push directly to the default branch"
    if metric is MetricId.REQUIRED_APPROVES_DIST:
        if isinstance(raw, Histogram) and raw.total > 0:
            return f"merged PRs average {raw.expectation():.1f} approving review(s)"
        return "no merged PRs observed; review strength unmeasurable"
    if metric is MetricId.UNDISCUSSED_MERGE_RATIO:
        return f"{_pct(raw)} of merged PRs landed with no review or discussion"
    if metric is MetricId.INCONSISTENT_PR_RATIO:
        return f"{_pct(raw)} of merged PRs have descriptions mismatching their diffs"
    if metric is MetricId.MAINTAINER_COUNT:
        return f"only {int(raw)} maintainer(s) observed"
    if metric is MetricId.APPROVER_COUNT:
        return f"only {int(raw)} approving reviewer(s) observed"
    if metric is MetricId.PRS_TO_MAINTAINER:
        return _promotion_snippet("maintainer", raw)
    if metric is MetricId.PRS_TO_APPROVER:
        return _promotion_snippet("approver", raw)
    raise ScoringError(f"no explanation template for metric {metric.value}")


_METRIC_ORDER = {metric: index for index, metric in enumerate(MetricId)}


def explain(report: HSBRReport, threshold: float = 0.66) -> tuple[str, ...]:
    """Human-readable snippets for every high-scoring leaf metric,
    ordered by descending score then metric identifier."""
    flagged = [
        (metric, report.vector.normalized[metric])
        for metric in LEAF_METRICS
        if report.vector.normalized.get(metric, 0.0) >= threshold
    ]
    flagged.sort(key=lambda item: (-item[1], _METRIC_ORDER[item[0]]))
    return tuple(_snippet(metric, report.vector.raw[metric])
                 for metric, _ in flagged)


# ---------------------------------------------------------------------------
# Calibration persistence
# ---------------------------------------------------------------------------

def _stats_payload(stats: CorpusStats) -> dict:
    return {
        "schema_version": CALIBRATION_SCHEMA_VERSION,
        "sample_count": stats.sample_count,
        "notes": list(stats.notes),
        "metrics": {
            metric.value: {
                "p5": entry.p5,
                "p95": entry.p95,
                "domain": entry.domain,
                "sample_count": entry.sample_count,
            }
            for metric, entry in stats.metrics.items()
        },
    }


def dumps_calibration(stats: CorpusStats) -> str:
    return json.dumps(_stats_payload(stats), sort_keys=True, indent=2,
                      ensure_ascii=False) + "\n"


def calibration_id(stats: CorpusStats) -> str:
    """Short content hash identifying a calibration."""
    return hashlib.sha256(dumps_calibration(stats).encode("utf-8")).hexdigest()[:12]


def save_calibration(stats: CorpusStats, path: str | Path) -> None:
    Path(path).write_text(dumps_calibration(stats), encoding="utf-8")


def load_calibration(path: str | Path) -> CorpusStats:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"calibration file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CalibrationError(f"calibration file corrupt: {path} ({exc})") from exc
    version = payload.get("schema_version")
    if version != CALIBRATION_SCHEMA_VERSION:
        raise CalibrationError(
            f"calibration schema version {version!r} unsupported: {path}")
    try:
        metrics = {
            MetricId(name): MetricStats(
                p5=entry["p5"], p95=entry["p95"], domain=entry["domain"],
                sample_count=entry["sample_count"])
            for name, entry in payload["metrics"].items()
        }
        return CorpusStats(
            metrics=metrics,
            sample_count=payload["sample_count"],
            notes=tuple(payload.get("notes", ())),
        )
    except (KeyError, ValueError) as exc:
        raise CalibrationError(f"calibration file invalid: {path} ({exc})") from exc
