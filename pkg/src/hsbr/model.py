"""Core domain model: metric identifiers, kinds, weight tables and reports.

All types here are immutable after construction and safe to share across
threads. Default weights follow the empirical tables shipped with the
tool; groups are renormalized to unit sum at load time.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

from hsbr.errors import UndefinedExpectationError, ValidationError


class Dimension(str, Enum):
    """The four risk dimensions."""

    DI = "DI"  # dependency impact
    PC = "PC"  # payload concealment
    CQ = "CQ"  # community quality
    CI = "CI"  # continuous integration


class MetricId(str, Enum):
    """All metric identifiers: 16 top-level plus 15 community sub-metrics."""

    # Dependency impact
    D1 = "D1"  # self priority exposure
    D2 = "D2"  # self essential exposure
    D3 = "D3"  # dependency priority exposure
    D4 = "D4"  # dependency essential exposure
    # Payload concealment
    P1 = "P1"  # binary in test files
    P2 = "P2"  # binary in documentation
    P3 = "P3"  # binary in code files
    P4 = "P4"  # binary in asset files
    P5 = "P5"  # binary in other files
    P6 = "P6"  # total binary file count
    # Community quality groups
    Q1 = "Q1"  # community popularity
    Q2 = "Q2"  # community review
    Q3 = "Q3"  # community privilege barrier
    # Continuous integration
    C1 = "C1"  # dependabot disabled
    C2 = "C2"  # dangerous action provider
    C3 = "C3"  # dangerous action pin
    # Q1 sub-metrics (popularity)
    STARGAZERS = "stargazers"
    WATCHERS = "watchers"
    FORKS = "forks"
    ACTIVE_USERS = "active-users"
    AVG_ISSUE_PARTICIPANTS = "avg-issue-participants"
    AVG_PR_PARTICIPANTS = "avg-pr-participants"
    # Q2 sub-metrics (review)
    DIRECT_COMMIT_RATIO = "direct-commit-ratio"
    DIRECT_COMMIT_USERS = "direct-commit-users"
    REQUIRED_APPROVES_DIST = "required-approves-dist"
    UNDISCUSSED_MERGE_RATIO = "undiscussed-merge-ratio"
    INCONSISTENT_PR_RATIO = "inconsistent-pr-ratio"
    # Q3 sub-metrics (privilege barrier)
    MAINTAINER_COUNT = "maintainer-count"
    APPROVER_COUNT = "approver-count"
    PRS_TO_MAINTAINER = "prs-to-maintainer"
    PRS_TO_APPROVER = "prs-to-approver"


class MetricKind(str, Enum):
    """How a raw metric value is turned into a [0, 1] risk score."""

    BOOLEAN = "boolean"
    COUNT_LOG = "count-log"
    RATIO = "ratio"
    NORMALIZED_DIRECT = "normalized-direct"
    HISTOGRAM_EXPECTATION = "histogram-expectation"


TOP_LEVEL_METRICS: tuple[MetricId, ...] = (
    MetricId.D1, MetricId.D2, MetricId.D3, MetricId.D4,
    MetricId.P1, MetricId.P2, MetricId.P3, MetricId.P4, MetricId.P5, MetricId.P6,
    MetricId.Q1, MetricId.Q2, MetricId.Q3,
    MetricId.C1, MetricId.C2, MetricId.C3,
)

DIMENSION_METRICS: dict[Dimension, tuple[MetricId, ...]] = {
    Dimension.DI: (MetricId.D1, MetricId.D2, MetricId.D3, MetricId.D4),
    Dimension.PC: (MetricId.P1, MetricId.P2, MetricId.P3,
                   MetricId.P4, MetricId.P5, MetricId.P6),
    Dimension.CQ: (MetricId.Q1, MetricId.Q2, MetricId.Q3),
    Dimension.CI: (MetricId.C1, MetricId.C2, MetricId.C3),
}

CQ_GROUP_METRICS: dict[MetricId, tuple[MetricId, ...]] = {
    MetricId.Q1: (
        MetricId.STARGAZERS, MetricId.WATCHERS, MetricId.FORKS,
        MetricId.ACTIVE_USERS, MetricId.AVG_ISSUE_PARTICIPANTS,
        MetricId.AVG_PR_PARTICIPANTS,
    ),
    MetricId.Q2: (
        MetricId.DIRECT_COMMIT_RATIO, MetricId.DIRECT_COMMIT_USERS,
        MetricId.REQUIRED_APPROVES_DIST, MetricId.UNDISCUSSED_MERGE_RATIO,
        MetricId.INCONSISTENT_PR_RATIO,
    ),
    MetricId.Q3: (
        MetricId.MAINTAINER_COUNT, MetricId.APPROVER_COUNT,
        MetricId.PRS_TO_MAINTAINER, MetricId.PRS_TO_APPROVER,
    ),
}

CQ_SUB_METRICS: tuple[MetricId, ...] = tuple(
    m for group in CQ_GROUP_METRICS.values() for m in group
)

#: Metrics that carry a raw value of their own (everything except the
#: Q1/Q2/Q3 group aggregates, which are derived from their sub-metrics).
LEAF_METRICS: tuple[MetricId, ...] = tuple(
    m for m in TOP_LEVEL_METRICS
    if m not in CQ_GROUP_METRICS
) + CQ_SUB_METRICS

METRIC_KINDS: dict[MetricId, MetricKind] = {
    MetricId.D1: MetricKind.COUNT_LOG,
    MetricId.D2: MetricKind.COUNT_LOG,
    MetricId.D3: MetricKind.COUNT_LOG,
    MetricId.D4: MetricKind.COUNT_LOG,
    MetricId.P1: MetricKind.BOOLEAN,
    MetricId.P2: MetricKind.BOOLEAN,
    MetricId.P3: MetricKind.BOOLEAN,
    MetricId.P4: MetricKind.BOOLEAN,
    MetricId.P5: MetricKind.BOOLEAN,
    MetricId.P6: MetricKind.COUNT_LOG,
    MetricId.Q1: MetricKind.NORMALIZED_DIRECT,
    MetricId.Q2: MetricKind.NORMALIZED_DIRECT,
    MetricId.Q3: MetricKind.NORMALIZED_DIRECT,
    MetricId.C1: MetricKind.BOOLEAN,
    MetricId.C2: MetricKind.RATIO,
    MetricId.C3: MetricKind.RATIO,
    MetricId.STARGAZERS: MetricKind.COUNT_LOG,
    MetricId.WATCHERS: MetricKind.COUNT_LOG,
    MetricId.FORKS: MetricKind.COUNT_LOG,
    MetricId.ACTIVE_USERS: MetricKind.COUNT_LOG,
    MetricId.AVG_ISSUE_PARTICIPANTS: MetricKind.NORMALIZED_DIRECT,
    MetricId.AVG_PR_PARTICIPANTS: MetricKind.NORMALIZED_DIRECT,
    MetricId.DIRECT_COMMIT_RATIO: MetricKind.RATIO,
    MetricId.DIRECT_COMMIT_USERS: MetricKind.COUNT_LOG,
    MetricId.REQUIRED_APPROVES_DIST: MetricKind.HISTOGRAM_EXPECTATION,
    MetricId.UNDISCUSSED_MERGE_RATIO: MetricKind.RATIO,
    MetricId.INCONSISTENT_PR_RATIO: MetricKind.RATIO,
    MetricId.MAINTAINER_COUNT: MetricKind.COUNT_LOG,
    MetricId.APPROVER_COUNT: MetricKind.COUNT_LOG,
    MetricId.PRS_TO_MAINTAINER: MetricKind.HISTOGRAM_EXPECTATION,
    MetricId.PRS_TO_APPROVER: MetricKind.HISTOGRAM_EXPECTATION,
}

#: Counts where fewer is riskier: the percentile score is flipped so a
#: small privileged circle yields a high risk value.
REVERSED_METRICS: frozenset[MetricId] = frozenset(
    {MetricId.MAINTAINER_COUNT, MetricId.APPROVER_COUNT}
)

#: Metrics whose value can change when a semantic backend is enabled.
SEMANTIC_METRICS: frozenset[MetricId] = frozenset(
    {MetricId.P1, MetricId.P2, MetricId.P3, MetricId.P4, MetricId.P5,
     MetricId.INCONSISTENT_PR_RATIO}
)

# Default weights, verbatim from the shipped tables. The PC group sums
# to 1.0002 and the Q1 group to 0.99; validate_weights() renormalizes.
DEFAULT_DIMENSION_WEIGHTS: dict[Dimension, float] = {
    Dimension.DI: 0.3,
    Dimension.PC: 0.2,
    Dimension.CQ: 0.3,
    Dimension.CI: 0.2,
}

DEFAULT_METRIC_WEIGHTS: dict[MetricId, float] = {
    MetricId.D1: 0.36,
    MetricId.D2: 0.24,
    MetricId.D3: 0.24,
    MetricId.D4: 0.16,
    MetricId.P1: 0.2609,
    MetricId.P2: 0.087,
    MetricId.P3: 0.2609,
    MetricId.P4: 0.087,
    MetricId.P5: 0.0435,
    MetricId.P6: 0.2609,
    MetricId.Q1: 0.2,
    MetricId.Q2: 0.4,
    MetricId.Q3: 0.4,
    MetricId.C1: 0.4,
    MetricId.C2: 0.3,
    MetricId.C3: 0.3,
    MetricId.STARGAZERS: 0.22,
    MetricId.WATCHERS: 0.22,
    MetricId.FORKS: 0.22,
    MetricId.ACTIVE_USERS: 0.11,
    MetricId.AVG_ISSUE_PARTICIPANTS: 0.11,
    MetricId.AVG_PR_PARTICIPANTS: 0.11,
    MetricId.DIRECT_COMMIT_RATIO: 0.25,
    MetricId.DIRECT_COMMIT_USERS: 0.20,
    MetricId.REQUIRED_APPROVES_DIST: 0.25,
    MetricId.UNDISCUSSED_MERGE_RATIO: 0.15,
    MetricId.INCONSISTENT_PR_RATIO: 0.15,
    MetricId.MAINTAINER_COUNT: 0.20,
    MetricId.APPROVER_COUNT: 0.20,
    MetricId.PRS_TO_MAINTAINER: 0.30,
    MetricId.PRS_TO_APPROVER: 0.30,
}

#: Named weight groups that must each sum to 1 after validation. The
#: Q1/Q2/Q3 entries in metric_weights are the group weights inside CQ.
WEIGHT_GROUPS: tuple[tuple[str, tuple[MetricId, ...]], ...] = (
    ("DI", DIMENSION_METRICS[Dimension.DI]),
    ("PC", DIMENSION_METRICS[Dimension.PC]),
    ("CQ-groups", DIMENSION_METRICS[Dimension.CQ]),
    ("CI", DIMENSION_METRICS[Dimension.CI]),
    ("Q1", CQ_GROUP_METRICS[MetricId.Q1]),
    ("Q2", CQ_GROUP_METRICS[MetricId.Q2]),
    ("Q3", CQ_GROUP_METRICS[MetricId.Q3]),
)


@dataclass(frozen=True)
class Histogram:
    """Histogram of nonnegative integer counts, e.g. PRs before promotion.

    Stored as sorted (key, frequency) pairs so instances are hashable and
    serialize canonically.
    """

    bins: tuple[tuple[int, int], ...]

    def __post_init__(self):
        for k, v in self.bins:
            if k < 0 or v < 0:
                raise ValidationError(f"histogram bin ({k}: {v}) must be nonnegative")
        keys = [k for k, _ in self.bins]
        if keys != sorted(set(keys)):
            raise ValidationError("histogram bins must have unique, sorted keys")

    @classmethod
    def from_dict(cls, bins: dict[int, int]) -> "Histogram":
        return cls(tuple(sorted((int(k), int(v)) for k, v in bins.items())))

    def to_dict(self) -> dict[int, int]:
        return dict(self.bins)

    @property
    def total(self) -> int:
        return sum(v for _, v in self.bins)

    def expectation(self) -> float:
        """Frequency-weighted mean of the bin keys."""
        total = self.total
        if total == 0:
            raise UndefinedExpectationError("expectation of an empty histogram is undefined")
        return sum(k * v for k, v in self.bins) / total


RawValue = float | Histogram


@dataclass(frozen=True)
class RiskVector:
    """Raw metric values and their normalized [0, 1] risk scores."""

    raw: dict[MetricId, RawValue]
    normalized: dict[MetricId, float] = field(default_factory=dict)


class RiskLevel(str, Enum):
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"


@dataclass(frozen=True)
class RiskThresholds:
    """Score cut points for the Low/Medium/High classification."""

    medium: float = 0.33
    high: float = 0.66

    def classify(self, total: float) -> RiskLevel:
        if total >= self.high:
            return RiskLevel.HIGH
        if total >= self.medium:
            return RiskLevel.MEDIUM
        return RiskLevel.LOW


@dataclass(frozen=True)
class HSBRReport:
    """Scored result for one repository."""

    repo_id: str
    dimension_scores: dict[Dimension, float]
    total: float
    risk_level: RiskLevel
    explanations: tuple[str, ...]
    vector: RiskVector
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class WeightTable:
    """Dimension weights plus per-metric weights within each group."""

    dimension_weights: dict[Dimension, float]
    metric_weights: dict[MetricId, float]


def _renormalize(weights: dict, keys: tuple, group: str) -> dict:
    for key in keys:
        if key not in weights:
            raise ValidationError(f"weight group {group} is missing {key.value}")
        if weights[key] < 0:
            raise ValidationError(
                f"weight for {key.value} is negative ({weights[key]})"
            )
    total = sum(weights[key] for key in keys)
    if total == 0:
        raise ValidationError(f"weight group {group} sums to zero")
    if abs(total - 1.0) <= 1e-12:
        return weights  # already unit-sum; dividing again would dirty the bits
    scaled = dict(weights)
    for key in keys:
        scaled[key] = weights[key] / total
    return scaled


def validate_weights(table: WeightTable) -> WeightTable:
    """Renormalize every weight group to unit sum.

    Raises ValidationError for negative weights (naming the metric),
    missing entries or zero-sum groups. Idempotent: validating an
    already-valid table returns it unchanged.
    """
    dims = _renormalize(table.dimension_weights, tuple(Dimension), "dimensions")
    metrics = dict(table.metric_weights)
    for group, keys in WEIGHT_GROUPS:
        metrics = _renormalize(metrics, keys, group)
    if dims is table.dimension_weights and metrics == table.metric_weights:
        return table
    return WeightTable(dimension_weights=dims, metric_weights=metrics)


def default_weights() -> WeightTable:
    """The shipped weight table, renormalized to unit-sum groups."""
    return validate_weights(
        WeightTable(
            dimension_weights=dict(DEFAULT_DIMENSION_WEIGHTS),
            metric_weights=dict(DEFAULT_METRIC_WEIGHTS),
        )
    )


def parse_weight_config(text: str) -> WeightTable:
    """Parse a key-value weight file, one ``<id> = <value>`` per line.

    Keys are dimension names (DI, PC, CQ, CI) or metric identifiers;
    ``#`` starts a comment. Entries override the shipped defaults, so a
    partial file is valid. The result is renormalized.
    """
    dims = dict(DEFAULT_DIMENSION_WEIGHTS)
    metrics = dict(DEFAULT_METRIC_WEIGHTS)
    dim_names = {d.value: d for d in Dimension}
    metric_names = {m.value: m for m in MetricId}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"weight file line {lineno}: expected '<id> = <value>'")
        key, _, value = line.partition("=")
        key = key.strip()
        try:
            weight = float(value.strip())
        except ValueError:
            raise ValidationError(
                f"weight file line {lineno}: bad number {value.strip()!r}"
            ) from None
        if key in dim_names:
            dims[dim_names[key]] = weight
        elif key in metric_names:
            metrics[metric_names[key]] = weight
        else:
            raise ValidationError(f"weight file line {lineno}: unknown id {key!r}")
    return validate_weights(WeightTable(dimension_weights=dims, metric_weights=metrics))


def load_weights(path: str | Path) -> WeightTable:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"weight file not found: {path}")
    return parse_weight_config(path.read_text(encoding="utf-8"))
