"""Weight-perturbation robustness and cross-metric correlation analysis.

Perturbation runs multiply every within-dimension weight by
exp(U(-h, h)) noise (default h = 0.1), renormalize, rescore the corpus
and compare rankings to the baseline via Spearman correlation with
tie-averaged ranks. Correlation analysis computes the Pearson matrix of
normalized scores across all metrics.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass

from hsbr.errors import UndefinedCorrelationError, ValidationError
from hsbr.model import (
    CQ_GROUP_METRICS,
    Dimension,
    MetricId,
    RiskVector,
    WeightTable,
    validate_weights,
)
from hsbr.scoring import aggregate_scores

#: Canonical metric order for matrices and serialization.
ALL_METRICS: tuple[MetricId, ...] = tuple(MetricId)


def fractional_ranks(values: list[float]) -> list[float]:
    """1-based ranks with ties averaged (standard Spearman treatment)."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    start = 0
    while start < len(order):
        end = start
        while end + 1 < len(order) and values[order[end + 1]] == values[order[start]]:
            end += 1
        mean_rank = (start + end) / 2 + 1
        for position in range(start, end + 1):
            ranks[order[position]] = mean_rank
        start = end + 1
    return ranks


def _pearson(xs: list[float], ys: list[float]) -> float | None:
    n = len(xs)
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    dx = [x - mean_x for x in xs]
    dy = [y - mean_y for y in ys]
    var_x = sum(d * d for d in dx)
    var_y = sum(d * d for d in dy)
    if var_x == 0.0 or var_y == 0.0:
        return None
    return sum(a * b for a, b in zip(dx, dy)) / math.sqrt(var_x * var_y)


def spearman(scores_a: dict[str, float], scores_b: dict[str, float]) -> float:
    """Spearman rho: Pearson correlation of tie-averaged ranks.

    Requires identical key sets with at least two entries; all-equal
    scores in either map leave the ranks without variance and raise
    UndefinedCorrelationError.
    """
    if set(scores_a) != set(scores_b):
        raise ValidationError("spearman requires identical key sets")
    keys = sorted(scores_a)
    if len(keys) < 2:
        raise ValidationError("spearman requires at least two entries")
    ranks_a = fractional_ranks([scores_a[k] for k in keys])
    ranks_b = fractional_ranks([scores_b[k] for k in keys])
    rho = _pearson(ranks_a, ranks_b)
    if rho is None:
        raise UndefinedCorrelationError(
            "rank correlation undefined: a score map has zero variance")
    return rho


def perturbation_factors(
    rng: random.Random, half_width: float = 0.1
) -> dict[MetricId, float]:
    """One multiplicative noise factor exp(U(-h, h)) per metric weight,
    drawn in canonical metric order for deterministic replay."""
    return {metric: math.exp(rng.uniform(-half_width, half_width))
            for metric in ALL_METRICS}


def perturb_weights(
    weights: WeightTable, rng: random.Random, half_width: float = 0.1
) -> WeightTable:
    """Apply multiplicative exponential noise to every within-dimension
    weight (dimension weights stay fixed), then renormalize groups."""
    factors = perturbation_factors(rng, half_width)
    scaled = {metric: weight * factors[metric]
              for metric, weight in weights.metric_weights.items()}
    return validate_weights(WeightTable(
        dimension_weights=dict(weights.dimension_weights),
        metric_weights=scaled,
    ))


@dataclass(frozen=True)
class PerturbationRun:
    run_index: int
    seed: int
    perturbed_weights: WeightTable
    scores: dict[str, float]
    ranks: dict[str, float]
    spearman_vs_baseline: float


@dataclass(frozen=True)
class SensitivityReport:
    seed: int
    runs: tuple[PerturbationRun, ...]
    baseline_scores: dict[str, float]
    baseline_ranks: dict[str, float]
    mean_spearman: float
    min_spearman: float
    max_rank_shift: dict[str, float]


def _totals(
    corpus_vectors: dict[str, RiskVector], weights: WeightTable
) -> dict[str, float]:
    totals = {}
    for repo_id, vector in corpus_vectors.items():
        _, total = aggregate_scores(vector.normalized, weights)
        totals[repo_id] = total
    return totals


def _rank_map(scores: dict[str, float]) -> dict[str, float]:
    keys = sorted(scores)
    ranks = fractional_ranks([scores[k] for k in keys])
    return dict(zip(keys, ranks))


def _run_seed(seed: int, run_index: int) -> int:
    return seed * 1_000_003 + run_index


def sensitivity_report(
    corpus_vectors: dict[str, RiskVector],
    baseline_weights: WeightTable,
    runs: int,
    seed: int,
    half_width: float = 0.1,
) -> SensitivityReport:
    """Perturb weights ``runs`` times and measure ranking stability.

    Deterministic for a fixed seed. The summary carries the mean and
    minimum Spearman against the baseline and each repository's maximum
    absolute rank deviation across runs.
    """
    if runs < 1:
        raise ValidationError("sensitivity analysis requires runs >= 1")
    baseline_scores = _totals(corpus_vectors, baseline_weights)
    baseline_ranks = _rank_map(baseline_scores)
    results: list[PerturbationRun] = []
    max_shift = {repo: 0.0 for repo in corpus_vectors}
    for index in range(1, runs + 1):
        run_seed = _run_seed(seed, index)
        weights = perturb_weights(
            baseline_weights, random.Random(run_seed), half_width)
        scores = _totals(corpus_vectors, weights)
        ranks = _rank_map(scores)
        rho = spearman(baseline_scores, scores)
        for repo, rank in ranks.items():
            shift = abs(rank - baseline_ranks[repo])
            if shift > max_shift[repo]:
                max_shift[repo] = shift
        results.append(PerturbationRun(
            run_index=index,
            seed=run_seed,
            perturbed_weights=weights,
            scores=scores,
            ranks=ranks,
            spearman_vs_baseline=rho,
        ))
    rhos = [run.spearman_vs_baseline for run in results]
    return SensitivityReport(
        seed=seed,
        runs=tuple(results),
        baseline_scores=baseline_scores,
        baseline_ranks=baseline_ranks,
        mean_spearman=sum(rhos) / len(rhos),
        min_spearman=min(rhos),
        max_rank_shift=max_shift,
    )


def _weights_payload(weights: WeightTable) -> dict:
    return {
        "dimensions": {d.value: w for d, w in weights.dimension_weights.items()},
        "metrics": {m.value: w for m, w in weights.metric_weights.items()},
    }


def sensitivity_payload(report: SensitivityReport) -> dict:
    """JSON-ready structure; canonical dumps are byte-stable per seed."""
    return {
        "seed": report.seed,
        "baseline": {
            "scores": dict(sorted(report.baseline_scores.items())),
            "ranks": dict(sorted(report.baseline_ranks.items())),
        },
        "runs": [
            {
                "run_index": run.run_index,
                "seed": run.seed,
                "spearman_vs_baseline": run.spearman_vs_baseline,
                "scores": dict(sorted(run.scores.items())),
                "ranks": dict(sorted(run.ranks.items())),
                "perturbed_weights": _weights_payload(run.perturbed_weights),
            }
            for run in report.runs
        ],
        "summary": {
            "mean_spearman": report.mean_spearman,
            "min_spearman": report.min_spearman,
            "max_rank_shift": dict(sorted(report.max_rank_shift.items())),
        },
    }


def sensitivity_summary_text(report: SensitivityReport) -> str:
    lines = [
        f"runs: {len(report.runs)}",
        f"seed: {report.seed}",
        f"repositories: {len(report.baseline_scores)}",
        f"spearman_mean: {report.mean_spearman:.6f}",
        f"spearman_min: {report.min_spearman:.6f}",
        "max_rank_shift:",
    ]
    for repo, shift in sorted(report.max_rank_shift.items()):
        lines.append(f"  {repo}: {shift:g}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class CorrelationMatrix:
    """Pearson correlations of normalized scores over metric pairs.

    ``None`` marks undefined entries (a zero-variance metric); the
    diagonal is 1.0 by construction.
    """

    metrics: tuple[MetricId, ...]
    values: dict[tuple[MetricId, MetricId], float | None]

    def get(self, a: MetricId, b: MetricId) -> float | None:
        return self.values[(a, b)]


def metric_correlations(corpus_vectors: dict[str, RiskVector]) -> CorrelationMatrix:
    """Pairwise Pearson matrix over every metric's normalized scores."""
    if len(corpus_vectors) < 3:
        raise ValidationError(
            "correlation analysis requires at least three repositories")
    repos = sorted(corpus_vectors)
    columns: dict[MetricId, list[float]] = {}
    for metric in ALL_METRICS:
        try:
            columns[metric] = [
                corpus_vectors[r].normalized[metric] for r in repos]
        except KeyError as exc:
            raise ValidationError(
                f"normalized score missing for metric {metric.value}") from exc
    values: dict[tuple[MetricId, MetricId], float | None] = {}
    for i, a in enumerate(ALL_METRICS):
        values[(a, a)] = 1.0
        for b in ALL_METRICS[i + 1:]:
            rho = _pearson(columns[a], columns[b])
            values[(a, b)] = rho
            values[(b, a)] = rho
    return CorrelationMatrix(metrics=ALL_METRICS, values=values)


def correlation_csv(matrix: CorrelationMatrix) -> str:
    """Plot-ready CSV with a metric header row and column; undefined
    entries are empty cells."""
    header = "metric," + ",".join(m.value for m in matrix.metrics)
    lines = [header]
    for a in matrix.metrics:
        cells = [a.value]
        for b in matrix.metrics:
            value = matrix.values[(a, b)]
            cells.append("" if value is None else repr(value))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def correlation_payload(matrix: CorrelationMatrix) -> dict:
    return {
        "metrics": [m.value for m in matrix.metrics],
        "matrix": [
            [matrix.values[(a, b)] for b in matrix.metrics]
            for a in matrix.metrics
        ],
    }
