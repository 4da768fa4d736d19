"""End-to-end evaluation pipeline over a corpus of repositories.

A corpus config lists repository fixtures (plus optional local file
trees) and shared Debian inputs. Evaluation turns each repository into
a raw risk vector; calibration computes corpus percentiles; scoring
produces the per-repository reports. Collection is pure per repository
and parallelizes across a bounded worker pool.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

from hsbr.ci import ci_raw_metrics
from hsbr.community import community_raw_metrics
from hsbr.debian import (
    DependencyGraph,
    RepoPackageMapping,
    build_graph,
    dependency_impact_metrics,
    load_package_map,
    load_packages_index,
)
from hsbr.errors import ValidationError
from hsbr.forge import RepositorySnapshot, load_fixture
from hsbr.model import (
    HSBRReport,
    MetricId,
    RiskThresholds,
    RiskVector,
    WeightTable,
)
from hsbr.scan import scan_tree
from hsbr.scoring import CorpusStats, compute_corpus_stats, score_repository
from hsbr.semantic import SemanticBackend


@dataclass(frozen=True)
class RepoInputs:
    repo_id: str
    fixture_dir: Path
    tree_path: Path | None = None


@dataclass(frozen=True)
class CorpusSpec:
    repos: tuple[RepoInputs, ...]
    debian_index: Path | None = None
    package_map: Path | None = None


def load_corpus_spec(path: str | Path) -> CorpusSpec:
    """Read a corpus config; relative paths resolve against its directory.

    Format: ``{"debian_index"?, "package_map"?, "repos": [{"repo_id",
    "fixture", "tree"?}]}``. Every referenced path must exist.
    """
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"corpus config not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"corpus config is not valid JSON: {path} ({exc})") from exc
    base = path.parent

    def resolve(value: str, must_be_dir: bool = False) -> Path:
        candidate = (base / value).resolve() if not Path(value).is_absolute() else Path(value)
        if must_be_dir and not candidate.is_dir():
            raise ValidationError(f"corpus path not a directory: {candidate}")
        if not must_be_dir and not candidate.exists():
            raise ValidationError(f"corpus path does not exist: {candidate}")
        return candidate

    repos = []
    entries = payload.get("repos")
    if not isinstance(entries, list) or not entries:
        raise ValidationError(f"corpus config has no repos: {path}")
    for entry in entries:
        if "repo_id" not in entry or "fixture" not in entry:
            raise ValidationError(
                f"corpus repo entries need repo_id and fixture: {entry!r}")
        repos.append(RepoInputs(
            repo_id=entry["repo_id"],
            fixture_dir=resolve(entry["fixture"], must_be_dir=True),
            tree_path=resolve(entry["tree"], must_be_dir=True) if entry.get("tree") else None,
        ))
    seen = [r.repo_id for r in repos]
    if len(set(seen)) != len(seen):
        raise ValidationError(f"corpus config lists duplicate repo ids: {path}")
    return CorpusSpec(
        repos=tuple(repos),
        debian_index=resolve(payload["debian_index"]) if payload.get("debian_index") else None,
        package_map=resolve(payload["package_map"]) if payload.get("package_map") else None,
    )


@dataclass(frozen=True)
class EvaluatedRepo:
    """One repository's raw vector plus evaluation context."""

    repo_id: str
    vector: RiskVector
    fetched_at: datetime
    notes: tuple[str, ...] = ()


_D_METRICS = (MetricId.D1, MetricId.D2, MetricId.D3, MetricId.D4)
_P_METRICS = (MetricId.P1, MetricId.P2, MetricId.P3,
              MetricId.P4, MetricId.P5, MetricId.P6)


def collect_raw_vector(
    snapshot: RepositorySnapshot,
    graph: DependencyGraph | None = None,
    mapping: RepoPackageMapping | None = None,
    tree_path: Path | None = None,
    semantic: SemanticBackend | None = None,
) -> EvaluatedRepo:
    """Assemble the full raw vector for one repository.

    Missing inputs degrade with a note: no dependency graph or package
    mapping zeroes the dependency metrics; no file tree zeroes the
    payload metrics.
    """
    raw: dict[MetricId, object] = {}
    notes: list[str] = []

    if graph is not None and mapping is not None:
        impact = dependency_impact_metrics(graph, mapping)
        raw[MetricId.D1] = float(impact.self_priority)
        raw[MetricId.D2] = float(impact.self_essential)
        raw[MetricId.D3] = float(impact.dependents_priority)
        raw[MetricId.D4] = float(impact.dependents_essential)
        notes.extend(impact.warnings)
    else:
        raw.update({m: 0.0 for m in _D_METRICS})
        notes.append("no dependency data; dependency-impact metrics are zero")

    if tree_path is not None:
        result = scan_tree(tree_path, semantic=semantic)
        raw.update(result.raw_values())
        notes.extend(result.warnings)
    else:
        raw.update({m: 0.0 for m in _P_METRICS})
        notes.append("no file tree; payload-concealment metrics are zero")

    community = community_raw_metrics(snapshot, semantic=semantic)
    raw.update(community.raw_values())
    notes.extend(community.notes)

    ci = ci_raw_metrics(snapshot)
    raw[MetricId.C1] = 1.0 if ci.dependabot_disabled else 0.0
    raw[MetricId.C2] = ci.dangerous_provider_ratio
    raw[MetricId.C3] = ci.dangerous_pin_ratio
    notes.extend(ci.warnings)

    return EvaluatedRepo(
        repo_id=snapshot.repo_id,
        vector=RiskVector(raw=raw),
        fetched_at=snapshot.fetched_at,
        notes=tuple(notes),
    )


def evaluate_corpus(
    spec: CorpusSpec,
    semantic: SemanticBackend | None = None,
    max_workers: int = 8,
) -> list[EvaluatedRepo]:
    """Collect raw vectors for every repository in the corpus.

    Work runs on a bounded thread pool; results keep the corpus order.
    """
    graph = None
    mappings: dict[str, RepoPackageMapping] = {}
    if spec.debian_index is not None:
        graph = build_graph(load_packages_index(spec.debian_index))
    if spec.package_map is not None:
        mappings = load_package_map(spec.package_map)

    def evaluate(inputs: RepoInputs) -> EvaluatedRepo:
        snapshot = load_fixture(inputs.fixture_dir)
        tree = inputs.tree_path
        if tree is None and snapshot.file_tree_ref:
            candidate = inputs.fixture_dir / snapshot.file_tree_ref
            tree = candidate if candidate.is_dir() else None
        mapping = mappings.get(inputs.repo_id)
        if graph is not None and mapping is None:
            mapping = RepoPackageMapping(repo_id=inputs.repo_id)
        evaluated = collect_raw_vector(
            snapshot,
            graph=graph,
            mapping=mapping,
            tree_path=tree,
            semantic=semantic,
        )
        if evaluated.repo_id != inputs.repo_id:
            return EvaluatedRepo(
                repo_id=inputs.repo_id,
                vector=evaluated.vector,
                fetched_at=evaluated.fetched_at,
                notes=evaluated.notes + (
                    f"fixture snapshot names {evaluated.repo_id!r}",),
            )
        return evaluated

    workers = max(1, min(max_workers, len(spec.repos)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(evaluate, spec.repos))


def calibrate_corpus(
    spec: CorpusSpec,
    semantic: SemanticBackend | None = None,
    max_workers: int = 8,
) -> tuple[CorpusStats, list[EvaluatedRepo]]:
    evaluated = evaluate_corpus(spec, semantic=semantic, max_workers=max_workers)
    stats = compute_corpus_stats([repo.vector for repo in evaluated])
    return stats, evaluated


def score_evaluated(
    evaluated: list[EvaluatedRepo],
    stats: CorpusStats,
    weights: WeightTable,
    thresholds: RiskThresholds = RiskThresholds(),
    max_workers: int = 8,
) -> list[HSBRReport]:
    """Score already-evaluated repositories against frozen calibration."""

    def score(repo: EvaluatedRepo) -> HSBRReport:
        return score_repository(
            repo.repo_id, repo.vector, stats, weights,
            thresholds=thresholds, notes=repo.notes)

    workers = max(1, min(max_workers, len(evaluated) or 1))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(score, evaluated))
