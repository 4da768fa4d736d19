"""FastAPI application wrapping the evaluation pipeline.

All endpoints are stateless: requests carry input paths or inline
payloads, responses carry the produced artifacts. Domain errors map to
a structured ``{"kind", "message"}`` detail that clients translate
into exit codes.
"""

from __future__ import annotations

import json
from datetime import timezone

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

import hsbr
from hsbr.analysis import (
    correlation_csv,
    correlation_payload,
    metric_correlations,
    sensitivity_payload,
    sensitivity_report,
    sensitivity_summary_text,
)
from hsbr.debian import (
    build_graph,
    dependency_impact_metrics,
    load_package_map,
    load_packages_index,
)
from hsbr.errors import (
    CalibrationError,
    FixtureError,
    HsbrError,
    NetworkError,
    PackagesParseError,
    RateLimitedError,
    RepoNotFoundError,
    ScanError,
    ScoringError,
    SemanticUnavailableError,
    UndefinedCorrelationError,
    UndefinedExpectationError,
    ValidationError,
)
from hsbr.forge import FetchLimits, ForgeClient, save_fixture
from hsbr.model import RiskThresholds, default_weights, load_weights
from hsbr.pipeline import calibrate_corpus, evaluate_corpus, load_corpus_spec, score_evaluated
from hsbr.reporting import (
    Provenance,
    corpus_summary_payload,
    emit_csv,
    emit_report,
    report_payload,
)
from hsbr.scan import scan_tree
from hsbr.scoring import calibration_id, dumps_calibration, load_calibration
from hsbr.semantic import make_backend
from hsbr.service import schemas

_ERROR_KINDS: tuple[tuple[type, str, int], ...] = (
    (SemanticUnavailableError, "semantic-unavailable", 503),
    (RateLimitedError, "network", 502),
    (NetworkError, "network", 502),
    (RepoNotFoundError, "validation", 400),
    (PackagesParseError, "processing", 422),
    (ScanError, "processing", 422),
    (ScoringError, "processing", 422),
    (CalibrationError, "processing", 422),
    (UndefinedCorrelationError, "processing", 422),
    (UndefinedExpectationError, "processing", 422),
    (FixtureError, "validation", 400),
    (ValidationError, "validation", 400),
)


def classify_error(error: HsbrError) -> tuple[str, int]:
    for cls, kind, status in _ERROR_KINDS:
        if isinstance(error, cls):
            return kind, status
    return "processing", 422


def _backend(options: schemas.SemanticOptions):
    if options.backend == "http":
        return make_backend("http", model=options.model)
    return make_backend(options.backend)


def _backend_label(options: schemas.SemanticOptions) -> str:
    if options.backend == "http":
        return f"http:{options.model}"
    return options.backend


def _iso(dt) -> str:
    return dt.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def create_app() -> FastAPI:
    app = FastAPI(
        title="hsbr",
        description="High-stealth backdoor risk evaluation service",
        version=hsbr.__version__,
    )

    @app.exception_handler(HsbrError)
    async def _domain_error(request: Request, error: HsbrError) -> JSONResponse:
        kind, status = classify_error(error)
        return JSONResponse(
            status_code=status,
            content={"detail": {"kind": kind, "message": str(error)}},
        )

    @app.get("/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        return schemas.HealthResponse(version=hsbr.__version__)

    @app.post("/debian/impact", response_model=schemas.DebianImpactResponse)
    def debian_impact(request: schemas.DebianImpactRequest) -> schemas.DebianImpactResponse:
        graph = build_graph(load_packages_index(request.index_path))
        mappings = load_package_map(request.package_map_path)
        repos = {}
        for repo_id, mapping in sorted(mappings.items()):
            impact = dependency_impact_metrics(graph, mapping)
            repos[repo_id] = schemas.RepoImpact(
                self_priority=impact.self_priority,
                self_essential=impact.self_essential,
                dependents_priority=impact.dependents_priority,
                dependents_essential=impact.dependents_essential,
                warnings=list(impact.warnings),
            )
        return schemas.DebianImpactResponse(repos=repos, package_count=len(graph.nodes))

    @app.post("/scan", response_model=schemas.ScanResponse)
    def scan(request: schemas.ScanRequest) -> schemas.ScanResponse:
        result = scan_tree(request.tree_path, semantic=_backend(request.semantic))
        return schemas.ScanResponse(
            raw={m.value: v for m, v in result.raw_values().items()},
            binary_files=[
                schemas.ScannedFile(
                    path=f.path,
                    context=f.context.value,
                    size=f.size,
                    static_context=f.static_context.value,
                    semantic_context=f.semantic_context.value
                    if f.semantic_context else None,
                )
                for f in result.binary_files
            ],
            warnings=list(result.warnings),
        )

    @app.post("/fetch", response_model=schemas.FetchResponse)
    def fetch(request: schemas.FetchRequest) -> schemas.FetchResponse:
        limits = FetchLimits(
            max_prs=request.max_prs,
            max_commits=request.max_commits,
            max_issues=request.max_issues,
        )
        with ForgeClient(api_base=request.api_base, limits=limits) as client:
            snapshot = client.fetch_snapshot(request.repo)
        saved_to = None
        if request.fixture_dir:
            save_fixture(snapshot, request.fixture_dir)
            saved_to = request.fixture_dir
        return schemas.FetchResponse(
            repo_id=snapshot.repo_id,
            pull_requests=len(snapshot.pull_requests),
            commits=len(snapshot.commits_default_branch),
            issues=len(snapshot.issues),
            workflow_files=len(snapshot.workflow_files),
            dependabot_config_present=snapshot.dependabot_config_present,
            saved_to=saved_to,
        )

    @app.post("/calibrate", response_model=schemas.CalibrateResponse)
    def calibrate(request: schemas.CalibrateRequest) -> schemas.CalibrateResponse:
        spec = load_corpus_spec(request.corpus_path)
        stats, evaluated = calibrate_corpus(spec, semantic=_backend(request.semantic))
        return schemas.CalibrateResponse(
            calibration=json.loads(dumps_calibration(stats)),
            calibration_id=calibration_id(stats),
            repositories=len(evaluated),
            notes=list(stats.notes),
        )

    def _scored(request) -> tuple[list, list, str, str]:
        spec = load_corpus_spec(request.corpus_path)
        stats = load_calibration(request.calibration_path)
        weights = (load_weights(request.weights_path)
                   if request.weights_path else default_weights())
        backend = _backend(request.semantic)
        evaluated = evaluate_corpus(spec, semantic=backend)
        thresholds = RiskThresholds(
            medium=getattr(request, "medium_threshold", 0.33),
            high=getattr(request, "high_threshold", 0.66),
        )
        reports = score_evaluated(evaluated, stats, weights, thresholds=thresholds)
        return evaluated, reports, calibration_id(stats), _backend_label(request.semantic)

    @app.post("/score", response_model=schemas.ScoreResponse)
    def score(request: schemas.ScoreRequest) -> schemas.ScoreResponse:
        evaluated, reports, cal_id, backend_label = _scored(request)
        provenances = [
            Provenance(
                fetched_at=_iso(repo.fetched_at),
                calibration_id=cal_id,
                semantic_backend=backend_label,
            )
            for repo in evaluated
        ]
        markdown = {}
        if request.include_markdown:
            markdown = {
                report.repo_id: emit_report(report, "markdown", prov).decode("utf-8")
                for report, prov in zip(reports, provenances)
            }
        return schemas.ScoreResponse(
            reports=[report_payload(r, p) for r, p in zip(reports, provenances)],
            markdown=markdown,
            csv=emit_csv(reports, provenances),
            summary=corpus_summary_payload(reports, cal_id, backend_label),
        )

    @app.post("/report/render", response_model=schemas.RenderResponse)
    def render(request: schemas.RenderRequest) -> schemas.RenderResponse:
        payload = request.report
        try:
            rebuilt, provenance = _report_from_payload(payload)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"report payload invalid: {exc}") from exc
        content = emit_report(rebuilt, request.format, provenance)
        return schemas.RenderResponse(content=content.decode("utf-8"))

    @app.post("/sensitivity", response_model=schemas.SensitivityResponse)
    def sensitivity(request: schemas.SensitivityRequest) -> schemas.SensitivityResponse:
        spec = load_corpus_spec(request.corpus_path)
        stats = load_calibration(request.calibration_path)
        weights = (load_weights(request.weights_path)
                   if request.weights_path else default_weights())
        backend = _backend(request.semantic)
        evaluated = evaluate_corpus(spec, semantic=backend)
        reports = score_evaluated(evaluated, stats, weights)
        vectors = {r.repo_id: r.vector for r in reports}
        result = sensitivity_report(vectors, weights, runs=request.runs,
                                    seed=request.seed)
        return schemas.SensitivityResponse(
            report=sensitivity_payload(result),
            summary_text=sensitivity_summary_text(result),
        )

    @app.post("/correlate", response_model=schemas.CorrelateResponse)
    def correlate(request: schemas.CorrelateRequest) -> schemas.CorrelateResponse:
        spec = load_corpus_spec(request.corpus_path)
        stats = load_calibration(request.calibration_path)
        weights = (load_weights(request.weights_path)
                   if request.weights_path else default_weights())
        backend = _backend(request.semantic)
        evaluated = evaluate_corpus(spec, semantic=backend)
        reports = score_evaluated(evaluated, stats, weights)
        matrix = metric_correlations({r.repo_id: r.vector for r in reports})
        payload = correlation_payload(matrix)
        return schemas.CorrelateResponse(
            metrics=payload["metrics"],
            matrix=payload["matrix"],
            csv=correlation_csv(matrix),
        )

    return app


def _report_from_payload(payload: dict):
    """Rebuild a report object from its JSON payload (for re-rendering)."""
    from hsbr.model import (
        Dimension,
        Histogram,
        HSBRReport,
        MetricId,
        RiskLevel,
        RiskVector,
    )

    raw = {}
    for name, value in payload["raw"].items():
        metric = MetricId(name)
        if isinstance(value, dict):
            raw[metric] = Histogram.from_dict({int(k): int(v) for k, v in value.items()})
        else:
            raw[metric] = float(value)
    normalized = {MetricId(name): float(value)
                  for name, value in payload["metrics"].items()}
    report = HSBRReport(
        repo_id=payload["repo_id"],
        dimension_scores={Dimension(d): float(s)
                          for d, s in payload["dimension_scores"].items()},
        total=float(payload["total"]),
        risk_level=RiskLevel(payload["risk_level"]),
        explanations=tuple(payload["explanations"]),
        vector=RiskVector(raw=raw, normalized=normalized),
        notes=tuple(payload.get("notes", ())),
    )
    prov = payload["provenance"]
    provenance = Provenance(
        fetched_at=prov["fetched_at"],
        calibration_id=prov["calibration_id"],
        semantic_backend=prov["semantic_backend"],
        tool_version=prov.get("tool_version", hsbr.__version__),
    )
    return report, provenance


app = create_app()
