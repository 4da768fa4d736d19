"""Pydantic request/response models for the service endpoints.

Heavyweight inputs (fixture corpora, package indexes, file trees) are
referenced by path: the service and its clients share a filesystem.
Results come back inline as JSON payloads the CLI writes to disk.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

SemanticChoice = Literal["off", "mock", "http"]


class HealthResponse(BaseModel):
    status: str = "ok"
    version: str


class SemanticOptions(BaseModel):
    backend: SemanticChoice = "off"
    model: str = "gpt-4o"


class DebianImpactRequest(BaseModel):
    index_path: str
    package_map_path: str


class RepoImpact(BaseModel):
    self_priority: int
    self_essential: int
    dependents_priority: int
    dependents_essential: int
    warnings: list[str] = []


class DebianImpactResponse(BaseModel):
    repos: dict[str, RepoImpact]
    package_count: int


class ScanRequest(BaseModel):
    tree_path: str
    semantic: SemanticOptions = SemanticOptions()


class ScannedFile(BaseModel):
    path: str
    context: str
    size: int
    static_context: str
    semantic_context: str | None = None


class ScanResponse(BaseModel):
    raw: dict[str, float]
    binary_files: list[ScannedFile]
    warnings: list[str] = []


class FetchRequest(BaseModel):
    repo: str
    api_base: str = "https://api.github.com"
    max_prs: int = Field(default=500, ge=0)
    max_commits: int = Field(default=1000, ge=0)
    max_issues: int = Field(default=300, ge=0)
    fixture_dir: str | None = None


class FetchResponse(BaseModel):
    repo_id: str
    pull_requests: int
    commits: int
    issues: int
    workflow_files: int
    dependabot_config_present: bool
    saved_to: str | None = None


class CalibrateRequest(BaseModel):
    corpus_path: str
    semantic: SemanticOptions = SemanticOptions()


class CalibrateResponse(BaseModel):
    calibration: dict
    calibration_id: str
    repositories: int
    notes: list[str] = []


class ScoreRequest(BaseModel):
    corpus_path: str
    calibration_path: str
    weights_path: str | None = None
    semantic: SemanticOptions = SemanticOptions()
    medium_threshold: float = Field(default=0.33, ge=0.0, le=1.0)
    high_threshold: float = Field(default=0.66, ge=0.0, le=1.0)
    include_markdown: bool = False


class ScoreResponse(BaseModel):
    reports: list[dict]
    markdown: dict[str, str] = {}
    csv: str
    summary: dict


class RenderRequest(BaseModel):
    report: dict
    format: Literal["json", "markdown", "csv-row"]


class RenderResponse(BaseModel):
    content: str


class SensitivityRequest(BaseModel):
    corpus_path: str
    calibration_path: str
    weights_path: str | None = None
    semantic: SemanticOptions = SemanticOptions()
    runs: int = Field(default=10, ge=1)
    seed: int


class SensitivityResponse(BaseModel):
    report: dict
    summary_text: str


class CorrelateRequest(BaseModel):
    corpus_path: str
    calibration_path: str
    weights_path: str | None = None
    semantic: SemanticOptions = SemanticOptions()


class CorrelateResponse(BaseModel):
    metrics: list[str]
    matrix: list[list[float | None]]
    csv: str


class ErrorDetail(BaseModel):
    kind: Literal["validation", "processing", "network", "semantic-unavailable"]
    message: str
