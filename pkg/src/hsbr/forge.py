"""Repository metadata collection from a GitHub-compatible REST API.

Snapshots capture everything downstream metrics need: stats, pull
requests with reviews and diff summaries, default-branch commits,
issues, workflow files and the dependabot signal. A snapshot can be
frozen to a fixture directory and reloaded bit-exactly, so the whole
pipeline runs offline and reproducibly.
"""

from __future__ import annotations

import base64
import json
import os
import re
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Annotated, Literal

import httpx
from pydantic import (
    AfterValidator,
    BaseModel,
    ConfigDict,
    Field,
    ValidationError as PydanticValidationError,
    field_validator,
    model_validator,
)

from hsbr.errors import (
    FixtureError,
    NetworkError,
    RateLimitedError,
    RepoNotFoundError,
    ValidationError,
)

FIXTURE_SCHEMA_VERSION = 1

_FIXTURE_FILES = ("pulls.json", "commits.json", "issues.json", "workflows.json")


def _to_utc(value: datetime) -> datetime:
    if value.tzinfo is None:
        return value.replace(tzinfo=timezone.utc)
    return value.astimezone(timezone.utc)


UtcDatetime = Annotated[datetime, AfterValidator(_to_utc)]


class RepoStats(BaseModel):
    model_config = ConfigDict(frozen=True)

    stargazers: int = Field(default=0, ge=0)
    watchers: int = Field(default=0, ge=0)
    forks: int = Field(default=0, ge=0)


class ReviewRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    reviewer: str
    state: Literal["approved", "changes_requested", "commented"]
    timestamp: UtcDatetime


class DiffEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    path: str
    added: int = 0
    removed: int = 0
    is_binary: bool = False


class PullRequestRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    number: int
    author: str
    title: str = ""
    body: str = ""
    created_at: UtcDatetime
    merged_at: UtcDatetime | None = None
    merged_by: str | None = None
    reviews: tuple[ReviewRecord, ...] = ()
    comment_count: int = 0
    participant_ids: tuple[str, ...] = ()
    diff_summary: tuple[DiffEntry, ...] = ()

    @field_validator("reviews")
    @classmethod
    def _sort_reviews(cls, reviews):
        return tuple(sorted(reviews, key=lambda r: (r.timestamp, r.reviewer)))

    @field_validator("participant_ids")
    @classmethod
    def _canonical_participants(cls, ids):
        return tuple(sorted(set(ids)))

    @model_validator(mode="after")
    def _merged_fields_come_together(self):
        if (self.merged_at is None) != (self.merged_by is None):
            raise ValueError("merged_at and merged_by must be present together")
        return self

    @property
    def merged(self) -> bool:
        return self.merged_at is not None

    @property
    def approve_count(self) -> int:
        return sum(1 for r in self.reviews if r.state == "approved")


class CommitRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    sha: str = Field(min_length=1)
    author: str
    committed_at: UtcDatetime
    linked_pr: int | None = None

    @property
    def is_direct(self) -> bool:
        return self.linked_pr is None


class IssueRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    number: int
    participant_ids: tuple[str, ...] = ()

    @field_validator("participant_ids")
    @classmethod
    def _canonical_participants(cls, ids):
        return tuple(sorted(set(ids)))


class WorkflowFile(BaseModel):
    model_config = ConfigDict(frozen=True)

    path: str
    text: str


class RepositorySnapshot(BaseModel):
    model_config = ConfigDict(frozen=True)

    repo_id: str = Field(min_length=1)
    stats: RepoStats = RepoStats()
    pull_requests: tuple[PullRequestRecord, ...] = ()
    commits_default_branch: tuple[CommitRecord, ...] = ()
    issues: tuple[IssueRecord, ...] = ()
    workflow_files: tuple[WorkflowFile, ...] = ()
    dependabot_config_present: bool = False
    file_tree_ref: str | None = None
    fetched_at: UtcDatetime = datetime(1970, 1, 1, tzinfo=timezone.utc)

    @model_validator(mode="after")
    def _linked_prs_exist(self):
        known = {pr.number for pr in self.pull_requests}
        for commit in self.commits_default_branch:
            if commit.linked_pr is not None and commit.linked_pr not in known:
                raise ValueError(
                    f"commit {commit.sha} links to unknown PR #{commit.linked_pr}")
        return self


# ---------------------------------------------------------------------------
# Fixture store
# ---------------------------------------------------------------------------

def _canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def save_fixture(snapshot: RepositorySnapshot, directory: str | Path) -> None:
    """Freeze a snapshot to a fixture directory (deterministic bytes)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    dump = snapshot.model_dump(mode="json")
    manifest = {
        "schema_version": FIXTURE_SCHEMA_VERSION,
        "repo_id": dump["repo_id"],
        "fetched_at": dump["fetched_at"],
        "stats": dump["stats"],
        "dependabot_config_present": dump["dependabot_config_present"],
        "file_tree_ref": dump["file_tree_ref"],
    }
    collections = {
        "pulls.json": dump["pull_requests"],
        "commits.json": dump["commits_default_branch"],
        "issues.json": dump["issues"],
        "workflows.json": dump["workflow_files"],
    }
    (directory / "manifest.json").write_text(_canonical_json(manifest), encoding="utf-8")
    for name, payload in collections.items():
        (directory / name).write_text(_canonical_json(payload), encoding="utf-8")


def _read_fixture_file(directory: Path, name: str):
    path = directory / name
    if not path.is_file():
        raise FixtureError(f"fixture file missing: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FixtureError(f"fixture file corrupt: {path} ({exc})") from exc


def load_fixture(directory: str | Path) -> RepositorySnapshot:
    """Load a snapshot saved by :func:`save_fixture`."""
    directory = Path(directory)
    manifest = _read_fixture_file(directory, "manifest.json")
    version = manifest.get("schema_version")
    if version != FIXTURE_SCHEMA_VERSION:
        raise FixtureError(
            f"fixture schema version {version!r} unsupported "
            f"(expected {FIXTURE_SCHEMA_VERSION}): {directory / 'manifest.json'}")
    pulls, commits, issues, workflows = (
        _read_fixture_file(directory, name) for name in _FIXTURE_FILES)
    try:
        return RepositorySnapshot(
            repo_id=manifest["repo_id"],
            stats=manifest["stats"],
            pull_requests=pulls,
            commits_default_branch=commits,
            issues=issues,
            workflow_files=workflows,
            dependabot_config_present=manifest["dependabot_config_present"],
            file_tree_ref=manifest.get("file_tree_ref"),
            fetched_at=manifest["fetched_at"],
        )
    except (KeyError, PydanticValidationError) as exc:
        raise FixtureError(f"fixture invalid in {directory}: {exc}") from exc


# ---------------------------------------------------------------------------
# HTTP collection
# ---------------------------------------------------------------------------

class FetchLimits(BaseModel):
    """Collection caps keeping runs bounded and reproducible."""

    model_config = ConfigDict(frozen=True)

    max_prs: int = 500
    max_commits: int = 1000
    max_issues: int = 300
    page_size: int = 100


_MERGE_MESSAGE_RE = re.compile(r"Merge pull request #(\d+)")

_REVIEW_STATES = {
    "APPROVED": "approved",
    "CHANGES_REQUESTED": "changes_requested",
}


class ForgeClient:
    """Minimal GitHub-compatible REST client with retry and pagination.

    The token comes from ``HSBR_FORGE_TOKEN`` (or ``GITHUB_TOKEN``)
    unless passed explicitly; unauthenticated use is allowed. Transport
    failures and 5xx responses are retried with exponential backoff, at
    most five attempts.
    """

    def __init__(
        self,
        api_base: str = "https://api.github.com",
        token: str | None = None,
        limits: FetchLimits | None = None,
        timeout: float = 30.0,
        retry_base_delay: float = 0.5,
        client: httpx.Client | None = None,
    ):
        self.api_base = api_base.rstrip("/")
        self.limits = limits or FetchLimits()
        self._retry_base_delay = retry_base_delay
        token = token or os.environ.get("HSBR_FORGE_TOKEN") or os.environ.get("GITHUB_TOKEN")
        headers = {"Accept": "application/vnd.github+json"}
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._client = client or httpx.Client(timeout=timeout, headers=headers)

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "ForgeClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _get(self, path: str, params: dict | None = None) -> httpx.Response:
        url = f"{self.api_base}{path}"
        last_error: Exception | None = None
        for attempt in range(5):
            if attempt:
                time.sleep(self._retry_base_delay * 2 ** (attempt - 1))
            try:
                response = self._client.get(url, params=params)
            except httpx.TransportError as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = NetworkError(f"HTTP {response.status_code} from {url}")
                continue
            if response.status_code == 404:
                raise RepoNotFoundError(f"not found: {url}")
            if response.status_code in (401, 403):
                if response.headers.get("X-RateLimit-Remaining") == "0":
                    reset = response.headers.get("X-RateLimit-Reset")
                    raise RateLimitedError(
                        f"rate limited by {self.api_base}",
                        reset_at=float(reset) if reset else None)
                raise NetworkError(
                    f"HTTP {response.status_code} (authentication/permission) from {url}")
            if response.status_code != 200:
                raise NetworkError(f"HTTP {response.status_code} from {url}")
            return response
        raise NetworkError(f"request failed after 5 attempts: {url} ({last_error})")

    def _get_optional(self, path: str, params: dict | None = None):
        try:
            return self._get(path, params).json()
        except RepoNotFoundError:
            return None

    def _paginate(self, path: str, cap: int, params: dict | None = None) -> list:
        items: list = []
        page = 1
        while len(items) < cap:
            page_params = dict(params or {})
            page_params.update({"per_page": self.limits.page_size, "page": page})
            batch = self._get(path, page_params).json()
            if not isinstance(batch, list) or not batch:
                break
            items.extend(batch)
            if len(batch) < self.limits.page_size:
                break
            page += 1
        return items[:cap]

    def _fetch_pull(self, repo_ref: str, item: dict) -> PullRequestRecord:
        number = item["number"]
        detail = self._get(f"/repos/{repo_ref}/pulls/{number}").json()
        reviews = [
            ReviewRecord(
                reviewer=(entry.get("user") or {}).get("login", ""),
                state=_REVIEW_STATES.get(entry.get("state", ""), "commented"),
                timestamp=entry["submitted_at"],
            )
            for entry in self._paginate(f"/repos/{repo_ref}/pulls/{number}/reviews", cap=200)
            if entry.get("submitted_at")
        ]
        files = self._paginate(f"/repos/{repo_ref}/pulls/{number}/files", cap=300)
        diff = [
            DiffEntry(
                path=entry["filename"],
                added=entry.get("additions", 0),
                removed=entry.get("deletions", 0),
                is_binary="patch" not in entry,
            )
            for entry in files
        ]
        comments = self._paginate(f"/repos/{repo_ref}/issues/{number}/comments", cap=200)
        author = (detail.get("user") or {}).get("login", "")
        participants = {author}
        participants.update(r.reviewer for r in reviews)
        participants.update(
            (entry.get("user") or {}).get("login", "") for entry in comments)
        participants.discard("")
        merged_by = (detail.get("merged_by") or {}).get("login")
        merged_at = detail.get("merged_at")
        if merged_at is None:
            merged_by = None
        elif merged_by is None:
            merged_by = "unknown"
        return PullRequestRecord(
            number=number,
            author=author,
            title=detail.get("title") or "",
            body=detail.get("body") or "",
            created_at=detail["created_at"],
            merged_at=merged_at,
            merged_by=merged_by,
            reviews=tuple(reviews),
            comment_count=detail.get("comments", len(comments))
            + detail.get("review_comments", 0),
            participant_ids=tuple(participants),
            diff_summary=tuple(diff),
        )

    def _fetch_workflows(self, repo_ref: str) -> list[WorkflowFile]:
        listing = self._get_optional(f"/repos/{repo_ref}/contents/.github/workflows")
        if not isinstance(listing, list):
            return []
        files = []
        for entry in listing:
            if entry.get("type") != "file":
                continue
            content = self._get_optional(f"/repos/{repo_ref}/contents/{entry['path']}")
            if not content:
                continue
            if content.get("encoding") == "base64":
                text = base64.b64decode(content.get("content", "")).decode(
                    "utf-8", errors="replace")
            else:
                text = content.get("content", "")
            files.append(WorkflowFile(path=entry["path"], text=text))
        return sorted(files, key=lambda f: f.path)

    def fetch_snapshot(self, repo_ref: str) -> RepositorySnapshot:
        """Collect a full snapshot of ``owner/name`` within the caps."""
        if "/" not in repo_ref:
            raise ValidationError(f"repository reference must be owner/name: {repo_ref!r}")
        info = self._get(f"/repos/{repo_ref}").json()
        stats = RepoStats(
            stargazers=info.get("stargazers_count", 0),
            watchers=info.get("subscribers_count", info.get("watchers_count", 0)),
            forks=info.get("forks_count", 0),
        )
        default_branch = info.get("default_branch", "main")

        pr_items = self._paginate(
            f"/repos/{repo_ref}/pulls", cap=self.limits.max_prs,
            params={"state": "all", "sort": "created", "direction": "desc"})
        pulls = [self._fetch_pull(repo_ref, item) for item in pr_items]
        pulls.sort(key=lambda pr: (pr.created_at, pr.number), reverse=True)

        sha_to_pr: dict[str, int] = {}
        for item in pr_items:
            number = item["number"]
            if item.get("merged_at"):
                for sha in (item.get("merge_commit_sha"), (item.get("head") or {}).get("sha")):
                    if sha:
                        sha_to_pr[sha] = number
        known_numbers = {pr.number for pr in pulls}

        commit_items = self._paginate(
            f"/repos/{repo_ref}/commits", cap=self.limits.max_commits,
            params={"sha": default_branch})
        commits = []
        for item in commit_items:
            sha = item["sha"]
            commit_info = item.get("commit", {})
            author = (item.get("author") or {}).get("login") or (
                commit_info.get("author") or {}).get("name", "")
            linked = sha_to_pr.get(sha)
            if linked is None:
                match = _MERGE_MESSAGE_RE.search(commit_info.get("message", ""))
                if match and int(match.group(1)) in known_numbers:
                    linked = int(match.group(1))
            commits.append(CommitRecord(
                sha=sha,
                author=author,
                committed_at=(commit_info.get("author") or {}).get("date")
                or (commit_info.get("committer") or {}).get("date"),
                linked_pr=linked,
            ))

        issue_items = self._paginate(
            f"/repos/{repo_ref}/issues", cap=self.limits.max_issues,
            params={"state": "all"})
        issues = []
        for item in issue_items:
            if "pull_request" in item:
                continue
            number = item["number"]
            comments = self._paginate(
                f"/repos/{repo_ref}/issues/{number}/comments", cap=200)
            participants = {(item.get("user") or {}).get("login", "")}
            participants.update(
                (entry.get("user") or {}).get("login", "") for entry in comments)
            participants.discard("")
            issues.append(IssueRecord(number=number, participant_ids=tuple(participants)))

        dependabot = any(
            self._get_optional(f"/repos/{repo_ref}/contents/.github/{name}") is not None
            for name in ("dependabot.yml", "dependabot.yaml"))

        return RepositorySnapshot(
            repo_id=repo_ref,
            stats=stats,
            pull_requests=tuple(pulls),
            commits_default_branch=tuple(commits),
            issues=tuple(issues),
            workflow_files=tuple(self._fetch_workflows(repo_ref)),
            dependabot_config_present=dependabot,
            fetched_at=datetime.now(timezone.utc).replace(microsecond=0),
        )
