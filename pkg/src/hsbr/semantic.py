"""Uniform interface to LLM-backed semantic judgments.

Three task kinds are supported: pull-request description/diff
consistency, binary-file context assessment and CI workflow commentary.
A deterministic mock backend keeps test suites reproducible; the HTTP
backend speaks an OpenAI-compatible chat-completions protocol and asks
for a constrained single-line reply.
"""

from __future__ import annotations

import os
import re
import threading
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Any, Protocol

import httpx

from hsbr.errors import SemanticUnavailableError, ValidationError


class SemanticTaskKind(str, Enum):
    PR_CONSISTENCY = "pr_consistency"
    BINARY_CONTEXT = "binary_context"
    CI_COMMENTARY = "ci_commentary"


#: Valid labels per task kind (CI commentary is free text).
CONSISTENCY_LABELS = ("consistent", "inconsistent")
CONTEXT_LABELS = ("Test", "Documentation", "Code", "Asset", "Other")

_REQUIRED_PAYLOAD_KEYS = {
    SemanticTaskKind.PR_CONSISTENCY: ("title", "body", "diff_summary"),
    SemanticTaskKind.BINARY_CONTEXT: ("path", "listing"),
    SemanticTaskKind.CI_COMMENTARY: ("workflow_text",),
}


@dataclass(frozen=True)
class SemanticTask:
    """One judgment request with a structured payload."""

    kind: SemanticTaskKind
    payload: dict[str, Any]

    def __post_init__(self):
        for key in _REQUIRED_PAYLOAD_KEYS[self.kind]:
            if key not in self.payload:
                raise ValidationError(
                    f"{self.kind.value} task payload is missing {key!r}"
                )
        if self.kind is SemanticTaskKind.BINARY_CONTEXT and not self.payload["path"]:
            raise ValidationError("binary_context task requires a non-empty path")


@dataclass(frozen=True)
class SemanticVerdict:
    label: str
    confidence: float
    rationale: str

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValidationError(f"confidence {self.confidence} outside [0, 1]")


class SemanticBackend(Protocol):
    name: str

    def assess(self, task: SemanticTask) -> SemanticVerdict: ...


def _check_label(task: SemanticTask, label: str) -> bool:
    if task.kind is SemanticTaskKind.PR_CONSISTENCY:
        return label in CONSISTENCY_LABELS
    if task.kind is SemanticTaskKind.BINARY_CONTEXT:
        return label in CONTEXT_LABELS
    return bool(label)


def assess(task: SemanticTask, backend: SemanticBackend) -> SemanticVerdict:
    """Run one task through a backend, validating the verdict label."""
    verdict = backend.assess(task)
    if not _check_label(task, verdict.label):
        raise ValidationError(
            f"backend returned label {verdict.label!r} for a {task.kind.value} task"
        )
    return verdict


def render_prompt(task: SemanticTask) -> str:
    """Fill the task kind's prompt template with the payload."""
    template = (
        resources.files("hsbr").joinpath("templates", f"{task.kind.value}.txt")
        .read_text(encoding="utf-8")
    )
    payload = dict(task.payload)
    if task.kind is SemanticTaskKind.PR_CONSISTENCY:
        lines = [
            "{} +{} -{} {}".format(
                entry["path"], entry["added"], entry["removed"],
                "binary" if entry["is_binary"] else "text")
            for entry in payload["diff_summary"]
        ]
        payload["diff_summary"] = "\n".join(lines) if lines else "(no files changed)"
        payload["body"] = payload["body"] or "(empty)"
    elif task.kind is SemanticTaskKind.BINARY_CONTEXT:
        listing = payload["listing"]
        payload["listing"] = "\n".join(listing) if listing else "(empty directory)"
    else:
        payload["workflow_text"] = payload["workflow_text"].rstrip("\n")
    return template.format(**payload)


_BENIGN_TITLE_WORDS = ("typo", "doc", "docs", "documentation", "readme", "comment")


class MockSemanticBackend:
    """Deterministic rule-based backend for tests and offline runs.

    Verdicts are a pure function of the task payload, so repeated runs
    over the same snapshot produce identical results.
    """

    name = "mock"

    def assess(self, task: SemanticTask) -> SemanticVerdict:
        if task.kind is SemanticTaskKind.PR_CONSISTENCY:
            return self._pr_consistency(task.payload)
        if task.kind is SemanticTaskKind.BINARY_CONTEXT:
            return self._binary_context(task.payload)
        return self._ci_commentary(task.payload)

    def _pr_consistency(self, payload: dict) -> SemanticVerdict:
        diff = payload["diff_summary"]
        binary_added = any(entry["is_binary"] for entry in diff)
        words = re.findall(r"[a-z]+", payload["title"].lower())
        benign_title = any(word in _BENIGN_TITLE_WORDS for word in words)
        if binary_added and benign_title:
            return SemanticVerdict(
                label="inconsistent",
                confidence=0.9,
                rationale="title suggests a cosmetic change but the diff adds binary content",
            )
        return SemanticVerdict(
            label="consistent",
            confidence=0.75,
            rationale="no mismatch between title and changed files",
        )

    def _binary_context(self, payload: dict) -> SemanticVerdict:
        from hsbr.scan import classify_path  # deferred: scan imports this module

        context = classify_path(payload["path"])
        return SemanticVerdict(
            label=context.value,
            confidence=0.8,
            rationale=f"path placement indicates {context.value.lower()} content",
        )

    def _ci_commentary(self, payload: dict) -> SemanticVerdict:
        uses = len(re.findall(r"^\s*(?:-\s*)?uses\s*:", payload["workflow_text"], re.M))
        return SemanticVerdict(
            label=f"workflow declares {uses} action reference(s)",
            confidence=0.5,
            rationale="static count of action references",
        )


_REPLY_RE = re.compile(
    r"label=(.*?)\s+confidence=([0-9.]+)\s+rationale=(.*)\s*$"
)


def _default_verdict(task: SemanticTask, reason: str) -> SemanticVerdict:
    if task.kind is SemanticTaskKind.PR_CONSISTENCY:
        label = "consistent"
    elif task.kind is SemanticTaskKind.BINARY_CONTEXT:
        from hsbr.scan import classify_path

        label = classify_path(task.payload["path"]).value
    else:
        label = ""
    return SemanticVerdict(label=label, confidence=0.0, rationale=f"degraded: {reason}")


class HttpSemanticBackend:
    """Chat-completions backend (OpenAI-compatible wire protocol).

    Base URL and API key come from ``HSBR_LLM_BASE_URL`` /
    ``HSBR_LLM_API_KEY`` unless given explicitly. Requests are bounded
    by ``max_in_flight`` and ``timeout``; an unparseable reply is
    retried once and then degraded to a low-confidence default.
    """

    name = "http"

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        model: str = "gpt-4o",
        timeout: float = 30.0,
        max_in_flight: int = 4,
        client: httpx.Client | None = None,
    ):
        self.base_url = (base_url or os.environ.get("HSBR_LLM_BASE_URL", "")).rstrip("/")
        if not self.base_url:
            raise ValidationError("HTTP semantic backend requires a base URL")
        self.api_key = api_key or os.environ.get("HSBR_LLM_API_KEY", "")
        self.model = model
        self._semaphore = threading.Semaphore(max_in_flight)
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        self._client = client or httpx.Client(timeout=timeout, headers=headers)

    def close(self) -> None:
        self._client.close()

    def _complete(self, prompt: str) -> str:
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        }
        with self._semaphore:
            response = self._client.post(f"{self.base_url}/chat/completions", json=body)
        if response.status_code != 200:
            raise SemanticUnavailableError(
                f"semantic backend returned HTTP {response.status_code}"
            )
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            raise SemanticUnavailableError(
                f"semantic backend reply is not a chat completion: {exc}"
            ) from exc

    def assess(self, task: SemanticTask) -> SemanticVerdict:
        prompt = render_prompt(task)
        last_reason = "unparseable reply"
        for _ in range(2):  # one retry on an unparseable reply
            try:
                reply = self._complete(prompt)
            except httpx.TransportError as exc:
                raise SemanticUnavailableError(f"semantic backend unreachable: {exc}") from exc
            match = _REPLY_RE.search(reply.strip())
            if match is None:
                continue
            label, confidence_text, rationale = match.groups()
            label = label.strip()
            try:
                confidence = min(1.0, max(0.0, float(confidence_text)))
            except ValueError:
                last_reason = f"bad confidence {confidence_text!r}"
                continue
            if not _check_label(task, label):
                last_reason = f"invalid label {label!r}"
                continue
            return SemanticVerdict(label=label, confidence=confidence,
                                   rationale=rationale.strip())
        return _default_verdict(task, last_reason)


def make_backend(name: str, **kwargs) -> SemanticBackend | None:
    """Build a backend from its CLI name: ``off``, ``mock`` or ``http``."""
    if name == "off":
        return None
    if name == "mock":
        return MockSemanticBackend()
    if name == "http":
        return HttpSemanticBackend(**kwargs)
    raise ValidationError(f"unknown semantic backend {name!r}")
