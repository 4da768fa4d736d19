"""CI workflow auditing: action references, providers and pinning.

Parses workflow YAML robustly (a malformed workflow is itself a signal
and only downgrades to a warning) and computes the three raw CI values:
the dependabot-disabled flag and the untrusted-provider / unpinned
ratios over non-local action references.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import yaml

from hsbr.forge import RepositorySnapshot

#: Providers whose actions are considered first-party.
DEFAULT_TRUSTED_PROVIDERS = frozenset({"actions", "github"})

_FULL_SHA_RE = re.compile(r"^[0-9a-f]{40}$")


@dataclass(frozen=True)
class ActionUse:
    """One ``uses:`` reference found in a workflow."""

    workflow_path: str
    step_ref: str  # the raw uses: value
    provider: str  # segment before the first '/', empty for local/docker
    name: str
    ref: str  # segment after '@', empty when absent
    is_local: bool
    is_docker: bool

    @property
    def is_pinned(self) -> bool:
        """Pinned means a full 40-hex commit sha (or a docker digest)."""
        if self.is_docker:
            return self.ref.startswith("sha256:")
        return bool(_FULL_SHA_RE.fullmatch(self.ref))


@dataclass(frozen=True)
class CIRawValues:
    dependabot_disabled: bool
    dangerous_provider_ratio: float
    dangerous_pin_ratio: float
    action_uses: tuple[ActionUse, ...]
    warnings: tuple[str, ...] = ()


def _parse_use(workflow_path: str, raw: str) -> ActionUse:
    raw = raw.strip()
    is_local = raw.startswith("./") or raw.startswith(".\\")
    is_docker = raw.startswith("docker://")
    body = raw[len("docker://"):] if is_docker else raw
    ref = ""
    if "@" in body:
        body, _, ref = body.partition("@")
    provider, name = "", body
    if not is_local and not is_docker:
        provider, slash, rest = body.partition("/")
        name = rest if slash else ""
    return ActionUse(
        workflow_path=workflow_path,
        step_ref=raw,
        provider=provider,
        name=name,
        ref=ref,
        is_local=is_local,
        is_docker=is_docker,
    )


def _walk_uses(node, found: list[str]) -> None:
    if isinstance(node, dict):
        for key, value in node.items():
            if key == "uses" and isinstance(value, str):
                found.append(value)
            else:
                _walk_uses(value, found)
    elif isinstance(node, list):
        for item in node:
            _walk_uses(item, found)


def parse_workflows(
    files: list[tuple[str, str]]
) -> tuple[list[ActionUse], list[str]]:
    """Extract every action reference from workflow files.

    Returns the uses plus parse warnings; malformed files contribute no
    uses but never raise. Job-level ``uses:`` (reusable workflows) are
    included alongside step-level ones.
    """
    uses: list[ActionUse] = []
    warnings: list[str] = []
    for path, text in files:
        try:
            documents = list(yaml.safe_load_all(text))
        except yaml.YAMLError as exc:
            warnings.append(f"malformed workflow {path}: {exc}")
            continue
        refs: list[str] = []
        for document in documents:
            jobs = document.get("jobs") if isinstance(document, dict) else None
            if not isinstance(jobs, dict):
                continue
            _walk_uses(jobs, refs)
        uses.extend(_parse_use(path, ref) for ref in refs)
    return uses, warnings


def ci_raw_metrics(
    snapshot: RepositorySnapshot,
    trusted_providers: frozenset[str] = DEFAULT_TRUSTED_PROVIDERS,
) -> CIRawValues:
    """Compute the three raw CI risk values for a snapshot.

    Local (``./``) uses are excluded from both denominators; docker
    uses count as untrusted providers and as unpinned unless pinned to
    a ``sha256`` digest. Both ratios are 0 over an empty denominator.
    """
    uses, warnings = parse_workflows(
        [(f.path, f.text) for f in snapshot.workflow_files])
    counted = [u for u in uses if not u.is_local]
    if counted:
        untrusted = sum(
            1 for u in counted if u.is_docker or u.provider not in trusted_providers)
        unpinned = sum(1 for u in counted if not u.is_pinned)
        provider_ratio = untrusted / len(counted)
        pin_ratio = unpinned / len(counted)
    else:
        provider_ratio = 0.0
        pin_ratio = 0.0
    return CIRawValues(
        dependabot_disabled=not snapshot.dependabot_config_present,
        dangerous_provider_ratio=provider_ratio,
        dangerous_pin_ratio=pin_ratio,
        action_uses=tuple(uses),
        warnings=tuple(warnings),
    )
