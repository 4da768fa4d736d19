"""Repository file-tree scanning for concealed binary payloads.

Walks a checked-out tree (``.git`` excluded, symlinks not followed),
detects binary files by extension and content sniffing, classifies each
one into a functional context and produces the payload-concealment raw
values: five per-context presence flags plus the total binary count.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from hsbr.errors import ScanError
from hsbr.model import MetricId
from hsbr.semantic import SemanticBackend, SemanticTask, SemanticTaskKind, assess

PREFIX_BYTES = 8192

#: Extensions always treated as binary, even when the content is empty
#: or truncated (attackers can ship clipped payload carriers).
BINARY_EXTENSIONS = frozenset({
    ".bin", ".so", ".o", ".a", ".dll", ".exe", ".png", ".jpg", ".jpeg",
    ".gif", ".ico", ".pdf", ".zip", ".gz", ".xz", ".bz2", ".tar", ".jar",
    ".class", ".wasm", ".woff", ".woff2", ".ttf", ".db", ".sqlite",
})


class FileContext(str, Enum):
    TEST = "Test"
    DOCUMENTATION = "Documentation"
    CODE = "Code"
    ASSET = "Asset"
    OTHER = "Other"


@dataclass(frozen=True)
class ScanRules:
    """Path classification rule sets; overridable via a config file."""

    test_segments: frozenset[str] = frozenset(
        {"test", "tests", "testdata", "testing", "spec", "specs", "fixtures", "t"})
    doc_segments: frozenset[str] = frozenset(
        {"doc", "docs", "documentation", "man", "manual"})
    doc_extensions: frozenset[str] = frozenset({".md", ".rst", ".txt", ".adoc"})
    asset_segments: frozenset[str] = frozenset(
        {"asset", "assets", "images", "img", "icons", "media", "static", "resources"})
    code_extensions: frozenset[str] = frozenset(
        {".c", ".h", ".cpp", ".hpp", ".cc", ".rs", ".go", ".py", ".js", ".ts",
         ".java", ".sh", ".m4", ".ac", ".am", ".cmake", ".mk"})
    code_segments: frozenset[str] = frozenset({"src", "lib", "include"})


DEFAULT_RULES = ScanRules()

_RULE_FIELDS = ("test_segments", "doc_segments", "doc_extensions",
                "asset_segments", "code_extensions", "code_segments")


def load_scan_rules(path: str | Path) -> ScanRules:
    """Read rule overrides: ``<field> = item1,item2,...`` per line."""
    overrides = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or key not in _RULE_FIELDS:
            raise ScanError(f"scan rules line {lineno}: unknown field {key!r}")
        overrides[key] = frozenset(
            item.strip().lower() for item in value.split(",") if item.strip())
    return ScanRules(**overrides)


@dataclass(frozen=True)
class BinaryFile:
    """One detected binary file with its static and final contexts."""

    path: str
    context: FileContext
    size: int
    static_context: FileContext
    semantic_context: FileContext | None = None


@dataclass(frozen=True)
class ScanResult:
    binary_files: tuple[BinaryFile, ...]
    warnings: tuple[str, ...] = ()

    @property
    def total_binary_count(self) -> int:
        return len(self.binary_files)

    @property
    def per_context_flags(self) -> dict[FileContext, bool]:
        present = {f.context for f in self.binary_files}
        return {context: context in present for context in FileContext}

    def raw_values(self) -> dict[MetricId, float]:
        """Payload-concealment raw metric values from this scan."""
        flags = self.per_context_flags
        return {
            MetricId.P1: float(flags[FileContext.TEST]),
            MetricId.P2: float(flags[FileContext.DOCUMENTATION]),
            MetricId.P3: float(flags[FileContext.CODE]),
            MetricId.P4: float(flags[FileContext.ASSET]),
            MetricId.P5: float(flags[FileContext.OTHER]),
            MetricId.P6: float(self.total_binary_count),
        }


def _extension(path: str) -> str:
    name = path.rsplit("/", 1)[-1]
    dot = name.rfind(".")
    return name[dot:].lower() if dot > 0 else ""


def _nontext_ratio(prefix: bytes) -> float:
    """Fraction of bytes outside printable ASCII, common whitespace and
    well-formed UTF-8 multi-byte sequences."""
    if not prefix:
        return 0.0
    nontext = 0
    i, n = 0, len(prefix)
    while i < n:
        b = prefix[i]
        if b in (0x09, 0x0A, 0x0D) or 0x20 <= b <= 0x7E:
            i += 1
            continue
        if 0xC2 <= b <= 0xF4:
            length = 2 if b < 0xE0 else 3 if b < 0xF0 else 4
            chunk = prefix[i:i + length]
            if len(chunk) == length:
                try:
                    chunk.decode("utf-8")
                    i += length
                    continue
                except UnicodeDecodeError:
                    pass
            elif i + length > n:
                # Sequence clipped by the prefix window: give it the
                # benefit of the doubt rather than flip the verdict.
                i = n
                continue
        nontext += 1
        i += 1
    return nontext / n


def is_binary(prefix: bytes, path: str) -> bool:
    """Binary-ness of a file from its leading bytes and its path.

    The extension check wins; otherwise a NUL byte or a >30% non-text
    byte ratio marks the file binary.
    """
    if _extension(path) in BINARY_EXTENSIONS:
        return True
    if not prefix:
        return False
    if b"\x00" in prefix:
        return True
    return _nontext_ratio(prefix) > 0.30


def classify_path(path: str, rules: ScanRules = DEFAULT_RULES) -> FileContext:
    """Functional context of a repo-relative path; first rule wins."""
    segments = [s.lower() for s in path.split("/") if s]
    extension = _extension(path)
    if any(s in rules.test_segments for s in segments):
        return FileContext.TEST
    if any(s in rules.doc_segments for s in segments) or extension in rules.doc_extensions:
        return FileContext.DOCUMENTATION
    if any(s in rules.asset_segments for s in segments):
        return FileContext.ASSET
    if extension in rules.code_extensions or any(s in rules.code_segments for s in segments):
        return FileContext.CODE
    return FileContext.OTHER


def _semantic_context(
    backend: SemanticBackend, rel_path: str, listing: list[str]
) -> FileContext | None:
    task = SemanticTask(
        kind=SemanticTaskKind.BINARY_CONTEXT,
        payload={"path": rel_path, "listing": listing},
    )
    verdict = assess(task, backend)
    if verdict.confidence <= 0.0:  # degraded backend reply; keep static label
        return None
    return FileContext(verdict.label)


def scan_tree(
    root: str | Path,
    semantic: SemanticBackend | None = None,
    rules: ScanRules = DEFAULT_RULES,
) -> ScanResult:
    """Scan a repository tree for binary files.

    Deterministic regardless of filesystem traversal order: results are
    sorted by path. Unreadable files are skipped with a warning; an
    unreadable root is fatal. When a semantic backend is supplied its
    context verdict overrides the path rules on disagreement (both
    labels are kept); binary detection itself is always mechanical.
    """
    root = Path(root)
    if not root.is_dir():
        raise ScanError(f"scan root is not a readable directory: {root}")
    found: list[BinaryFile] = []
    warnings: list[str] = []
    for dirpath, dirnames, filenames in os.walk(root, followlinks=False):
        dirnames[:] = sorted(d for d in dirnames if d != ".git")
        for filename in sorted(filenames):
            full = Path(dirpath) / filename
            if full.is_symlink():
                continue
            rel = full.relative_to(root).as_posix()
            try:
                with open(full, "rb") as handle:
                    prefix = handle.read(PREFIX_BYTES)
                size = full.stat().st_size
            except OSError as exc:
                warnings.append(f"unreadable file skipped: {rel} ({exc})")
                continue
            if not is_binary(prefix, rel):
                continue
            static_context = classify_path(rel, rules)
            context = static_context
            semantic_context = None
            if semantic is not None:
                listing = sorted(
                    entry for entry in os.listdir(full.parent)
                    if (full.parent / entry).is_file()
                )
                semantic_context = _semantic_context(semantic, rel, listing)
                if semantic_context is not None:
                    context = semantic_context
            found.append(BinaryFile(
                path=rel,
                context=context,
                size=size,
                static_context=static_context,
                semantic_context=semantic_context,
            ))
    found.sort(key=lambda f: f.path)
    return ScanResult(binary_files=tuple(found), warnings=tuple(warnings))


def payload_metrics(
    root: str | Path,
    semantic: SemanticBackend | None = None,
    rules: ScanRules = DEFAULT_RULES,
) -> dict[MetricId, float]:
    """Raw payload-concealment values for a tree (metric facade)."""
    return scan_tree(root, semantic=semantic, rules=rules).raw_values()
