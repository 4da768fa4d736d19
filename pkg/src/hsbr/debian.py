"""Debian package index parsing and dependency-impact analysis.

Parses ``Packages`` index files (plain or gzip), builds the dependency
graph over binary packages, and computes the four dependency-impact raw
counts: how many high-priority / essential packages a repository builds
and how many such packages transitively depend on it.
"""

from __future__ import annotations

import gzip
from dataclasses import dataclass, field
from pathlib import Path

from hsbr.errors import PackagesParseError, ValidationError

#: Priorities the impact metrics treat as high ("functional backbone").
HIGH_PRIORITIES = frozenset({"required", "important", "standard"})

KNOWN_PRIORITIES = frozenset(
    {"required", "important", "standard", "optional", "extra", "unknown"}
)


@dataclass(frozen=True)
class PackageRecord:
    """One binary package stanza from a Packages index.

    ``depends`` holds dependency clauses: each clause is a tuple of
    alternative package names (``a | b`` becomes ``("a", "b")``), with
    version constraints and architecture qualifiers stripped.
    """

    name: str
    priority: str = "unknown"
    essential: bool = False
    depends: tuple[tuple[str, ...], ...] = ()
    pre_depends: tuple[tuple[str, ...], ...] = ()
    source: str | None = None

    def __post_init__(self):
        if not self.name:
            raise ValidationError("package record must have a name")
        if self.priority not in KNOWN_PRIORITIES:
            raise ValidationError(f"unknown priority {self.priority!r} for {self.name}")
        for clause in self.depends + self.pre_depends:
            if not clause or any(not alt for alt in clause):
                raise ValidationError(f"empty dependency alternative in {self.name}")


@dataclass(frozen=True)
class DependencyGraph:
    """Directed dependency graph: an edge A -> B means "A depends on B".

    Unknown dependency targets are materialized as stub nodes with
    priority ``unknown`` so every edge endpoint resolves. ``reverse``
    is the exact transpose of ``forward``.
    """

    nodes: dict[str, PackageRecord]
    forward: dict[str, frozenset[str]]
    reverse: dict[str, frozenset[str]]


@dataclass(frozen=True)
class RepoPackageMapping:
    """Binary packages built from one repository's source."""

    repo_id: str
    built_packages: tuple[str, ...] = ()


@dataclass(frozen=True)
class DependencyImpact:
    """Raw dependency-impact counts for one repository."""

    self_priority: int  # built packages with high priority
    self_essential: int  # built packages marked essential
    dependents_priority: int  # high-priority packages in the reverse closure
    dependents_essential: int  # essential packages in the reverse closure
    warnings: tuple[str, ...] = ()


def _strip_dependency_name(token: str) -> str:
    # Drop version constraint "(>= 1.0)" and architecture qualifier ":any".
    name = token.split("(", 1)[0].strip()
    name = name.split(":", 1)[0].strip()
    # Build-profile / arch restrictions like "[amd64]" or "<!nocheck>".
    name = name.split("[", 1)[0].strip()
    name = name.split("<", 1)[0].strip()
    return name


def _parse_relations(value: str, pkg: str, lineno: int) -> tuple[tuple[str, ...], ...]:
    clauses = []
    for chunk in value.split(","):
        chunk = chunk.strip()
        if not chunk:
            if value.strip():
                raise PackagesParseError(
                    f"package {pkg!r}, line {lineno}: empty dependency clause"
                )
            continue
        alternatives = []
        for alt in chunk.split("|"):
            name = _strip_dependency_name(alt)
            if not name:
                raise PackagesParseError(
                    f"package {pkg!r}, line {lineno}: empty alternative in {chunk!r}"
                )
            alternatives.append(name)
        clauses.append(tuple(alternatives))
    return tuple(clauses)


def _finish_stanza(fields: dict[str, tuple[str, int]]) -> PackageRecord | None:
    if "Package" not in fields:
        return None
    name = fields["Package"][0]
    priority = fields.get("Priority", ("unknown", 0))[0].lower()
    if priority not in KNOWN_PRIORITIES:
        priority = "unknown"
    essential = fields.get("Essential", ("no", 0))[0].lower() == "yes"
    depends = ()
    if "Depends" in fields:
        value, lineno = fields["Depends"]
        depends = _parse_relations(value, name, lineno)
    pre_depends = ()
    if "Pre-Depends" in fields:
        value, lineno = fields["Pre-Depends"]
        pre_depends = _parse_relations(value, name, lineno)
    source = None
    if "Source" in fields:
        # "Source: src (1.2-3)" carries the source version; keep the name.
        source = fields["Source"][0].split("(", 1)[0].strip() or None
    return PackageRecord(
        name=name,
        priority=priority,
        essential=essential,
        depends=depends,
        pre_depends=pre_depends,
        source=source,
    )


def parse_packages_index(text: str) -> list[PackageRecord]:
    """Parse a Debian-style Packages index into records.

    Stanzas are separated by blank lines; continuation lines start with
    whitespace. Stanzas without a ``Package`` field are skipped. Empty
    input yields an empty list.
    """
    records: list[PackageRecord] = []
    fields: dict[str, tuple[str, int]] = {}
    current_key: str | None = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            record = _finish_stanza(fields)
            if record is not None:
                records.append(record)
            fields = {}
            current_key = None
            continue
        if line[0] in " \t":
            if current_key is None:
                raise PackagesParseError(f"line {lineno}: continuation without a field")
            value, first_line = fields[current_key]
            fields[current_key] = (value + " " + line.strip(), first_line)
            continue
        if ":" not in line:
            raise PackagesParseError(f"line {lineno}: expected 'Field: value'")
        key, _, value = line.partition(":")
        current_key = key.strip()
        fields[current_key] = (value.strip(), lineno)
    record = _finish_stanza(fields)
    if record is not None:
        records.append(record)
    return records


def format_package_record(record: PackageRecord) -> str:
    """Render a record back into stanza text (supported fields only)."""
    lines = [f"Package: {record.name}"]
    if record.priority != "unknown":
        lines.append(f"Priority: {record.priority}")
    if record.essential:
        lines.append("Essential: yes")
    if record.source:
        lines.append(f"Source: {record.source}")
    for field_name, clauses in (("Depends", record.depends),
                                ("Pre-Depends", record.pre_depends)):
        if clauses:
            rendered = ", ".join(" | ".join(clause) for clause in clauses)
            lines.append(f"{field_name}: {rendered}")
    return "\n".join(lines) + "\n"


def dump_packages_index(records: list[PackageRecord]) -> str:
    return "\n".join(format_package_record(r) for r in records)


def load_packages_index(path: str | Path) -> list[PackageRecord]:
    """Read a Packages index file; ``.gz`` files are decompressed."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"packages index not found: {path}")
    if path.suffix == ".gz":
        text = gzip.decompress(path.read_bytes()).decode("utf-8")
    else:
        text = path.read_text(encoding="utf-8")
    return parse_packages_index(text)


def build_graph(records: list[PackageRecord]) -> DependencyGraph:
    """Build forward and reverse dependency indexes.

    Duplicate names keep the last record. Every alternative in a clause
    becomes an edge (reachability over-approximation); dangling targets
    become stub nodes.
    """
    nodes: dict[str, PackageRecord] = {}
    for record in records:
        nodes[record.name] = record
    forward: dict[str, set[str]] = {name: set() for name in nodes}
    for record in list(nodes.values()):
        for clause in record.depends + record.pre_depends:
            for target in clause:
                forward[record.name].add(target)
                if target not in nodes:
                    nodes[target] = PackageRecord(name=target)
                    forward.setdefault(target, set())
    reverse: dict[str, set[str]] = {name: set() for name in nodes}
    for source, targets in forward.items():
        for target in targets:
            reverse[target].add(source)
    return DependencyGraph(
        nodes=nodes,
        forward={n: frozenset(t) for n, t in forward.items()},
        reverse={n: frozenset(t) for n, t in reverse.items()},
    )


def reverse_closure(graph: DependencyGraph, pkg: str) -> set[str]:
    """All packages that transitively depend on ``pkg`` (excluding it).

    Terminates on cyclic graphs; raises ValidationError for unknown
    package names.
    """
    if pkg not in graph.nodes:
        raise ValidationError(f"unknown package: {pkg}")
    seen: set[str] = set()
    stack = list(graph.reverse.get(pkg, ()))
    while stack:
        current = stack.pop()
        if current in seen:
            continue
        seen.add(current)
        stack.extend(graph.reverse.get(current, ()))
    seen.discard(pkg)
    return seen


def dependency_impact_metrics(
    graph: DependencyGraph, mapping: RepoPackageMapping
) -> DependencyImpact:
    """Compute the four raw dependency-impact counts for one repository.

    Built packages missing from the graph are skipped with a warning.
    Dependents are counted once even when reachable through several
    built packages, and the built packages themselves are excluded.
    """
    warnings: list[str] = []
    built: list[str] = []
    for name in mapping.built_packages:
        if name in graph.nodes:
            built.append(name)
        else:
            warnings.append(f"built package {name!r} not in the package index; skipped")
    self_priority = sum(
        1 for name in built if graph.nodes[name].priority in HIGH_PRIORITIES
    )
    self_essential = sum(1 for name in built if graph.nodes[name].essential)
    dependents: set[str] = set()
    for name in built:
        dependents |= reverse_closure(graph, name)
    dependents -= set(built)
    dependents_priority = sum(
        1 for name in dependents if graph.nodes[name].priority in HIGH_PRIORITIES
    )
    dependents_essential = sum(1 for name in dependents if graph.nodes[name].essential)
    return DependencyImpact(
        self_priority=self_priority,
        self_essential=self_essential,
        dependents_priority=dependents_priority,
        dependents_essential=dependents_essential,
        warnings=tuple(warnings),
    )


def parse_package_map(text: str) -> dict[str, RepoPackageMapping]:
    """Parse a mapping file: ``repo_id<TAB>pkg1,pkg2,...`` per line."""
    mappings: dict[str, RepoPackageMapping] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0]
        if not line.strip():
            continue
        if "\t" not in line:
            raise ValidationError(
                f"package map line {lineno}: expected 'repo_id<TAB>pkg1,pkg2,...'"
            )
        repo_id, _, pkgs = line.partition("\t")
        repo_id = repo_id.strip()
        if not repo_id:
            raise ValidationError(f"package map line {lineno}: empty repo id")
        names = tuple(p.strip() for p in pkgs.split(",") if p.strip())
        mappings[repo_id] = RepoPackageMapping(repo_id=repo_id, built_packages=names)
    return mappings


def load_package_map(path: str | Path) -> dict[str, RepoPackageMapping]:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"package map not found: {path}")
    return parse_package_map(path.read_text(encoding="utf-8"))
