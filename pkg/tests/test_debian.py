import gzip
import random

import pytest

from hsbr.debian import (
    DependencyGraph,
    PackageRecord,
    RepoPackageMapping,
    build_graph,
    dependency_impact_metrics,
    dump_packages_index,
    format_package_record,
    load_packages_index,
    parse_package_map,
    parse_packages_index,
    reverse_closure,
)
from hsbr.errors import PackagesParseError, ValidationError


def oracle_reverse_closure(edges: set[tuple[str, str]], pkg: str) -> set[str]:
    """Fixpoint reachability: grow the dependent set until stable."""
    result: set[str] = set()
    changed = True
    while changed:
        changed = False
        for a, b in edges:
            if (b == pkg or b in result) and a != pkg and a not in result:
                result.add(a)
                changed = True
    return result


class TestParsePackagesIndex:
    def test_full_stanza(self):
        text = "Package: a\nPriority: required\nEssential: yes\nDepends: b (>= 1.0), c | d\n"
        records = parse_packages_index(text)
        assert records == [
            PackageRecord(name="a", priority="required", essential=True,
                          depends=(("b",), ("c", "d")))
        ]

    def test_all_defaults(self):
        records = parse_packages_index("Package: z\n")
        assert records == [PackageRecord(name="z")]
        assert records[0].priority == "unknown"
        assert records[0].essential is False
        assert records[0].depends == ()

    def test_empty_input(self):
        assert parse_packages_index("") == []

    def test_multiple_stanzas_and_blank_lines(self):
        text = "Package: a\n\n\nPackage: b\nPre-Depends: a\n\n"
        records = parse_packages_index(text)
        assert [r.name for r in records] == ["a", "b"]
        assert records[1].pre_depends == (("a",),)

    def test_architecture_qualifier_stripped(self):
        records = parse_packages_index("Package: a\nDepends: b:any, c:amd64 (<< 2)\n")
        assert records[0].depends == (("b",), ("c",))

    def test_source_field_keeps_name_only(self):
        records = parse_packages_index("Package: a\nSource: upstream (1.2-3)\n")
        assert records[0].source == "upstream"

    def test_continuation_lines(self):
        text = "Package: a\nDepends: b,\n c | d\n"
        records = parse_packages_index(text)
        assert records[0].depends == (("b",), ("c", "d"))

    def test_stanza_without_package_field_skipped(self):
        assert parse_packages_index("Priority: required\n\nPackage: a\n") == [
            PackageRecord(name="a")
        ]

    def test_bad_depends_reports_stanza_and_line(self):
        with pytest.raises(PackagesParseError, match="'a'.*line 2"):
            parse_packages_index("Package: a\nDepends: b | , c\n")

    def test_unparseable_clause(self):
        with pytest.raises(PackagesParseError):
            parse_packages_index("Package: a\nDepends: ,,\n")

    def test_essential_anything_but_yes_is_false(self):
        records = parse_packages_index("Package: a\nEssential: no\n\nPackage: b\nEssential: maybe\n")
        assert [r.essential for r in records] == [False, False]


class TestRoundTrip:
    def test_parse_dump_parse_is_fixed_point(self):
        text = (
            "Package: a\nPriority: required\nEssential: yes\n"
            "Source: upstream\nDepends: b, c | d\nPre-Depends: e\n\n"
            "Package: b\nPriority: optional\n"
        )
        once = parse_packages_index(text)
        again = parse_packages_index(dump_packages_index(once))
        assert again == once

    def test_dump_is_stable(self):
        records = parse_packages_index("Package: a\nDepends: b | c\n")
        dumped = dump_packages_index(records)
        assert dump_packages_index(parse_packages_index(dumped)) == dumped

    def test_gzip_load(self, tmp_path):
        raw = dump_packages_index([PackageRecord(name="a", depends=(("b",),))])
        path = tmp_path / "Packages.gz"
        path.write_bytes(gzip.compress(raw.encode()))
        assert load_packages_index(path)[0].name == "a"


class TestBuildGraph:
    def test_stub_materialization(self):
        graph = build_graph(parse_packages_index("Package: a\nDepends: b\n"))
        assert graph.nodes["b"].priority == "unknown"
        assert graph.nodes["b"].essential is False
        assert graph.forward["a"] == {"b"}
        assert graph.reverse["b"] == {"a"}

    def test_cycles_are_legal(self):
        graph = build_graph(parse_packages_index(
            "Package: a\nDepends: b\n\nPackage: b\nDepends: a\n"))
        assert graph.forward["a"] == {"b"}
        assert graph.forward["b"] == {"a"}

    def test_reverse_is_transpose_of_forward(self):
        text = "Package: a\nDepends: b\n\nPackage: b\nDepends: c\n"
        graph = build_graph(parse_packages_index(text))
        assert graph.reverse == {"a": frozenset(), "b": frozenset({"a"}),
                                 "c": frozenset({"b"})}

    def test_duplicate_names_last_wins(self):
        text = "Package: a\nPriority: optional\n\nPackage: a\nPriority: required\n"
        graph = build_graph(parse_packages_index(text))
        assert graph.nodes["a"].priority == "required"

    def test_alternatives_all_become_edges(self):
        graph = build_graph(parse_packages_index("Package: a\nDepends: b | c\n"))
        assert graph.forward["a"] == {"b", "c"}


class TestReverseClosure:
    def test_chain(self):
        graph = build_graph(parse_packages_index(
            "Package: a\nDepends: b\n\nPackage: b\nDepends: c\n\nPackage: c\n"))
        assert reverse_closure(graph, "c") == {"a", "b"}

    def test_isolated_node(self):
        graph = build_graph([PackageRecord(name="z")])
        assert reverse_closure(graph, "z") == set()

    def test_two_cycle_excludes_self(self):
        graph = build_graph(parse_packages_index(
            "Package: a\nDepends: b\n\nPackage: b\nDepends: a\n"))
        assert reverse_closure(graph, "a") == {"b"}

    def test_unknown_package(self):
        graph = build_graph([PackageRecord(name="a")])
        with pytest.raises(ValidationError, match="nope"):
            reverse_closure(graph, "nope")

    def test_matches_bruteforce_oracle_on_random_graphs(self):
        for seed in range(100):
            rng = random.Random(seed)
            n = rng.randint(2, 50)
            names = [f"p{i}" for i in range(n)]
            edges = set()
            for _ in range(rng.randint(0, 200)):
                a, b = rng.choice(names), rng.choice(names)
                if a != b:
                    edges.add((a, b))
            records = []
            for name in names:
                targets = sorted(b for a, b in edges if a == name)
                clauses = tuple((t,) for t in targets)
                records.append(PackageRecord(name=name, depends=clauses))
            graph = build_graph(records)
            probe = rng.choice(names)
            assert reverse_closure(graph, probe) == oracle_reverse_closure(edges, probe), (
                f"seed={seed} pkg={probe}"
            )


TEN_NODE_INDEX = """\
Package: liblz
Priority: optional

Package: xzutil
Priority: standard
Depends: liblz

Package: sshd
Priority: required
Essential: yes
Depends: liblz

Package: initd
Priority: required
Essential: yes
Depends: sshd

Package: tool
Priority: optional
Depends: liblz

Package: editor
Priority: optional
Depends: tool

Package: fileutils
Priority: required
Essential: yes

Package: netlib
Priority: important
Depends: xzutil

Package: shell
Priority: standard
Depends: netlib | liblz

Package: gamez
Priority: extra
Depends: editor
"""


class TestDependencyImpact:
    @pytest.fixture()
    def graph(self):
        return build_graph(parse_packages_index(TEN_NODE_INDEX))

    def test_crafted_ten_node_fixture(self, graph):
        # Reverse closure of {liblz, xzutil} minus built:
        #   sshd(req,ess), initd(req,ess), netlib(imp), shell(std),
        #   tool(opt), editor(opt), gamez(extra)
        impact = dependency_impact_metrics(
            graph, RepoPackageMapping("org/xz", ("liblz", "xzutil")))
        assert (impact.self_priority, impact.self_essential) == (1, 0)
        assert impact.dependents_priority == 4
        assert impact.dependents_essential == 2
        assert impact.warnings == ()

    def test_empty_mapping(self, graph):
        impact = dependency_impact_metrics(graph, RepoPackageMapping("org/none"))
        assert (impact.self_priority, impact.self_essential,
                impact.dependents_priority, impact.dependents_essential) == (0, 0, 0, 0)

    def test_self_only_exposure(self, graph):
        impact = dependency_impact_metrics(
            graph, RepoPackageMapping("org/fileutils", ("fileutils",)))
        assert (impact.self_priority, impact.self_essential,
                impact.dependents_priority, impact.dependents_essential) == (1, 1, 0, 0)

    def test_unknown_built_package_warns_not_fatal(self, graph):
        impact = dependency_impact_metrics(
            graph, RepoPackageMapping("org/x", ("liblz", "ghost")))
        assert impact.warnings and "ghost" in impact.warnings[0]
        assert impact.dependents_essential == 2

    def test_dependents_counted_once_across_built_packages(self, graph):
        # netlib reaches the repo via xzutil only; shell via both paths.
        impact = dependency_impact_metrics(
            graph, RepoPackageMapping("org/xz", ("liblz", "xzutil")))
        assert impact.dependents_priority == 4  # shell not double counted

    def test_self_priority_at_least_self_essential_on_realistic_data(self):
        # Essential packages are required-priority in realistic indexes.
        for seed in range(50):
            rng = random.Random(1000 + seed)
            records = []
            for i in range(rng.randint(1, 20)):
                essential = rng.random() < 0.3
                priority = "required" if essential else rng.choice(
                    ["required", "important", "standard", "optional", "extra"])
                records.append(PackageRecord(
                    name=f"p{i}", priority=priority, essential=essential))
            graph = build_graph(records)
            built = tuple(r.name for r in records if rng.random() < 0.5)
            impact = dependency_impact_metrics(
                graph, RepoPackageMapping("r", built))
            assert impact.self_priority >= impact.self_essential

    def test_closure_monotone_under_edge_addition(self):
        for seed in range(30):
            rng = random.Random(2000 + seed)
            names = [f"p{i}" for i in range(10)]
            edges = set()
            for _ in range(rng.randint(0, 25)):
                a, b = rng.sample(names, 2)
                edges.add((a, b))

            def impact_for(edge_set):
                records = []
                for name in names:
                    targets = sorted(b for a, b in edge_set if a == name)
                    records.append(PackageRecord(
                        name=name,
                        priority="required" if name in ("p0", "p1") else "optional",
                        essential=name == "p0",
                        depends=tuple((t,) for t in targets)))
                graph = build_graph(records)
                return dependency_impact_metrics(
                    graph, RepoPackageMapping("r", ("p5",)))

            before = impact_for(edges)
            a, b = rng.sample(names, 2)
            after = impact_for(edges | {(a, b)})
            assert after.dependents_priority >= before.dependents_priority
            assert after.dependents_essential >= before.dependents_essential


class TestPackageMap:
    def test_parse_lines(self):
        mapping = parse_package_map("org/xz\tliblz,xzutil\norg/empty\t\n")
        assert mapping["org/xz"].built_packages == ("liblz", "xzutil")
        assert mapping["org/empty"].built_packages == ()

    def test_missing_tab_rejected(self):
        with pytest.raises(ValidationError, match="line 1"):
            parse_package_map("org/xz liblz\n")

    def test_comments_ignored(self):
        mapping = parse_package_map("# repos\norg/a\tx\n")
        assert set(mapping) == {"org/a"}
