import pytest

from hsbr.ci import (
    DEFAULT_TRUSTED_PROVIDERS,
    ci_raw_metrics,
    parse_workflows,
)
from hsbr.forge import RepositorySnapshot, WorkflowFile

FULL_SHA = "a" * 40

BASIC_WORKFLOW = """\
name: ci
on: [push]
jobs:
  build:
    runs-on: ubuntu-latest
    steps:
      - uses: actions/checkout@v4
      - name: local step
        uses: ./local/action
      - uses: docker://alpine:3.18
      - uses: randomorg/tool@{sha}
  reuse:
    uses: octo/shared/.github/workflows/release.yml@main
""".format(sha=FULL_SHA)


def snapshot(workflows=(), dependabot=False) -> RepositorySnapshot:
    return RepositorySnapshot(
        repo_id="org/demo",
        workflow_files=tuple(WorkflowFile(path=p, text=t) for p, t in workflows),
        dependabot_config_present=dependabot,
        fetched_at="2024-01-01T00:00:00Z",
    )


class TestParseWorkflows:
    def test_standard_reference(self):
        uses, warnings = parse_workflows([("wf.yml", "jobs:\n  b:\n    steps:\n      - uses: actions/checkout@v4\n")])
        assert warnings == []
        (use,) = uses
        assert (use.provider, use.name, use.ref) == ("actions", "checkout", "v4")
        assert not use.is_local and not use.is_docker
        assert not use.is_pinned

    def test_local_path_form(self):
        uses, _ = parse_workflows([("wf.yml", "jobs:\n  b:\n    steps:\n      - uses: ./local/action\n")])
        (use,) = uses
        assert use.is_local is True
        assert use.provider == ""
        assert use.ref == ""

    def test_docker_forms(self):
        text = ("jobs:\n  b:\n    steps:\n"
                "      - uses: docker://alpine:3.18\n"
                "      - uses: docker://img@sha256:deadbeef\n")
        uses, _ = parse_workflows([("wf.yml", text)])
        tag, digest = uses
        assert tag.is_docker and tag.provider == "" and not tag.is_pinned
        assert digest.is_pinned

    def test_job_level_reusable_workflow_included(self):
        text = "jobs:\n  call:\n    uses: octo/shared/.github/workflows/x.yml@main\n"
        uses, _ = parse_workflows([("wf.yml", text)])
        (use,) = uses
        assert use.provider == "octo"
        assert use.ref == "main"

    def test_empty_file_list(self):
        assert parse_workflows([]) == ([], [])

    def test_malformed_yaml_warns_and_contributes_nothing(self):
        uses, warnings = parse_workflows([("bad.yml", "jobs: [unclosed\n")])
        assert uses == []
        assert warnings and "bad.yml" in warnings[0]

    def test_non_mapping_document_ignored(self):
        uses, warnings = parse_workflows([("odd.yml", "- just\n- a\n- list\n")])
        assert uses == [] and warnings == []

    def test_full_sha_detected_as_pinned(self):
        text = f"jobs:\n  b:\n    steps:\n      - uses: a/b@{FULL_SHA}\n"
        uses, _ = parse_workflows([("wf.yml", text)])
        assert uses[0].is_pinned

    def test_uppercase_sha_not_pinned(self):
        text = f"jobs:\n  b:\n    steps:\n      - uses: a/b@{'A' * 40}\n"
        uses, _ = parse_workflows([("wf.yml", text)])
        assert not uses[0].is_pinned

    def test_provider_empty_iff_local_or_docker(self):
        uses, _ = parse_workflows([("wf.yml", BASIC_WORKFLOW)])
        for use in uses:
            assert (use.provider == "") == (use.is_local or use.is_docker)


class TestCiRawMetrics:
    def test_mixed_fixture_half_half(self):
        text = ("jobs:\n  b:\n    steps:\n"
                "      - uses: actions/checkout@v4\n"
                f"      - uses: randomorg/tool@{FULL_SHA}\n")
        values = ci_raw_metrics(snapshot([("wf.yml", text)]))
        assert values.dangerous_provider_ratio == pytest.approx(0.5)
        assert values.dangerous_pin_ratio == pytest.approx(0.5)

    def test_empty_ci(self):
        values = ci_raw_metrics(snapshot())
        assert values.dependabot_disabled is True
        assert values.dangerous_provider_ratio == 0.0
        assert values.dangerous_pin_ratio == 0.0
        assert values.action_uses == ()

    def test_fully_pinned_trusted(self):
        text = ("jobs:\n  b:\n    steps:\n"
                f"      - uses: actions/checkout@{FULL_SHA}\n"
                f"      - uses: github/codeql-action/init@{FULL_SHA}\n")
        values = ci_raw_metrics(snapshot([("wf.yml", text)], dependabot=True))
        assert values.dependabot_disabled is False
        assert values.dangerous_provider_ratio == 0.0
        assert values.dangerous_pin_ratio == 0.0

    def test_local_uses_excluded_from_denominators(self):
        text = ("jobs:\n  b:\n    steps:\n"
                "      - uses: ./tools/build\n"
                "      - uses: actions/checkout@v4\n")
        values = ci_raw_metrics(snapshot([("wf.yml", text)]))
        # one counted use: trusted but unpinned
        assert values.dangerous_provider_ratio == 0.0
        assert values.dangerous_pin_ratio == 1.0

    def test_docker_counts_untrusted_and_unpinned_unless_digest(self):
        text = ("jobs:\n  b:\n    steps:\n"
                "      - uses: docker://alpine:3.18\n"
                "      - uses: docker://img@sha256:abc123\n")
        values = ci_raw_metrics(snapshot([("wf.yml", text)]))
        assert values.dangerous_provider_ratio == 1.0
        assert values.dangerous_pin_ratio == pytest.approx(0.5)

    def test_custom_allowlist(self):
        text = "jobs:\n  b:\n    steps:\n      - uses: myorg/thing@v1\n"
        values = ci_raw_metrics(snapshot([("wf.yml", text)]),
                                trusted_providers=frozenset({"myorg"}))
        assert values.dangerous_provider_ratio == 0.0

    def test_adding_unpinned_thirdparty_never_decreases_ratios(self):
        base = ("jobs:\n  b:\n    steps:\n"
                f"      - uses: actions/checkout@{FULL_SHA}\n")
        extended = base + "      - uses: stranger/tool@main\n"
        before = ci_raw_metrics(snapshot([("wf.yml", base)]))
        after = ci_raw_metrics(snapshot([("wf.yml", extended)]))
        assert after.dangerous_provider_ratio >= before.dangerous_provider_ratio
        assert after.dangerous_pin_ratio >= before.dangerous_pin_ratio

    def test_ratios_invariant_under_file_ordering(self):
        a = ("a.yml", "jobs:\n  x:\n    steps:\n      - uses: actions/checkout@v4\n")
        b = ("b.yml", f"jobs:\n  y:\n    steps:\n      - uses: other/t@{FULL_SHA}\n")
        forward = ci_raw_metrics(snapshot([a, b]))
        backward = ci_raw_metrics(snapshot([b, a]))
        assert forward.dangerous_provider_ratio == backward.dangerous_provider_ratio
        assert forward.dangerous_pin_ratio == backward.dangerous_pin_ratio

    def test_dependabot_present_means_raw_risk_zero(self):
        values = ci_raw_metrics(snapshot(dependabot=True))
        assert values.dependabot_disabled is False

    def test_malformed_workflow_recorded(self):
        values = ci_raw_metrics(snapshot([("bad.yml", ":\n  -:")]))
        assert values.warnings
