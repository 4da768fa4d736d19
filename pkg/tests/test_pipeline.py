import pytest

from hsbr.errors import ValidationError
from hsbr.model import Dimension, MetricId, default_weights
from hsbr.pipeline import (
    calibrate_corpus,
    collect_raw_vector,
    evaluate_corpus,
    load_corpus_spec,
    score_evaluated,
)
from hsbr.semantic import MockSemanticBackend
from tests.corpus_builder import build_corpus, build_snapshot, build_tree, repo_id

WEIGHTS = default_weights()


@pytest.fixture(scope="module")
def corpus_path(tmp_path_factory):
    return build_corpus(tmp_path_factory.mktemp("corpus"))


class TestLoadCorpusSpec:
    def test_loads_and_resolves_relative_paths(self, corpus_path):
        spec = load_corpus_spec(corpus_path)
        assert len(spec.repos) == 10
        assert spec.repos[0].repo_id == "demo/r00"
        assert spec.repos[0].fixture_dir.is_dir()
        assert spec.repos[0].tree_path.is_dir()
        assert spec.debian_index.is_file()
        assert spec.package_map.is_file()

    def test_missing_config(self, tmp_path):
        with pytest.raises(ValidationError, match="not found"):
            load_corpus_spec(tmp_path / "nope.json")

    def test_missing_fixture_dir_rejected(self, tmp_path):
        config = tmp_path / "corpus.json"
        config.write_text('{"repos": [{"repo_id": "a/b", "fixture": "gone"}]}')
        with pytest.raises(ValidationError, match="gone"):
            load_corpus_spec(config)

    def test_duplicate_repo_ids_rejected(self, tmp_path, corpus_path):
        spec_dir = corpus_path.parent
        config = tmp_path / "corpus.json"
        fixture = (spec_dir / "fixtures" / "r00").as_posix()
        config.write_text(
            '{"repos": [{"repo_id": "a/b", "fixture": "%s"},'
            ' {"repo_id": "a/b", "fixture": "%s"}]}' % (fixture, fixture))
        with pytest.raises(ValidationError, match="duplicate"):
            load_corpus_spec(config)

    def test_empty_repo_list_rejected(self, tmp_path):
        config = tmp_path / "corpus.json"
        config.write_text('{"repos": []}')
        with pytest.raises(ValidationError, match="no repos"):
            load_corpus_spec(config)


class TestCollectRawVector:
    def test_covers_every_leaf_metric(self, tmp_path):
        from hsbr.model import LEAF_METRICS
        snapshot = build_snapshot(9)
        tree = build_tree(tmp_path, 9)
        evaluated = collect_raw_vector(snapshot, tree_path=tree)
        assert set(evaluated.vector.raw) == set(LEAF_METRICS)

    def test_without_debian_inputs_notes_and_zeroes(self):
        evaluated = collect_raw_vector(build_snapshot(0))
        assert evaluated.vector.raw[MetricId.D3] == 0.0
        assert any("dependency" in n for n in evaluated.notes)
        assert any("file tree" in n for n in evaluated.notes)

    def test_ci_values_from_snapshot(self, tmp_path):
        evaluated = collect_raw_vector(build_snapshot(9),
                                       tree_path=build_tree(tmp_path, 9))
        assert evaluated.vector.raw[MetricId.C1] == 1.0  # dependabot absent
        assert evaluated.vector.raw[MetricId.C3] == 1.0  # all uses unpinned

    def test_payload_values_from_tree(self, tmp_path):
        evaluated = collect_raw_vector(build_snapshot(9),
                                       tree_path=build_tree(tmp_path, 9))
        assert evaluated.vector.raw[MetricId.P1] == 1.0
        assert evaluated.vector.raw[MetricId.P6] == 12 + 5 + 3


class TestEvaluateCorpus:
    def test_all_repos_evaluated_in_order(self, corpus_path):
        spec = load_corpus_spec(corpus_path)
        evaluated = evaluate_corpus(spec)
        assert [e.repo_id for e in evaluated] == [repo_id(i) for i in range(10)]

    def test_debian_metrics_flow_through(self, corpus_path):
        spec = load_corpus_spec(corpus_path)
        evaluated = evaluate_corpus(spec)
        by_id = {e.repo_id: e for e in evaluated}
        assert by_id["demo/r09"].vector.raw[MetricId.D3] == 16.0
        assert by_id["demo/r09"].vector.raw[MetricId.D4] == 8.0
        assert by_id["demo/r00"].vector.raw[MetricId.D3] == 0.0

    def test_deterministic_with_parallel_workers(self, corpus_path):
        spec = load_corpus_spec(corpus_path)
        serial = evaluate_corpus(spec, max_workers=1)
        parallel = evaluate_corpus(spec, max_workers=8)
        assert [e.vector.raw for e in serial] == [e.vector.raw for e in parallel]

    def test_semantic_backend_changes_only_semantic_metrics(self, corpus_path):
        from hsbr.model import SEMANTIC_METRICS
        spec = load_corpus_spec(corpus_path)
        off = evaluate_corpus(spec)
        on = evaluate_corpus(spec, semantic=MockSemanticBackend())
        for repo_off, repo_on in zip(off, on):
            for metric, value in repo_off.vector.raw.items():
                if metric in SEMANTIC_METRICS:
                    continue
                assert repo_on.vector.raw[metric] == value, metric
        # and the risky repos actually differ on the semantic ratio
        by_id = {e.repo_id: e for e in on}
        assert by_id["demo/r09"].vector.raw[MetricId.INCONSISTENT_PR_RATIO] > 0


class TestScoreCorpus:
    def test_end_to_end_scores(self, corpus_path):
        spec = load_corpus_spec(corpus_path)
        stats, evaluated = calibrate_corpus(spec, semantic=MockSemanticBackend())
        reports = score_evaluated(evaluated, stats, WEIGHTS)
        assert len(reports) == 10
        by_id = {r.repo_id: r for r in reports}
        risky = by_id["demo/r09"]
        clean = by_id["demo/r00"]
        assert risky.total > clean.total
        assert risky.vector.normalized[MetricId.P1] == 1.0
        assert risky.vector.normalized[MetricId.D3] == 1.0
        assert risky.vector.normalized[MetricId.D4] == 1.0
        for report in reports:
            assert set(report.dimension_scores) == set(Dimension)
            for value in report.vector.normalized.values():
                assert 0.0 <= value <= 1.0
