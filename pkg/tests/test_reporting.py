import json

import pytest

from hsbr.model import (
    Dimension,
    Histogram,
    HSBRReport,
    MetricId,
    RiskLevel,
    RiskVector,
    default_weights,
)
from hsbr.pipeline import calibrate_corpus, load_corpus_spec, score_evaluated
from hsbr.reporting import (
    CSV_HEADER,
    Provenance,
    corpus_summary_payload,
    csv_row,
    emit_csv,
    emit_report,
    report_payload,
)
from hsbr.errors import ValidationError
from tests.corpus_builder import build_corpus

PROV = Provenance(fetched_at="2024-06-01T00:00:00Z", calibration_id="abc123def456",
                  semantic_backend="mock")


@pytest.fixture(scope="module")
def reports(tmp_path_factory):
    corpus = build_corpus(tmp_path_factory.mktemp("corpus"))
    spec = load_corpus_spec(corpus)
    stats, evaluated = calibrate_corpus(spec)
    return score_evaluated(evaluated, stats, default_weights())


class TestJsonReport:
    def test_payload_structure(self, reports):
        payload = report_payload(reports[0], PROV)
        assert payload["schema_version"] == 1
        assert payload["repo_id"] == "demo/r00"
        assert set(payload["dimension_scores"]) == {"DI", "PC", "CQ", "CI"}
        assert len(payload["metrics"]) == 31
        assert payload["provenance"]["calibration_id"] == "abc123def456"

    def test_validates_against_documented_schema(self, reports):
        import jsonschema
        from pathlib import Path
        schema = json.loads(
            (Path(__file__).parent.parent / "docs" / "report_schema.json")
            .read_text(encoding="utf-8"))
        for report in reports:
            jsonschema.validate(report_payload(report, PROV), schema)

    def test_parse_emit_fixed_point(self, reports):
        emitted = emit_report(reports[3], "json", PROV)
        parsed = json.loads(emitted)
        re_emitted = (json.dumps(parsed, sort_keys=True, indent=2,
                                 ensure_ascii=False) + "\n").encode("utf-8")
        assert re_emitted == emitted

    def test_histograms_serialized_as_string_keyed_maps(self, reports):
        payload = report_payload(reports[9], PROV)
        hist = payload["raw"]["prs-to-maintainer"]
        assert isinstance(hist, dict)
        assert all(isinstance(k, str) and isinstance(v, int)
                   for k, v in hist.items())


class TestMarkdownReport:
    def test_contains_summary_and_snippets_in_order(self, reports):
        risky = next(r for r in reports if r.repo_id == "demo/r09")
        text = emit_report(risky, "markdown", PROV).decode("utf-8")
        assert text.startswith("# Risk report: demo/r09")
        assert risky.risk_level.value in text
        positions = [text.find(s) for s in risky.explanations]
        assert all(p >= 0 for p in positions)
        assert positions == sorted(positions)

    def test_two_explanations_both_present(self):
        report = HSBRReport(
            repo_id="r",
            dimension_scores={d: 0.5 for d in Dimension},
            total=0.5, risk_level=RiskLevel.MEDIUM,
            explanations=("first snippet", "second snippet"),
            vector=RiskVector(raw={}, normalized={}),
        )
        text = emit_report(report, "markdown", PROV).decode("utf-8")
        assert "first snippet" in text and "second snippet" in text


class TestCsv:
    def test_header_has_40_columns(self):
        assert len(CSV_HEADER) == 40

    def test_row_matches_header_width(self, reports):
        for report in reports:
            assert len(csv_row(report, PROV)) == len(CSV_HEADER)

    def test_emit_csv_one_row_per_repo(self, reports):
        text = emit_csv(reports, [PROV] * len(reports))
        lines = text.strip().split("\n")
        assert len(lines) == 1 + len(reports)
        assert lines[0] == ",".join(CSV_HEADER)

    def test_csv_row_format(self, reports):
        emitted = emit_report(reports[0], "csv-row", PROV).decode("utf-8")
        header, row = emitted.strip().split("\n")
        assert header == ",".join(CSV_HEADER)
        cells = row.split(",")
        assert cells[0] == "demo/r00"
        assert cells[1] == "1"
        # numeric cells parse back
        for cell in cells[3:4] + cells[5:9]:
            float(cell)

    def test_unknown_format_rejected(self, reports):
        with pytest.raises(ValidationError, match="unknown report format"):
            emit_report(reports[0], "yaml", PROV)


class TestCorpusSummary:
    def test_sorted_by_repo_with_provenance(self, reports):
        payload = corpus_summary_payload(reports, "cal123", "mock")
        ids = [r["repo_id"] for r in payload["repositories"]]
        assert ids == sorted(ids)
        assert payload["calibration_id"] == "cal123"
        assert payload["semantic_backend"] == "mock"
