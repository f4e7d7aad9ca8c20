"""Report rendering: canonical JSON, markdown tables, per-query CSV."""

import csv
import io
import json

import pytest

from crmbench.bench.metrics import compute_metrics
from crmbench.bench.report import (
    emit_report,
    render_csv,
    render_json,
    render_markdown,
    write_report_files,
)


@pytest.fixture(scope="module")
def thor_report(thor_matrix, make_verdicts, scripted_cost_model):
    return compute_metrics(thor_matrix, make_verdicts(thor_matrix), scripted_cost_model)


@pytest.fixture(scope="module")
def single_report(single_matrix, make_verdicts, scripted_cost_model):
    return compute_metrics(single_matrix, make_verdicts(single_matrix), scripted_cost_model)


class TestJson:
    def test_byte_stable(self, thor_report):
        assert render_json(thor_report) == render_json(thor_report)

    def test_parses_back_to_the_doc(self, thor_report):
        assert json.loads(render_json(thor_report)) == json.loads(
            json.dumps(thor_report.to_doc())
        )

    def test_keys_sorted(self, thor_report):
        text = render_json(thor_report)
        assert text.index('"accuracy_percent"') < text.index('"pipeline"')
        assert text.endswith("\n")


class TestMarkdown:
    def test_headline_table(self, thor_report):
        text = render_markdown(thor_report)
        assert "| Pipeline | Accuracy | Reliability | Latency (s) | Cost ($/1k queries) |" in text
        assert "| composite | 100.0% | 100.0% |" in text

    def test_category_table(self, thor_report):
        text = render_markdown(thor_report)
        assert "| Pipeline | CREATE | READ | UPDATE | DELETE | ASSOCIATE |" in text

    def test_scaling_table_present_with_two_call_counts(self, thor_report):
        text = render_markdown(thor_report)
        assert "## Latency scaling" in text
        assert "+9%" in text
        assert "sublinear" in text

    def test_scaling_table_absent_without_fit(self, single_report):
        assert "## Latency scaling" not in render_markdown(single_report)

    def test_none_metrics_render_na(self):
        from test_runner import make_matrix

        report = compute_metrics(
            make_matrix({"a": [True, True]}), coverage="software"
        )
        assert report.per_category["ASSOCIATE"] is None
        # READ passes; the four uncovered categories render as n/a.
        assert "| composite | n/a | 100.0% | n/a | n/a | n/a |" in render_markdown(report)

    def test_multiple_reports_share_tables(self, thor_report, single_report):
        text = render_markdown([thor_report, single_report])
        assert text.count("| composite |") >= 2
        assert text.count("| single_api |") >= 2

    def test_coverage_line(self, thor_report):
        assert "human coverage: full (18/18 passing runs reviewed)." in render_markdown(
            thor_report
        )

    def test_fluctuating_queries_listed(self, flaky_matrix, make_verdicts):
        report = compute_metrics(flaky_matrix, make_verdicts(flaky_matrix))
        assert "Fluctuating queries (composite): q5" in render_markdown(report)


class TestEmit:
    def test_formats(self, thor_report):
        assert emit_report(thor_report, "json") == render_json(thor_report)
        assert emit_report(thor_report, "markdown") == render_markdown(thor_report)
        assert emit_report(thor_report, "md") == render_markdown(thor_report)

    def test_json_list(self, thor_report, single_report):
        docs = json.loads(emit_report([thor_report, single_report], "json"))
        assert [d["pipeline"] for d in docs] == ["composite", "single_api"]

    def test_unknown_format_rejected(self, thor_report):
        with pytest.raises(ValueError, match="unknown report format 'xml'"):
            emit_report(thor_report, "xml")


class TestCsv:
    def test_columns_and_rows(self, thor_matrix, make_verdicts, scripted_cost_model):
        text = render_csv(
            thor_matrix, cost_model=scripted_cost_model, verdicts=make_verdicts(thor_matrix)
        )
        rows = list(csv.DictReader(io.StringIO(text)))
        assert len(rows) == 18
        first = rows[0]
        assert first["query_id"] == "q1"
        assert first["category"] == "CREATE"
        assert first["n_calls"] == "1"
        assert first["repeats"] == "10"
        assert first["pass_count"] == "10"
        assert first["consistent"] == "true"
        assert first["designated_pass"] == "true"
        assert first["human_all_pass"] == "true"
        assert float(first["mean_latency_s"]) == pytest.approx(1.1, abs=0.05)
        assert float(first["mean_cost_usd"]) > 0

    def test_missing_verdict_and_cost_leave_blanks(self, thor_matrix):
        rows = list(csv.DictReader(io.StringIO(render_csv(thor_matrix))))
        assert rows[0]["human_all_pass"] == ""
        assert rows[0]["mean_cost_usd"] == ""

    def test_flaky_query_marked_inconsistent(self, flaky_matrix):
        rows = {
            row["query_id"]: row
            for row in csv.DictReader(io.StringIO(render_csv(flaky_matrix)))
        }
        assert rows["q5"]["consistent"] == "false"
        assert rows["q5"]["pass_count"] == "7"
        assert rows["q5"]["designated_pass"] == "false"
        assert rows["q1"]["consistent"] == "true"


class TestWriteReportFiles:
    def test_full_file_set(
        self, thor_matrix, thor_report, make_verdicts, scripted_cost_model, tmp_path
    ):
        paths = write_report_files(
            thor_matrix,
            thor_report,
            tmp_path / "out",
            cost_model=scripted_cost_model,
            verdicts=make_verdicts(thor_matrix),
        )
        assert {p.name for p in paths.values()} == {
            "report.json",
            "report.md",
            "results.csv",
            "headline.png",
            "categories.png",
            "scaling.png",
        }
        for path in paths.values():
            assert path.is_file() and path.stat().st_size > 0
        assert json.loads(paths["json"].read_text())["pipeline"] == "composite"

    def test_figures_can_be_skipped(self, thor_matrix, thor_report, tmp_path):
        paths = write_report_files(thor_matrix, thor_report, tmp_path, figures=False)
        assert set(paths) == {"json", "markdown", "csv"}
