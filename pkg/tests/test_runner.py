"""Suite execution: cell fan-out, isolation, persistence, fault handling."""

import json

import pytest
from conftest import build_pipeline

from crmbench.backends import UsageLedger
from crmbench.bench.runner import (
    FixtureCache,
    RunCell,
    RunMatrix,
    load_run_dir,
    run_suite,
)
from crmbench.errors import EmptyVerdictError, MissingScriptError, TransportError
from crmbench.pipelines.base import PipelineResult, StepRecord
from crmbench.sim import load_seed_fixture


def make_cell(qid="q1", repeat=1, passed=True, latency=1.1, **over):
    fields = dict(
        query_id=qid, repeat=repeat, passed=passed, latency_s=latency,
        attempts_used=1, completions=1, input_tokens=100, output_tokens=10,
        failure=None,
    )
    fields.update(over)
    return RunCell(**fields)


def make_matrix(rows, pipeline="composite", meta=None):
    """rows: {qid: [bool, ...]} — all rows must share a length."""
    repeats = len(next(iter(rows.values())))
    cells = {
        (qid, r + 1): make_cell(qid, r + 1, passed)
        for qid, row in rows.items()
        for r, passed in enumerate(row)
    }
    return RunMatrix(
        pipeline=pipeline,
        repeats=repeats,
        query_ids=tuple(rows),
        query_meta={qid: {"category": "READ", "n_calls": 1, "text": qid} for qid in rows},
        cells=cells,
        meta=dict(meta or {}),
    )


class FailingPipeline:
    name = "failing"

    def __init__(self, exc):
        self.exc = exc

    def run(self, query, store, repeat=1):
        raise self.exc


class TestRunCell:
    def test_from_result_copies_usage(self):
        ledger = UsageLedger(input_tokens=70, output_tokens=9, completions=2)
        result = PipelineResult(
            query_id="q9", pipeline="composite", success=True, attempts_used=2,
            steps=[StepRecord(call_text="CREATE contact", status=201)],
            latency=2.2000001, ledger=ledger,
            verdicts=[{"passed": True, "violations": []}],
        )
        cell = RunCell.from_result(result, repeat=3)
        assert cell.query_id == "q9"
        assert cell.repeat == 3
        assert cell.passed is True
        assert cell.latency_s == 2.2
        assert cell.completions == 2
        assert cell.input_tokens == 70
        assert cell.steps[0]["call_text"] == "CREATE contact"
        assert cell.verdicts[0]["passed"] is True

    def test_doc_round_trip(self):
        cell = make_cell(failure="http_404", passed=False, steps=({"call_text": "x"},))
        assert RunCell.from_doc(cell.to_doc()) == cell


class TestRunMatrix:
    def test_accessors(self):
        matrix = make_matrix({"a": [True, False], "b": [True, True]})
        assert matrix.cell("a", 2).passed is False
        assert [c.repeat for c in matrix.row("a")] == [1, 2]
        assert matrix.pass_rows() == {"a": [True, False], "b": [True, True]}
        assert len(matrix.all_cells()) == 4
        assert matrix.total_cells() == 4

    def test_holes_rejected(self):
        cells = {("a", 1): make_cell("a", 1)}
        with pytest.raises(ValueError, match="matrix has holes"):
            RunMatrix(
                pipeline="p", repeats=2, query_ids=("a",),
                query_meta={"a": {}}, cells=cells,
            )

    def test_zero_repeats_rejected(self):
        with pytest.raises(ValueError, match="repeats must be >= 1"):
            RunMatrix(pipeline="p", repeats=0, query_ids=(), query_meta={}, cells={})

    def test_write_and_reload_round_trip(self, tmp_path):
        matrix = make_matrix({"a": [True, False]}, meta={"dataset_hash": "abc"})
        out = matrix.write(tmp_path / "run")
        assert (out / "meta.json").is_file()
        assert (out / "runs.jsonl").is_file()
        loaded = load_run_dir(out)
        assert loaded.pipeline == matrix.pipeline
        assert loaded.repeats == matrix.repeats
        assert loaded.query_ids == matrix.query_ids
        assert loaded.meta == {"dataset_hash": "abc"}
        assert loaded.cells == matrix.cells

    def test_written_meta_carries_query_fields(self, tmp_path):
        matrix = make_matrix({"a": [True, True]})
        out = matrix.write(tmp_path / "run")
        meta = json.loads((out / "meta.json").read_text())
        assert meta["queries"] == [{"id": "a", "category": "READ", "n_calls": 1, "text": "a"}]


class TestFixtureCache:
    def test_seed_name_loads_builtin(self):
        cache = FixtureCache()
        assert cache.document("seed") == load_seed_fixture()

    def test_documents_cached(self):
        cache = FixtureCache()
        assert cache.document("seed") is cache.document("seed")

    def test_file_fixture_under_root(self, tmp_path):
        doc = {"objects": [{"type": "contact", "id": "7", "properties": {}}]}
        (tmp_path / "tiny.json").write_text(json.dumps(doc))
        cache = FixtureCache(root=tmp_path)
        store = cache.fresh_store("tiny.json")
        assert store.dispatch("GET", "/crm/v3/objects/contacts/7").status == 200

    def test_fresh_stores_are_isolated(self):
        cache = FixtureCache()
        first = cache.fresh_store("seed")
        first.dispatch("DELETE", "/crm/v3/objects/contacts/51")
        second = cache.fresh_store("seed")
        assert second.dispatch("GET", "/crm/v3/objects/contacts/51").status == 200


class TestRunSuite:
    def test_grid_shape_and_meta(self, thor_matrix, full_records):
        assert thor_matrix.pipeline == "composite"
        assert thor_matrix.repeats == 10
        assert thor_matrix.query_ids == tuple(r.id for r in full_records)
        assert thor_matrix.total_cells() == 180
        meta = thor_matrix.query_meta["q1"]
        assert set(meta) == {"category", "n_calls", "text"}

    def test_scripted_suite_all_passes(self, thor_matrix):
        assert all(cell.passed for cell in thor_matrix.all_cells())

    def test_repeats_identical_for_deterministic_script(self, thor_matrix):
        for qid in thor_matrix.query_ids:
            row = thor_matrix.row(qid)
            assert len({c.completions for c in row}) == 1
            assert len({c.input_tokens for c in row}) == 1
            # Simulated latency is exact; only wall-clock jitter differs, and
            # under a loaded machine that jitter can reach tens of ms.
            assert max(c.latency_s for c in row) - min(c.latency_s for c in row) < 0.25

    def test_each_cell_runs_on_a_fresh_store(self, thor_matrix):
        created = {cell.steps[0]["response"]["id"] for cell in thor_matrix.row("q1")}
        assert len(created) == 1

    def test_flaky_script_fails_designated_repeats(self, flaky_matrix):
        row = flaky_matrix.pass_rows()["q5"]
        failed = [i + 1 for i, ok in enumerate(row) if not ok]
        assert failed == [1, 4, 9]
        cell = flaky_matrix.cell("q5", 4)
        assert cell.failure == "max_attempts_exceeded"
        assert cell.attempts_used == 3

    def test_pipeline_errors_become_fail_cells(self, full_records):
        matrix = run_suite(
            FailingPipeline(EmptyVerdictError("boom")), full_records[:2], repeats=2
        )
        cell = matrix.cell(full_records[0].id, 1)
        assert cell.passed is False
        assert cell.failure == "EmptyVerdictError: boom"
        assert cell.attempts_used == 0

    def test_missing_script_aborts_suite(self, full_records):
        with pytest.raises(MissingScriptError):
            run_suite(FailingPipeline(MissingScriptError("gone")), full_records[:1], repeats=1)

    def test_transport_error_aborts_suite(self, full_records):
        with pytest.raises(TransportError):
            run_suite(FailingPipeline(TransportError("down")), full_records[:1], repeats=1)

    def test_bad_arguments_rejected(self, registry, full_records):
        pipeline = build_pipeline("composite", "thor_demo", registry)
        with pytest.raises(ValueError, match="repeats must be >= 1"):
            run_suite(pipeline, full_records, repeats=0)
        with pytest.raises(ValueError, match="dataset is empty"):
            run_suite(pipeline, [], repeats=1)

    def test_out_dir_persists_matrix(self, registry, full_records, tmp_path):
        pipeline = build_pipeline("composite", "thor_demo", registry)
        matrix = run_suite(
            pipeline, full_records[:2], repeats=2, out_dir=tmp_path / "run",
            extra_meta={"dataset": "demo_full"},
        )
        loaded = load_run_dir(tmp_path / "run")
        assert loaded.cells == matrix.cells
        assert loaded.meta == {"dataset": "demo_full"}

    def test_worker_count_does_not_change_results(self, registry, full_records):
        serial = run_suite(
            build_pipeline("composite", "thor_demo", registry),
            full_records[:4], repeats=3, max_workers=1,
        )
        parallel = run_suite(
            build_pipeline("composite", "thor_demo", registry),
            full_records[:4], repeats=3, max_workers=8,
        )

        def stable(matrix):
            docs = []
            for cell in matrix.all_cells():
                doc = cell.to_doc()
                doc.pop("latency_s")
                docs.append(doc)
            return docs

        assert stable(serial) == stable(parallel)
