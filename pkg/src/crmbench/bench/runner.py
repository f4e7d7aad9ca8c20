"""Suite execution: fan out (query, repeat) cells and persist run logs.

Every cell runs against a freshly seeded simulator instance, so no state
leaks between queries or repeats.  Pipeline-level failures (invalid plans,
non-2xx responses, injection errors) are recorded as Fail cells; only
infrastructure faults (missing script entries, transport errors) abort the
suite.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

from ..errors import CrmBenchError, MissingScriptError, TransportError
from ..sim import CrmStore, load_seed_fixture
from .dataset import QueryRecord

RUNS_FILE = "runs.jsonl"
META_FILE = "meta.json"
SEED_FIXTURE_NAME = "seed"


@dataclass(frozen=True)
class RunCell:
    """Outcome of one (query, repeat) execution."""

    query_id: str
    repeat: int
    passed: bool
    latency_s: float
    attempts_used: int
    completions: int
    input_tokens: int
    output_tokens: int
    failure: Optional[str]
    steps: tuple = ()
    verdicts: tuple = ()

    @classmethod
    def from_result(cls, result, repeat: int) -> "RunCell":
        ledger = result.ledger
        return cls(
            query_id=result.query_id,
            repeat=repeat,
            passed=bool(result.success),
            latency_s=round(result.latency, 6),
            attempts_used=result.attempts_used,
            completions=ledger.completions,
            input_tokens=ledger.input_tokens,
            output_tokens=ledger.output_tokens,
            failure=result.failure,
            steps=tuple(step.to_doc() for step in result.steps),
            verdicts=tuple(result.verdicts),
        )

    def to_doc(self) -> dict:
        return {
            "query_id": self.query_id,
            "repeat": self.repeat,
            "passed": self.passed,
            "latency_s": self.latency_s,
            "attempts_used": self.attempts_used,
            "completions": self.completions,
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "failure": self.failure,
            "steps": list(self.steps),
            "verdicts": list(self.verdicts),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "RunCell":
        return cls(
            query_id=doc["query_id"],
            repeat=int(doc["repeat"]),
            passed=bool(doc["passed"]),
            latency_s=float(doc["latency_s"]),
            attempts_used=int(doc["attempts_used"]),
            completions=int(doc["completions"]),
            input_tokens=int(doc["input_tokens"]),
            output_tokens=int(doc["output_tokens"]),
            failure=doc.get("failure"),
            steps=tuple(doc.get("steps", ())),
            verdicts=tuple(doc.get("verdicts", ())),
        )


@dataclass
class RunMatrix:
    """Complete grid of run cells for one pipeline over one dataset."""

    pipeline: str
    repeats: int
    query_ids: tuple[str, ...]
    query_meta: dict[str, dict]
    cells: dict[tuple[str, int], RunCell]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        missing = [
            (qid, r)
            for qid in self.query_ids
            for r in range(1, self.repeats + 1)
            if (qid, r) not in self.cells
        ]
        if missing:
            raise ValueError(f"matrix has holes: {missing[:5]}")

    def cell(self, query_id: str, repeat: int) -> RunCell:
        return self.cells[(query_id, repeat)]

    def row(self, query_id: str) -> list[RunCell]:
        return [
            self.cells[(query_id, r)] for r in range(1, self.repeats + 1)
        ]

    def pass_rows(self) -> dict[str, list[bool]]:
        """Pass/fail booleans per query, ordered by repeat index."""
        return {
            qid: [cell.passed for cell in self.row(qid)]
            for qid in self.query_ids
        }

    def all_cells(self) -> list[RunCell]:
        return [
            self.cells[(qid, r)]
            for qid in self.query_ids
            for r in range(1, self.repeats + 1)
        ]

    def write(self, out_dir: Union[str, Path]) -> Path:
        """Persist the matrix as meta.json + runs.jsonl for later reporting."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        meta_doc = {
            "pipeline": self.pipeline,
            "repeats": self.repeats,
            "queries": [
                {"id": qid, **self.query_meta[qid]} for qid in self.query_ids
            ],
            **self.meta,
        }
        (out / META_FILE).write_text(
            json.dumps(meta_doc, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        with (out / RUNS_FILE).open("w", encoding="utf-8") as handle:
            for cell in self.all_cells():
                handle.write(json.dumps(cell.to_doc(), sort_keys=True) + "\n")
        return out

    def total_cells(self) -> int:
        return len(self.query_ids) * self.repeats


def load_run_dir(path: Union[str, Path]) -> RunMatrix:
    """Reload a persisted run directory into a RunMatrix."""
    root = Path(path)
    meta_doc = json.loads((root / META_FILE).read_text(encoding="utf-8"))
    queries = meta_doc.pop("queries")
    pipeline = meta_doc.pop("pipeline")
    repeats = meta_doc.pop("repeats")
    query_ids = tuple(entry["id"] for entry in queries)
    query_meta = {
        entry["id"]: {k: v for k, v in entry.items() if k != "id"}
        for entry in queries
    }
    cells: dict[tuple[str, int], RunCell] = {}
    with (root / RUNS_FILE).open(encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            cell = RunCell.from_doc(json.loads(line))
            cells[(cell.query_id, cell.repeat)] = cell
    return RunMatrix(
        pipeline=pipeline,
        repeats=repeats,
        query_ids=query_ids,
        query_meta=query_meta,
        cells=cells,
        meta=meta_doc,
    )


class FixtureCache:
    """Loads fixture documents once and hands out fresh stores."""

    def __init__(self, root: Optional[Union[str, Path]] = None):
        self.root = Path(root) if root else None
        self._documents: dict[str, dict] = {}

    def document(self, name: str) -> dict:
        doc = self._documents.get(name)
        if doc is None:
            if name == SEED_FIXTURE_NAME:
                doc = load_seed_fixture()
            else:
                path = Path(name)
                if not path.is_absolute() and self.root is not None:
                    path = self.root / name
                doc = json.loads(path.read_text(encoding="utf-8"))
            self._documents[name] = doc
        return doc

    def fresh_store(self, name: str) -> CrmStore:
        return CrmStore().load_fixture(self.document(name))


def run_suite(
    pipeline,
    records: Sequence[QueryRecord],
    repeats: int = 10,
    max_workers: int = 4,
    fixture_root: Optional[Union[str, Path]] = None,
    out_dir: Optional[Union[str, Path]] = None,
    extra_meta: Optional[dict] = None,
) -> RunMatrix:
    """Run every query `repeats` times against a fresh simulator per cell."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if not records:
        raise ValueError("dataset is empty")
    fixtures = FixtureCache(fixture_root)
    # Warm the cache serially so worker threads only read it.
    for record in records:
        fixtures.document(record.fixture)

    jobs = [
        (record, repeat)
        for record in records
        for repeat in range(1, repeats + 1)
    ]

    def one(job) -> RunCell:
        record, repeat = job
        store = fixtures.fresh_store(record.fixture)
        try:
            result = pipeline.run(record, store, repeat=repeat)
        except (MissingScriptError, TransportError):
            raise  # infrastructure fault: abort the suite
        except CrmBenchError as err:
            return RunCell(
                query_id=record.id,
                repeat=repeat,
                passed=False,
                latency_s=0.0,
                attempts_used=0,
                completions=0,
                input_tokens=0,
                output_tokens=0,
                failure=f"{type(err).__name__}: {err}",
            )
        return RunCell.from_result(result, repeat)

    workers = max(1, min(max_workers, len(jobs)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(one, jobs))

    cells = {(cell.query_id, cell.repeat): cell for cell in results}
    matrix = RunMatrix(
        pipeline=getattr(pipeline, "name", type(pipeline).__name__),
        repeats=repeats,
        query_ids=tuple(record.id for record in records),
        query_meta={
            record.id: {
                "category": record.category,
                "n_calls": record.n_calls,
                "text": record.text,
            }
            for record in records
        },
        cells=cells,
        meta=dict(extra_meta or {}),
    )
    if out_dir is not None:
        matrix.write(out_dir)
    return matrix
