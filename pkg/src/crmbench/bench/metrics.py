"""Metric computation over run matrices and human verdicts.

Two distinct notions are kept strictly apart:

* **Accuracy** — of each query's *designated run* (the first repeat), correct
  only when the software execution passed AND all five human review criteria
  are true.
* **Reliability** — the percentage of queries whose pass/fail outcome is
  consistent across every repeat.  A suite that fails every query every time
  is perfectly reliable and completely inaccurate.

Per-repeat consistency is judged on the software execution outcome; human
review applies to the designated run only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

from ..backends import CostModel
from ..errors import InsufficientRepeatsError, MissingVerdictsError
from .dataset import CATEGORIES
from .runner import RunMatrix
from .scaling import fit_scaling, growth_percent

DESIGNATED_REPEAT = 1

CRITERION_FIELDS = (
    "function_selection",
    "task_representation",
    "structural_integrity",
    "functional_integrity",
    "instruction_containment",
)

COVERAGE_MODES = ("full", "sampled", "software")


@dataclass(frozen=True)
class HumanVerdict:
    """One reviewer's five-criteria judgement of a single run."""

    query_id: str
    repeat: int
    function_selection: bool
    task_representation: bool
    structural_integrity: bool
    functional_integrity: bool
    instruction_containment: bool
    evaluator_id: str
    timestamp: str

    @property
    def all_pass(self) -> bool:
        return all(getattr(self, name) for name in CRITERION_FIELDS)

    def to_doc(self) -> dict:
        doc = {
            "query_id": self.query_id,
            "repeat": self.repeat,
            "evaluator_id": self.evaluator_id,
            "timestamp": self.timestamp,
        }
        for name in CRITERION_FIELDS:
            doc[name] = getattr(self, name)
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "HumanVerdict":
        missing = [name for name in CRITERION_FIELDS if name not in doc]
        if missing:
            raise ValueError(f"verdict lacks criteria: {', '.join(missing)}")
        return cls(
            query_id=doc["query_id"],
            repeat=int(doc.get("repeat", DESIGNATED_REPEAT)),
            evaluator_id=doc.get("evaluator_id", ""),
            timestamp=doc.get("timestamp", ""),
            **{name: bool(doc[name]) for name in CRITERION_FIELDS},
        )


def load_verdicts(path: Union[str, Path]) -> list[HumanVerdict]:
    """Read verdicts from a JSONL file, in file order."""
    verdicts = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        verdicts.append(HumanVerdict.from_doc(json.loads(line)))
    return verdicts


def percent(numerator: float, denominator: float, decimals: int = 1) -> float:
    """A percentage rounded for reporting."""
    if denominator <= 0:
        raise ValueError("percentage over a non-positive denominator")
    return round(numerator / denominator * 100.0, decimals)


def _as_rows(
    rows: Union[RunMatrix, Mapping[str, Sequence[bool]]],
) -> Mapping[str, Sequence[bool]]:
    if isinstance(rows, RunMatrix):
        return rows.pass_rows()
    return rows


def _check_rows(rows: Mapping[str, Sequence[bool]]) -> int:
    if not rows:
        raise ValueError("no queries to score")
    lengths = {len(row) for row in rows.values()}
    if len(lengths) != 1:
        raise ValueError("ragged matrix: rows have differing repeat counts")
    repeats = lengths.pop()
    if repeats < 2:
        raise InsufficientRepeatsError(
            f"reliability needs at least 2 repeats per query, got {repeats}"
        )
    return repeats


def reliability_percent(
    rows: Union[RunMatrix, Mapping[str, Sequence[bool]]],
) -> float:
    """Consistent queries / total queries x 100, to one decimal.

    A query is consistent when its pass count over R repeats is 0 or R.
    """
    rows = _as_rows(rows)
    repeats = _check_rows(rows)
    consistent = sum(
        1 for row in rows.values() if sum(bool(v) for v in row) in (0, repeats)
    )
    return percent(consistent, len(rows))


def brute_force_reliability(
    rows: Union[RunMatrix, Mapping[str, Sequence[bool]]],
) -> float:
    """Oracle implementation: scan each row for both a Pass and a Fail."""
    rows = _as_rows(rows)
    _check_rows(rows)
    fluctuating = 0
    for row in rows.values():
        has_pass = False
        has_fail = False
        for value in row:
            if value:
                has_pass = True
            else:
                has_fail = True
        if has_pass and has_fail:
            fluctuating += 1
    return percent(len(rows) - fluctuating, len(rows))


def fluctuating_queries(matrix: RunMatrix) -> list[str]:
    """Ids of queries with at least one Pass and one Fail, in dataset order."""
    out = []
    for qid, row in matrix.pass_rows().items():
        if any(row) and not all(row):
            out.append(qid)
    return out


@dataclass
class MetricsReport:
    """The four headline metrics plus breakdowns and provenance."""

    pipeline: str
    queries: int
    repeats: int
    accuracy_percent: float
    correct: int
    reliability_percent: Optional[float]
    consistent: Optional[int]
    fluctuating: list[str]
    mean_latency_s: float
    cost_per_1000: Optional[float]
    per_category: dict[str, Optional[float]]
    per_category_counts: dict[str, list[int]]
    scaling: Optional[dict]
    human_coverage: dict
    metadata: dict = field(default_factory=dict)

    def to_doc(self) -> dict:
        return {
            "pipeline": self.pipeline,
            "queries": self.queries,
            "repeats": self.repeats,
            "accuracy_percent": self.accuracy_percent,
            "correct": self.correct,
            "reliability_percent": self.reliability_percent,
            "consistent": self.consistent,
            "fluctuating": list(self.fluctuating),
            "mean_latency_s": self.mean_latency_s,
            "cost_per_1000": self.cost_per_1000,
            "per_category": dict(self.per_category),
            "per_category_counts": {
                k: list(v) for k, v in self.per_category_counts.items()
            },
            "scaling": self.scaling,
            "human_coverage": dict(self.human_coverage),
            "metadata": dict(self.metadata),
        }


def _verdict_index(
    verdicts: Sequence[HumanVerdict],
) -> dict[tuple[str, int], HumanVerdict]:
    """Last write wins when a run was graded more than once."""
    index: dict[tuple[str, int], HumanVerdict] = {}
    for verdict in verdicts:
        index[(verdict.query_id, verdict.repeat)] = verdict
    return index


def _cell_cost(cell, cost_model: CostModel) -> float:
    return (
        cell.input_tokens * cost_model.input_per_million / 1e6
        + cell.output_tokens * cost_model.output_per_million / 1e6
    )


def scaling_points(matrix: RunMatrix) -> list[tuple[int, float]]:
    """Mean latency per gold call count, for scaling fits."""
    by_n: dict[int, list[float]] = {}
    for qid in matrix.query_ids:
        n = int(matrix.query_meta[qid]["n_calls"])
        for cell in matrix.row(qid):
            by_n.setdefault(n, []).append(cell.latency_s)
    return [
        (n, sum(values) / len(values)) for n, values in sorted(by_n.items())
    ]


def compute_metrics(
    matrix: RunMatrix,
    verdicts: Optional[Sequence[HumanVerdict]] = None,
    cost_model: Optional[CostModel] = None,
    coverage: str = "full",
) -> MetricsReport:
    """Score a complete run matrix.

    `coverage` controls the human-review stage of accuracy:

    * ``full`` — every software-passing designated run must carry a verdict;
      anything uncovered raises ``MissingVerdictsError``.
    * ``sampled`` — uncovered passing runs count as correct on the software
      result alone; the report records how much was actually reviewed.
    * ``software`` — verdicts are ignored entirely (software-only accuracy).
    """
    if coverage not in COVERAGE_MODES:
        raise ValueError(
            f"coverage must be one of {', '.join(COVERAGE_MODES)}"
        )
    index = _verdict_index(verdicts or [])

    eligible = [
        qid
        for qid in matrix.query_ids
        if matrix.cell(qid, DESIGNATED_REPEAT).passed
    ]
    covered = [
        qid for qid in eligible if (qid, DESIGNATED_REPEAT) in index
    ]
    if coverage == "full":
        missing = [
            (qid, DESIGNATED_REPEAT)
            for qid in eligible
            if (qid, DESIGNATED_REPEAT) not in index
        ]
        if missing:
            raise MissingVerdictsError(missing)

    def is_correct(qid: str) -> bool:
        if not matrix.cell(qid, DESIGNATED_REPEAT).passed:
            return False
        if coverage == "software":
            return True
        verdict = index.get((qid, DESIGNATED_REPEAT))
        if verdict is None:
            return coverage == "sampled"
        return verdict.all_pass

    correct_ids = {qid for qid in matrix.query_ids if is_correct(qid)}
    accuracy = percent(len(correct_ids), len(matrix.query_ids))

    reliability: Optional[float] = None
    consistent: Optional[int] = None
    fluct: list[str] = []
    if matrix.repeats >= 2:
        reliability = reliability_percent(matrix)
        fluct = fluctuating_queries(matrix)
        consistent = len(matrix.query_ids) - len(fluct)

    cells = matrix.all_cells()
    mean_latency = round(sum(c.latency_s for c in cells) / len(cells), 3)
    cost_per_1000 = None
    if cost_model is not None:
        mean_cost = sum(_cell_cost(c, cost_model) for c in cells) / len(cells)
        cost_per_1000 = round(mean_cost * 1000.0, 4)

    per_category: dict[str, Optional[float]] = {}
    per_category_counts: dict[str, list[int]] = {}
    for category in CATEGORIES:
        ids = [
            qid
            for qid in matrix.query_ids
            if matrix.query_meta[qid]["category"] == category
        ]
        hits = sum(1 for qid in ids if qid in correct_ids)
        per_category_counts[category] = [hits, len(ids)]
        per_category[category] = percent(hits, len(ids)) if ids else None

    points = scaling_points(matrix)
    scaling_doc: Optional[dict] = None
    if len(points) >= 2 and all(latency > 0 for _, latency in points):
        fit = fit_scaling(points)
        scaling_doc = fit.to_doc()
        scaling_doc["growth_percent"] = growth_percent(
            points[0][1], points[-1][1]
        )

    coverage_doc = {
        "mode": coverage,
        "eligible": len(eligible),
        "covered": len(covered),
    }

    return MetricsReport(
        pipeline=matrix.pipeline,
        queries=len(matrix.query_ids),
        repeats=matrix.repeats,
        accuracy_percent=accuracy,
        correct=len(correct_ids),
        reliability_percent=reliability,
        consistent=consistent,
        fluctuating=fluct,
        mean_latency_s=mean_latency,
        cost_per_1000=cost_per_1000,
        per_category=per_category,
        per_category_counts=per_category_counts,
        scaling=scaling_doc,
        human_coverage=coverage_doc,
        metadata=dict(matrix.meta),
    )
