"""Loading and validation of benchmark query datasets.

A dataset is a JSONL file, one query per line, with fields:

    id              unique query identifier
    text            the natural-language query
    category        one of CREATE / READ / UPDATE / DELETE / ASSOCIATE
    n_calls         how many API calls the gold solution needs
    gold_functions  endpoint names the gold solution uses, in order
    gold_calls      the gold solution as call-language lines, in order
    fixture         name of the simulator fixture the query runs against

Structural problems (bad JSON, missing fields, unparseable calls) raise
``DatasetParseError`` with the offending line number; cross-field breaches
(call-count mismatch, duplicate ids, category drift) raise
``ConsistencyError``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

from ..errors import (
    ConsistencyError,
    CrmBenchError,
    DatasetParseError,
    IrSyntaxError,
)
from ..ir import IntermediateCall, compile_call, parse
from ..registry import ApiCall, SchemaRegistry, default_registry

CATEGORIES = ("CREATE", "READ", "UPDATE", "DELETE", "ASSOCIATE")

_REQUIRED_FIELDS = (
    "id",
    "text",
    "category",
    "n_calls",
    "gold_functions",
    "gold_calls",
    "fixture",
)


@dataclass(frozen=True)
class QueryRecord:
    """One benchmark query with its gold solution."""

    id: str
    text: str
    category: str
    n_calls: int
    gold_functions: tuple[str, ...]
    gold_ir: tuple[IntermediateCall, ...]
    gold_calls: tuple[ApiCall, ...]
    fixture: str

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "category": self.category,
            "n_calls": self.n_calls,
            "gold_functions": list(self.gold_functions),
            "fixture": self.fixture,
        }


def _field(doc: dict, name: str, line: int):
    if name not in doc:
        raise DatasetParseError(f"missing field {name!r}", line)
    return doc[name]


def _parse_record(
    doc: dict, line: int, registry: SchemaRegistry
) -> QueryRecord:
    for name in _REQUIRED_FIELDS:
        _field(doc, name, line)

    qid = doc["id"]
    if not isinstance(qid, str) or not qid:
        raise DatasetParseError("field 'id' must be a non-empty string", line)
    text = doc["text"]
    if not isinstance(text, str) or not text.strip():
        raise DatasetParseError("field 'text' must be a non-empty string", line)
    category = doc["category"]
    if category not in CATEGORIES:
        raise DatasetParseError(
            f"field 'category' must be one of {', '.join(CATEGORIES)};"
            f" got {category!r}",
            line,
        )
    n_calls = doc["n_calls"]
    if not isinstance(n_calls, int) or isinstance(n_calls, bool) or n_calls < 1:
        raise DatasetParseError(
            "field 'n_calls' must be a positive integer", line
        )
    gold_functions = doc["gold_functions"]
    if not isinstance(gold_functions, list) or not gold_functions or not all(
        isinstance(name, str) and name for name in gold_functions
    ):
        raise DatasetParseError(
            "field 'gold_functions' must be a non-empty list of names", line
        )
    gold_texts = doc["gold_calls"]
    if not isinstance(gold_texts, list) or not gold_texts or not all(
        isinstance(text, str) and text.strip() for text in gold_texts
    ):
        raise DatasetParseError(
            "field 'gold_calls' must be a non-empty list of call lines", line
        )
    fixture = doc["fixture"]
    if not isinstance(fixture, str) or not fixture:
        raise DatasetParseError(
            "field 'fixture' must be a non-empty string", line
        )

    gold_ir = []
    for text_line in gold_texts:
        try:
            gold_ir.append(parse(text_line))
        except IrSyntaxError as err:
            raise DatasetParseError(
                f"gold call {text_line!r} does not parse: {err}", line
            ) from err

    # Cross-field invariants.
    if n_calls != len(gold_ir):
        raise ConsistencyError(
            f"query {qid!r}: n_calls={n_calls} but {len(gold_ir)} gold calls"
        )
    compiled = []
    for index, call in enumerate(gold_ir, start=1):
        try:
            compiled.append(compile_call(call, registry, template=True))
        except CrmBenchError as err:
            raise ConsistencyError(
                f"query {qid!r}: gold call {index} does not compile: {err}"
            ) from err
    actual_names = [call.function_name for call in compiled]
    if actual_names != list(gold_functions):
        raise ConsistencyError(
            f"query {qid!r}: gold_functions {list(gold_functions)} do not"
            f" match compiled calls {actual_names}"
        )
    final_category = registry.get(actual_names[-1]).category
    if category != final_category:
        raise ConsistencyError(
            f"query {qid!r}: declared category {category} but the final gold"
            f" call is {final_category}"
        )

    return QueryRecord(
        id=qid,
        text=text,
        category=category,
        n_calls=n_calls,
        gold_functions=tuple(gold_functions),
        gold_ir=tuple(gold_ir),
        gold_calls=tuple(compiled),
        fixture=fixture,
    )


def load_dataset(
    path: Union[str, Path], registry: Optional[SchemaRegistry] = None
) -> list[QueryRecord]:
    """Load and validate a JSONL dataset file.

    Blank lines are tolerated; every other line must be a valid record.
    """
    registry = registry or default_registry()
    records: list[QueryRecord] = []
    seen: dict[str, int] = {}
    raw = Path(path).read_text(encoding="utf-8")
    for line_no, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as err:
            raise DatasetParseError(f"invalid JSON: {err.msg}", line_no) from err
        if not isinstance(doc, dict):
            raise DatasetParseError("record must be a JSON object", line_no)
        record = _parse_record(doc, line_no, registry)
        if record.id in seen:
            raise ConsistencyError(
                f"duplicate query id {record.id!r}"
                f" (lines {seen[record.id]} and {line_no})"
            )
        seen[record.id] = line_no
        records.append(record)
    return records


def dataset_hash(path: Union[str, Path]) -> str:
    """Content hash of a dataset file, for report provenance."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def records_by_id(records: Sequence[QueryRecord]) -> dict[str, QueryRecord]:
    return {record.id: record for record in records}
