"""Single-call baseline: lexical top-k schema retrieval, one completion
with the retrieved tools in the prompt, execute whatever comes back.

No validator and no repair loop — a malformed or wrong call is simply a
recorded failure. Retrieval guarantees the gold function is present in the
candidate set, so function retrieval quality is never the bottleneck.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from ..backends import Backend, PromptBundle, UsageLedger
from ..errors import UnknownGoldError
from ..registry import SchemaRegistry
from ..sim import CrmStore
from .base import (
    PipelineConfig,
    PipelineResult,
    StepRecord,
    StopWatch,
    call_from_tool_use,
    load_prompt,
    parse_tool_use,
    render_tools,
)

_TOKEN_RE = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class RetrievalResult:
    query_id: str
    schemas: tuple
    gold_included: bool

    def names(self) -> list[str]:
        return [s.name for s in self.schemas]


def _tokens(text: str) -> set:
    return set(_TOKEN_RE.findall(text.lower()))


def retrieve_top_k(
    query_text: str,
    registry: SchemaRegistry,
    gold_name: str,
    k: int = 5,
    query_id: str = "",
) -> RetrievalResult:
    """Top-k schemas by token overlap with name+description; the gold
    schema is forced into the result (replacing rank k) when scoring
    misses it."""
    if not registry.has(gold_name):
        raise UnknownGoldError(f"gold function {gold_name!r} is not registered")
    query_tokens = _tokens(query_text)
    scored = []
    for schema in registry.all():
        doc_tokens = _tokens(schema.name.replace("_", " ") + " " + schema.description)
        score = len(query_tokens & doc_tokens)
        scored.append((-score, schema.name, schema))
    scored.sort()
    top = [entry[2] for entry in scored[:k]]
    gold_included = any(s.name == gold_name for s in top)
    if not gold_included and top:
        top[-1] = registry.get(gold_name)
    return RetrievalResult(query_id=query_id, schemas=tuple(top), gold_included=True)


class SingleApiPipeline:
    name = "single_api"

    def __init__(
        self,
        backend: Backend,
        registry: SchemaRegistry,
        config: Optional[PipelineConfig] = None,
    ):
        self.backend = backend
        self.registry = registry
        self.config = config or PipelineConfig()
        variant = "single_api_" + self.config.prompt_variant
        self.system_prompt = load_prompt(variant, self.config.owner_id)

    def generate_call(
        self,
        task_text: str,
        gold_name: str,
        query_id: str,
        stage: str,
        repeat: int,
        ledger: UsageLedger,
    ):
        """Retrieve tools, run one completion, parse the emitted call.

        Returns (StepRecord, ApiCall | None, failure | None).
        """
        retrieval = retrieve_top_k(
            task_text, self.registry, gold_name, k=self.config.retrieval_k, query_id=query_id
        )
        system = self.system_prompt + "\n\n# Tools\n" + render_tools(retrieval.schemas)
        bundle = PromptBundle(
            messages=(
                {"role": "system", "content": system},
                {"role": "user", "content": task_text},
            ),
            query_id=query_id,
            stage=stage,
            attempt=1,
            repeat=repeat,
        )
        completion = self.backend.complete(bundle)
        ledger.record(completion, stage)

        doc = parse_tool_use(completion.text)
        if doc is None:
            return StepRecord(call_text=completion.text), None, "malformed_output"
        if doc["name"] not in retrieval.names():
            return (
                StepRecord(call_text=completion.text, function_name=doc["name"]),
                None,
                "function_selection",
            )
        call = call_from_tool_use(doc, self.registry)
        return StepRecord.for_call(completion.text, call), call, None

    def run(self, query, store: CrmStore, repeat: int = 1) -> PipelineResult:
        watch = StopWatch()
        ledger = UsageLedger()
        result = PipelineResult(
            query_id=query.id, pipeline=self.name, success=False,
            attempts_used=1, ledger=ledger,
        )
        record, call, failure = self.generate_call(
            query.text, query.gold_functions[0], query.id, "single", repeat, ledger
        )
        result.steps = [record]
        if failure is not None:
            result.failure = failure
            result.latency = ledger.simulated_latency + watch.elapsed()
            return result
        response = store.execute(call)
        ledger.add_latency(self.config.exec_latency_s)
        record.status = response.status
        record.response = response.document
        result.success = response.ok
        if not response.ok:
            result.failure = f"http_{response.status}"
        result.latency = ledger.simulated_latency + watch.elapsed()
        return result
