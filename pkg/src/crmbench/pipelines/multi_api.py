"""Two-call baseline: split the query into two tasks, generate and execute
the first call, rewrite the second task with the first response, then
generate and execute the second call — exactly four completions per query
(split, gen1, rewrite, gen2), which is where its superlinear latency
comes from.
"""

from __future__ import annotations

import json
from typing import Optional

from ..backends import Backend, PromptBundle, UsageLedger
from ..registry import SchemaRegistry
from ..sim import CrmStore
from .base import PipelineConfig, PipelineResult, StepRecord, StopWatch, load_prompt
from .single_api import SingleApiPipeline


class MultiApiPipeline:
    name = "multi_api"

    def __init__(
        self,
        backend: Backend,
        registry: SchemaRegistry,
        config: Optional[PipelineConfig] = None,
    ):
        self.backend = backend
        self.registry = registry
        self.config = config or PipelineConfig()
        self.split_prompt = load_prompt("multi_api_split", self.config.owner_id)
        self.rewrite_prompt = load_prompt("multi_api_rewrite", self.config.owner_id)
        self._generator = SingleApiPipeline(backend, registry, config)

    def split(self, query, repeat: int, ledger: UsageLedger):
        """Completion 1: split the query into two newline-separated tasks."""
        bundle = PromptBundle(
            messages=(
                {"role": "system", "content": self.split_prompt},
                {"role": "user", "content": query.text},
            ),
            query_id=query.id,
            stage="split",
            attempt=1,
            repeat=repeat,
        )
        completion = self.backend.complete(bundle)
        ledger.record(completion, "split")
        lines = [line.strip() for line in completion.text.splitlines() if line.strip()]
        if len(lines) != 2:
            return None, None
        return lines[0], lines[1]

    def rewrite(self, task_2: str, first_response: dict, query, repeat: int,
                ledger: UsageLedger) -> str:
        """Completion 3: rewrite task 2 using the first call's response."""
        user = (
            f"second thought: {task_2}\n\n"
            f"response of the first query:\n{json.dumps(first_response, sort_keys=True)}"
        )
        bundle = PromptBundle(
            messages=(
                {"role": "system", "content": self.rewrite_prompt},
                {"role": "user", "content": user},
            ),
            query_id=query.id,
            stage="rewrite",
            attempt=1,
            repeat=repeat,
        )
        completion = self.backend.complete(bundle)
        ledger.record(completion, "rewrite")
        return completion.text.strip()

    def run(self, query, store: CrmStore, repeat: int = 1) -> PipelineResult:
        watch = StopWatch()
        ledger = UsageLedger()
        result = PipelineResult(
            query_id=query.id, pipeline=self.name, success=False,
            attempts_used=1, ledger=ledger,
        )

        def finish(failure: Optional[str]) -> PipelineResult:
            result.failure = failure
            result.latency = ledger.simulated_latency + watch.elapsed()
            return result

        task_1, task_2 = self.split(query, repeat, ledger)
        if task_1 is None:
            return finish("split_format")

        record_1, call_1, failure = self._generator.generate_call(
            task_1, query.gold_functions[0], query.id, "gen1", repeat, ledger
        )
        result.steps.append(record_1)
        if failure is not None:
            return finish(failure)
        response_1 = store.execute(call_1)
        ledger.add_latency(self.config.exec_latency_s)
        record_1.status = response_1.status
        record_1.response = response_1.document
        if not response_1.ok:
            return finish(f"http_{response_1.status}")

        rewritten = self.rewrite(task_2, response_1.document, query, repeat, ledger)
        if not rewritten:
            return finish("rewrite_empty")

        gold_2 = query.gold_functions[-1]
        record_2, call_2, failure = self._generator.generate_call(
            rewritten, gold_2, query.id, "gen2", repeat, ledger
        )
        result.steps.append(record_2)
        if failure is not None:
            return finish(failure)
        response_2 = store.execute(call_2)
        ledger.add_latency(self.config.exec_latency_s)
        record_2.status = response_2.status
        record_2.response = response_2.document
        if not response_2.ok:
            return finish(f"http_{response_2.status}")

        result.success = True
        return finish(None)
