"""Composite-plan pipeline: one planning call, static validation with
corrective feedback in a bounded repair loop, then execution with
placeholder injection.

The planner emits the whole multi-call plan in a single completion. Static
validators inspect it; on failure their feedback is appended to the
conversation and the planner tries again, up to max_attempts. A valid plan
executes step by step, binding each placeholder to the recorded response of
the step that produced it. Computed arguments (calc) resolve statically
when possible, otherwise through one helper completion.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from ..backends import Backend, PromptBundle, UsageLedger
from ..errors import (
    InjectionError,
    IrSyntaxError,
    MappingError,
    MaxAttemptsExceededError,
    MissingPathError,
    NoMatchingSchemaError,
    UnboundStepError,
)
from ..ir import CalcExpr, IntermediateCall, bind_placeholders, compile_call, parse, render
from ..registry import SchemaRegistry
from ..sim import CrmStore
from ..validator import PlanValidator, ValidatorVerdict, Violation, render_feedback
from .base import PipelineConfig, PipelineResult, StepRecord, StopWatch, binding_doc, load_prompt

_STATIC_CALC_RE = re.compile(r"^set\b.*\bto\s+(-?\d+(?:\.\d+)?)\s*$", re.I)
_NUMBER_RE = re.compile(r"^-?\d+(?:\.\d+)?$")


@dataclass
class Plan:
    steps: list
    source_attempt: int
    raw_text: str = ""


def _synthetic_verdict(feedback: str, step_index: Optional[int] = None) -> ValidatorVerdict:
    return ValidatorVerdict.failing([Violation("R0", step_index, feedback)])


class CompositePipeline:
    name = "composite"

    def __init__(
        self,
        backend: Backend,
        registry: SchemaRegistry,
        config: Optional[PipelineConfig] = None,
        validator: Optional[PlanValidator] = None,
    ):
        self.backend = backend
        self.registry = registry
        self.config = config or PipelineConfig()
        self.validator = validator or PlanValidator()
        self.system_prompt = load_prompt("composite_planner", self.config.owner_id)

    # -- planning ----------------------------------------------------------

    def parse_plan(self, text: str, attempt: int) -> tuple[Optional[Plan], Optional[ValidatorVerdict]]:
        lines = [line.strip() for line in text.splitlines() if line.strip()]
        if not lines:
            return None, _synthetic_verdict(
                "Your plan was empty. Emit one call per line using the call language."
            )
        if len(lines) > self.config.max_plan_steps:
            return None, _synthetic_verdict(
                f"Your plan has {len(lines)} steps but at most "
                f"{self.config.max_plan_steps} are allowed. Merge or drop steps."
            )
        steps = []
        for index, line in enumerate(lines, start=1):
            try:
                steps.append(parse(line))
            except IrSyntaxError as exc:
                return None, _synthetic_verdict(
                    f"Step {index} could not be parsed: {exc}. Emit one call per "
                    f"line using the call language.",
                    step_index=index,
                )
        return Plan(steps=steps, source_attempt=attempt, raw_text=text), None

    def _resolve_static_calcs(
        self, plan: Plan, query_id: str, attempt: int, repeat: int, ledger: UsageLedger
    ) -> Optional[ValidatorVerdict]:
        """Resolve ref-free calc() args to literals before validation."""
        for step_no, step in enumerate(plan.steps, start=1):
            new_args = []
            for key, value in step.args:
                if isinstance(value, CalcExpr) and "$" not in value.instruction:
                    literal, error = self.math_helper(
                        value.instruction, query_id, attempt, repeat, ledger
                    )
                    if error is not None:
                        return _synthetic_verdict(error, step_index=step_no)
                    value = literal
                new_args.append((key, value))
            step.args = tuple(new_args)
        return None

    def math_helper(
        self, instruction: str, query_id: str, attempt: int, repeat: int,
        ledger: UsageLedger,
    ) -> tuple[Optional[str], Optional[str]]:
        """Resolve a computed argument; (value, None) or (None, error)."""
        text = instruction.strip()
        if _NUMBER_RE.match(text):
            return text, None
        m = _STATIC_CALC_RE.match(text)
        if m:
            return m.group(1), None
        bundle = PromptBundle(
            messages=(
                {
                    "role": "system",
                    "content": "Compute the value the instruction asks for. "
                    "Reply with the number alone.",
                },
                {"role": "user", "content": text},
            ),
            query_id=query_id,
            stage="helper",
            attempt=attempt,
            repeat=repeat,
        )
        completion = self.backend.complete(bundle)
        ledger.record(completion, "helper")
        answer = completion.text.strip()
        if not _NUMBER_RE.match(answer):
            return None, (
                f"The computed value for {instruction!r} came back non-numeric "
                f"({answer!r}). Use a plain number."
            )
        return answer, None

    # -- repair loop -------------------------------------------------------

    def repair_loop(self, query, repeat: int, ledger: UsageLedger, verdict_log: list) -> Plan:
        """Generate until a plan passes validation; raises after max_attempts."""
        messages = [
            {"role": "system", "content": self.system_prompt},
            {"role": "user", "content": query.text},
        ]
        category = query.category if self.config.use_query_category else None
        last_verdict = None
        for attempt in range(1, self.config.max_attempts + 1):
            bundle = PromptBundle(
                messages=tuple(messages),
                query_id=query.id,
                stage="plan",
                attempt=attempt,
                repeat=repeat,
            )
            completion = self.backend.complete(bundle)
            ledger.record(completion, "plan")

            plan, verdict = self.parse_plan(completion.text, attempt)
            if verdict is None:
                verdict = self._resolve_static_calcs(plan, query.id, attempt, repeat, ledger)
            if verdict is None:
                verdict = self.validator.validate_plan(plan.steps, self.registry, category)
            verdict_log.append(verdict.to_doc())
            if verdict.passed:
                return plan
            last_verdict = verdict
            messages.append({"role": "assistant", "content": completion.text})
            messages.append({"role": "user", "content": render_feedback(verdict)})
        raise MaxAttemptsExceededError(self.config.max_attempts, last_verdict)

    # -- execution ---------------------------------------------------------

    def execute_plan(self, plan: Plan, store: CrmStore, query_id: str,
                     repeat: int, ledger: UsageLedger) -> tuple[list, bool, Optional[str]]:
        steps: list[StepRecord] = []
        responses: dict[int, dict] = {}
        for index, ir_step in enumerate(plan.steps, start=1):
            try:
                bound = bind_placeholders(ir_step, responses)
            except UnboundStepError as exc:
                raise InjectionError(index, str(exc)) from exc
            except MissingPathError as exc:
                raise InjectionError(exc.step_index, exc.path) from exc

            failure = self._resolve_runtime_calcs(
                bound, query_id, plan.source_attempt, repeat, ledger
            )
            if failure is not None:
                steps.append(StepRecord(call_text=failure))
                return steps, False, "helper_non_numeric"

            try:
                call = compile_call(bound, self.registry)
            except (MappingError, NoMatchingSchemaError) as exc:
                steps.append(StepRecord(call_text=f"step {index}: {exc}"))
                return steps, False, "compile_error"

            record = StepRecord.for_call(render(bound), call)
            response = store.execute(call)
            ledger.add_latency(self.config.exec_latency_s)
            record.status = response.status
            record.response = response.document
            steps.append(record)
            if not response.ok:
                return steps, False, f"http_{response.status}"
            responses[index] = binding_doc(response.document)
        return steps, True, None

    def _resolve_runtime_calcs(self, step: IntermediateCall, query_id: str,
                               attempt: int, repeat: int, ledger: UsageLedger) -> Optional[str]:
        new_args = []
        for key, value in step.args:
            if isinstance(value, CalcExpr):
                literal, error = self.math_helper(
                    value.instruction, query_id, attempt, repeat, ledger
                )
                if error is not None:
                    return error
                value = literal
            new_args.append((key, value))
        step.args = tuple(new_args)
        return None

    # -- entry point -------------------------------------------------------

    def run(self, query, store: CrmStore, repeat: int = 1) -> PipelineResult:
        watch = StopWatch()
        ledger = UsageLedger()
        verdict_log: list = []
        result = PipelineResult(
            query_id=query.id, pipeline=self.name, success=False, attempts_used=0,
            ledger=ledger, verdicts=verdict_log,
        )
        try:
            plan = self.repair_loop(query, repeat, ledger, verdict_log)
        except MaxAttemptsExceededError:
            result.attempts_used = self.config.max_attempts
            result.failure = "max_attempts_exceeded"
            result.latency = ledger.simulated_latency + watch.elapsed()
            return result
        result.attempts_used = plan.source_attempt
        try:
            steps, ok, failure = self.execute_plan(plan, store, query.id, repeat, ledger)
        except InjectionError as exc:
            result.failure = f"injection_error:{exc.step_index}.{exc.path}"
            result.latency = ledger.simulated_latency + watch.elapsed()
            return result
        result.steps = steps
        result.success = ok
        result.failure = failure
        result.latency = ledger.simulated_latency + watch.elapsed()
        return result
