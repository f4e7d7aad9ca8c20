"""Shared pipeline plumbing: result records, prompt assets, response
binding documents, and the tool-use call format baselines emit."""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

from ..backends import UsageLedger
from ..registry import ApiCall, SchemaRegistry

DEFAULT_OWNER_ID = "325420860"


@dataclass
class PipelineConfig:
    owner_id: str = DEFAULT_OWNER_ID
    max_attempts: int = 3
    max_plan_steps: int = 4
    exec_latency_s: float = 0.0  # injected per executed API call (scripted runs)
    use_ir: bool = True
    use_query_category: bool = True
    prompt_variant: str = "claude"  # single-API system prompt flavor
    retrieval_k: int = 5


@dataclass
class StepRecord:
    """One executed (or attempted) API call within a run."""

    call_text: str
    function_name: Optional[str] = None
    method: Optional[str] = None
    path: Optional[str] = None
    body: Optional[dict] = None
    status: Optional[int] = None
    response: Optional[dict] = None

    def to_doc(self) -> dict:
        return {
            "call_text": self.call_text,
            "function": self.function_name,
            "method": self.method,
            "path": self.path,
            "body": self.body,
            "status": self.status,
            "response": self.response,
        }

    @classmethod
    def for_call(cls, text: str, call: ApiCall) -> "StepRecord":
        return cls(
            call_text=text,
            function_name=call.function_name,
            method=call.method,
            path=call.path,
            body=call.body,
        )


@dataclass
class PipelineResult:
    query_id: str
    pipeline: str
    success: bool
    attempts_used: int
    steps: list = field(default_factory=list)
    latency: float = 0.0
    ledger: UsageLedger = field(default_factory=UsageLedger)
    failure: Optional[str] = None
    verdicts: list = field(default_factory=list)

    def to_doc(self) -> dict:
        return {
            "query_id": self.query_id,
            "pipeline": self.pipeline,
            "success": self.success,
            "attempts_used": self.attempts_used,
            "steps": [s.to_doc() for s in self.steps],
            "latency": round(self.latency, 6),
            "usage": {
                "input_tokens": self.ledger.input_tokens,
                "output_tokens": self.ledger.output_tokens,
                "completions": self.ledger.completions,
                "stages": dict(sorted(self.ledger.stage_counts.items())),
            },
            "failure": self.failure,
            "verdicts": self.verdicts,
        }


def load_prompt(name: str, owner_id: str = DEFAULT_OWNER_ID) -> str:
    """A prompt asset by file stem, with the owner id substituted."""
    ref = resources.files("crmbench").joinpath(f"assets/prompts/{name}.txt")
    text = ref.read_text(encoding="utf-8")
    return text.replace("<owner_id>", owner_id)


def binding_doc(document: dict) -> dict:
    """Flatten a response for placeholder lookup.

    Adds `ids` (every result id), promotes the first result's id and
    properties to the top level, and flattens a single object's properties,
    so `$1.id`, `$1.ids` and `$1.amount` all resolve naturally.
    """
    doc = dict(document)
    results = doc.get("results")
    if isinstance(results, list):
        ids = [r["id"] for r in results if isinstance(r, dict) and "id" in r]
        doc.setdefault("ids", ids)
        if results and isinstance(results[0], dict):
            first = results[0]
            if "id" in first:
                doc.setdefault("id", first["id"])
            for key, value in first.get("properties", {}).items():
                doc.setdefault(key, value)
    properties = document.get("properties")
    if isinstance(properties, dict):
        for key, value in properties.items():
            doc.setdefault(key, value)
    return doc


_JSON_BLOCK_RE = re.compile(r"\{.*\}", re.S)


def parse_tool_use(text: str) -> Optional[dict]:
    """Extract the {"name": ..., "input": {...}} object from model output."""
    m = _JSON_BLOCK_RE.search(text)
    if not m:
        return None
    try:
        doc = json.loads(m.group(0))
    except ValueError:
        return None
    if not isinstance(doc, dict) or "name" not in doc:
        return None
    if not isinstance(doc.get("input", {}), dict):
        return None
    return doc


def call_from_tool_use(doc: dict, registry: SchemaRegistry) -> ApiCall:
    """Build the concrete call a tool-use document denotes."""
    schema = registry.get(doc["name"])
    inputs = dict(doc.get("input", {}))
    path = schema.path_template
    for param in schema.path_params():
        if param in inputs:
            path = path.replace(f"{{{param}}}", str(inputs.pop(param)))
    return ApiCall(
        function_name=schema.name,
        method=schema.http_method,
        path=path,
        body=inputs,
    )


def render_tools(schemas) -> str:
    """Schema corpus serialized for a tools-in-prompt adapter."""
    return json.dumps([s.to_doc() for s in schemas], indent=1)


class StopWatch:
    def __init__(self):
        self.started = time.monotonic()

    def elapsed(self) -> float:
        return time.monotonic() - self.started
