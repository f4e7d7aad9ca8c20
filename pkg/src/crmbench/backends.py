"""Model backends: a chat-completion contract, a deterministic scripted
backend for tests, an OpenAI-compatible HTTP backend, and token/cost
accounting.

The scripted backend is the workhorse: responses are keyed by
(query_id, stage, attempt) — plus an optional repeat index for
per-repetition variation — and latency is injected into the ledger rather
than slept, so full benchmark runs finish in milliseconds.
"""

from __future__ import annotations

import json
import math
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Optional

from .errors import MissingScriptError, TransportError, UnknownModelError


@dataclass(frozen=True)
class Completion:
    text: str
    input_tokens: int
    output_tokens: int
    wall_latency: float

    def __post_init__(self):
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("token counts must be non-negative")
        if self.wall_latency < 0:
            raise ValueError("wall_latency must be non-negative")


@dataclass(frozen=True)
class PromptBundle:
    """Everything a backend needs to produce one completion.

    ``messages`` is a chat transcript [{role, content}, ...]. The routing
    fields (query_id, stage, attempt, repeat) exist so the scripted backend
    can address its canned responses; HTTP backends ignore them.
    """

    messages: tuple
    query_id: str = ""
    stage: str = ""
    attempt: int = 1
    repeat: int = 1

    def prompt_chars(self) -> int:
        return sum(len(m.get("content", "")) for m in self.messages)


def estimate_tokens(text: str) -> int:
    """Rough token count: ceil(utf-8 bytes / 4). Only an estimate — real
    provider usage numbers always win when available."""
    return math.ceil(len(text.encode("utf-8")) / 4)


class Backend:
    """Chat-completion contract all pipelines talk through."""

    def complete(self, bundle: PromptBundle) -> Completion:  # pragma: no cover
        raise NotImplementedError


@dataclass(frozen=True)
class ScriptKey:
    query_id: str
    stage: str
    attempt: int
    repeat: int = 0  # 0 = any repeat


class ScriptedBackend(Backend):
    """Returns canned responses keyed by (query_id, stage, attempt[, repeat]).

    Referentially transparent: lookups depend only on the key, never on
    call order, so concurrent pipelines can share one instance. With
    realtime=True the simulated latency is actually slept, for live demos.
    """

    def __init__(self, behaviors=(), realtime: bool = False):
        self._table: dict[ScriptKey, tuple[str, float]] = {}
        self.realtime = realtime
        for b in behaviors:
            self.add(**b)

    def add(self, query_id: str, stage: str, attempt: int, response: str,
            latency_s: float = 0.0, repeat: int = 0, **_ignored):
        key = ScriptKey(query_id, stage, int(attempt), int(repeat))
        if key in self._table:
            raise ValueError(f"duplicate script entry for {key}")
        self._table[key] = (response, float(latency_s))
        return self

    @classmethod
    def from_jsonl(cls, path, realtime: bool = False) -> "ScriptedBackend":
        backend = cls(realtime=realtime)
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                backend.add(**json.loads(line))
        return backend

    def complete(self, bundle: PromptBundle) -> Completion:
        exact = ScriptKey(bundle.query_id, bundle.stage, bundle.attempt, bundle.repeat)
        hit = self._table.get(exact)
        if hit is None:
            hit = self._table.get(ScriptKey(bundle.query_id, bundle.stage, bundle.attempt, 0))
        if hit is None:
            raise MissingScriptError(
                f"no scripted response for query_id={bundle.query_id!r} "
                f"stage={bundle.stage!r} attempt={bundle.attempt} repeat={bundle.repeat}"
            )
        text, latency = hit
        if self.realtime and latency > 0:
            time.sleep(latency)
        prompt_text = "\n".join(m.get("content", "") for m in bundle.messages)
        return Completion(
            text=text,
            input_tokens=estimate_tokens(prompt_text),
            output_tokens=estimate_tokens(text),
            wall_latency=latency,
        )


class HttpBackend(Backend):
    """Minimal OpenAI-compatible chat backend (POST {base_url}/chat/completions).

    In-flight requests are bounded by a semaphore so concurrent benchmark
    cells cannot stampede a provider.
    """

    def __init__(self, base_url: str, model: str, api_key: Optional[str] = None,
                 max_in_flight: int = 4, timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key or os.environ.get("CRMBENCH_API_KEY", "")
        self.timeout = timeout
        self._gate = threading.Semaphore(max_in_flight)

    def complete(self, bundle: PromptBundle) -> Completion:
        import httpx

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {"model": self.model, "messages": list(bundle.messages)}
        started = time.monotonic()
        with self._gate:
            try:
                response = httpx.post(
                    f"{self.base_url}/chat/completions",
                    json=payload,
                    headers=headers,
                    timeout=self.timeout,
                )
                response.raise_for_status()
            except httpx.HTTPError as exc:
                raise TransportError(str(exc)) from exc
        elapsed = time.monotonic() - started
        doc = response.json()
        text = doc["choices"][0]["message"]["content"]
        usage = doc.get("usage", {})
        prompt_text = "\n".join(m.get("content", "") for m in bundle.messages)
        return Completion(
            text=text,
            input_tokens=int(usage.get("prompt_tokens", estimate_tokens(prompt_text))),
            output_tokens=int(usage.get("completion_tokens", estimate_tokens(text))),
            wall_latency=elapsed,
        )


# ---------------------------------------------------------------------------
# cost accounting


@dataclass(frozen=True)
class CostModel:
    """Per-model prices in currency per 1,000,000 tokens."""

    input_per_million: float
    output_per_million: float

    def __post_init__(self):
        if self.input_per_million < 0 or self.output_per_million < 0:
            raise ValueError("prices must be non-negative")


class CostBook:
    def __init__(self, models: Optional[dict] = None):
        self._models = dict(models or {})

    @classmethod
    def from_file(cls, path) -> "CostBook":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        models = {
            name: CostModel(entry["input_per_million"], entry["output_per_million"])
            for name, entry in doc.items()
        }
        return cls(models)

    @classmethod
    def default(cls) -> "CostBook":
        from importlib import resources

        ref = resources.files("crmbench").joinpath("assets/cost_models.json")
        with resources.as_file(ref) as path:
            return cls.from_file(path)

    def get(self, model: str) -> CostModel:
        try:
            return self._models[model]
        except KeyError:
            raise UnknownModelError(f"no prices configured for model {model!r}") from None

    def names(self):
        return sorted(self._models)


@dataclass
class UsageLedger:
    """Accumulates token, latency and call counts for one pipeline run."""

    input_tokens: int = 0
    output_tokens: int = 0
    simulated_latency: float = 0.0
    completions: int = 0
    stage_counts: dict = field(default_factory=dict)

    def record(self, completion: Completion, stage: str = ""):
        self.input_tokens += completion.input_tokens
        self.output_tokens += completion.output_tokens
        self.simulated_latency += completion.wall_latency
        self.completions += 1
        if stage:
            self.stage_counts[stage] = self.stage_counts.get(stage, 0) + 1

    def add_latency(self, seconds: float):
        self.simulated_latency += seconds


def cost_of(ledger: UsageLedger, model: CostModel) -> float:
    """Cost of one run's usage under a price model."""
    return (
        ledger.input_tokens * model.input_per_million / 1e6
        + ledger.output_tokens * model.output_per_million / 1e6
    )
