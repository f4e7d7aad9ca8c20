"""Benchmark toolkit for LLM agents driving a simulated CRM API.

Core pieces: a function-schema registry, an in-memory CRM simulator with an
HTTP façade, a compact intermediate language for API calls, static plan
validators with a bounded repair loop, three agent pipelines, and a
benchmark harness with accuracy/reliability/latency/cost reporting.
"""

__version__ = "0.1.0"

from .registry import ApiCall, FunctionSchema, ParamSpec, SchemaRegistry, default_registry
from .timestamps import CURRENT_TIME, is_canonical_timestamp

__all__ = [
    "ApiCall",
    "FunctionSchema",
    "ParamSpec",
    "SchemaRegistry",
    "default_registry",
    "CURRENT_TIME",
    "is_canonical_timestamp",
    "__version__",
]
