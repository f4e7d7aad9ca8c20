"""Shared fixtures: demo datasets, scripted pipelines, run matrices, and a
seeded generator of grammar-valid call-language programs."""

from __future__ import annotations

import pytest
from corpus import generate_corpus

from crmbench.backends import CostBook, ScriptedBackend
from crmbench.bench.assets import resolve_dataset, resolve_script
from crmbench.bench.dataset import load_dataset
from crmbench.bench.metrics import CRITERION_FIELDS, HumanVerdict
from crmbench.bench.runner import run_suite
from crmbench.pipelines import CompositePipeline, MultiApiPipeline, SingleApiPipeline
from crmbench.pipelines.base import PipelineConfig
from crmbench.registry import default_registry
from crmbench.sim import seeded_store

# Latency model used by the scripted demo suites: every scripted completion
# carries 1.0 s and every simulator call adds this much.
EXEC_LATENCY = 0.1

PIPELINE_CLASSES = {
    "composite": CompositePipeline,
    "single_api": SingleApiPipeline,
    "multi_api": MultiApiPipeline,
}


def build_pipeline(kind: str, script: str, registry, **config_kwargs):
    """A pipeline over one of the shipped scripted behavior files."""
    backend = ScriptedBackend.from_jsonl(resolve_script(script))
    config_kwargs.setdefault("exec_latency_s", EXEC_LATENCY)
    config = PipelineConfig(**config_kwargs)
    return PIPELINE_CLASSES[kind](backend, registry, config)


@pytest.fixture(scope="session")
def registry():
    return default_registry()


@pytest.fixture
def store():
    return seeded_store()


@pytest.fixture(scope="session")
def full_records(registry):
    return load_dataset(resolve_dataset("demo_full"), registry)


@pytest.fixture(scope="session")
def single_records(registry):
    return load_dataset(resolve_dataset("demo_single"), registry)


@pytest.fixture(scope="session")
def multi_records(registry):
    return load_dataset(resolve_dataset("demo_multi"), registry)


@pytest.fixture(scope="session")
def scripted_cost_model():
    return CostBook.default().get("scripted")


# -- session run matrices (shared; never mutated by tests) -------------------


@pytest.fixture(scope="session")
def thor_matrix(registry, full_records):
    pipeline = build_pipeline("composite", "thor_demo", registry)
    return run_suite(pipeline, full_records, repeats=10)


@pytest.fixture(scope="session")
def single_matrix(registry, single_records):
    pipeline = build_pipeline("single_api", "single_demo", registry)
    return run_suite(pipeline, single_records, repeats=10)


@pytest.fixture(scope="session")
def multi_matrix(registry, multi_records):
    pipeline = build_pipeline("multi_api", "multi_demo", registry)
    return run_suite(pipeline, multi_records, repeats=10)


@pytest.fixture(scope="session")
def flaky_matrix(registry, full_records):
    pipeline = build_pipeline("composite", "thor_flaky", registry)
    return run_suite(pipeline, full_records, repeats=10)


@pytest.fixture(scope="session")
def allfail_matrix(registry, full_records):
    pipeline = build_pipeline("composite", "thor_allfail", registry)
    return run_suite(pipeline, full_records, repeats=10)


@pytest.fixture(scope="session")
def make_verdicts():
    """Factory for all-true verdicts over a matrix's passing designated runs.

    ``overrides`` flips individual criteria: {query_id: {criterion: False}}.
    """

    def _make(matrix, overrides=None, evaluator="reviewer-1"):
        overrides = overrides or {}
        verdicts = []
        for qid in matrix.query_ids:
            if not matrix.cell(qid, 1).passed:
                continue
            flags = {name: True for name in CRITERION_FIELDS}
            flags.update(overrides.get(qid, {}))
            verdicts.append(
                HumanVerdict(
                    query_id=qid,
                    repeat=1,
                    evaluator_id=evaluator,
                    timestamp="2024-05-05T00:00:00+00:00",
                    **flags,
                )
            )
        return verdicts

    return _make


# -- generated call corpus ---------------------------------------------------


@pytest.fixture(scope="session")
def ir_corpus():
    """The 500-call generated corpus used for round-trip checks."""
    return generate_corpus(500)
