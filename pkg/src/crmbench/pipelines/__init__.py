from .base import PipelineConfig, PipelineResult, StepRecord, binding_doc, load_prompt
from .composite import CompositePipeline
from .single_api import SingleApiPipeline, retrieve_top_k
from .multi_api import MultiApiPipeline

PIPELINES = {
    "composite": CompositePipeline,
    "single_api": SingleApiPipeline,
    "multi_api": MultiApiPipeline,
}

# Accepted spellings for --pipeline; canonical ids are the PIPELINES keys.
PIPELINE_ALIASES = {
    "composite": "composite",
    "thor": "composite",
    "single": "single_api",
    "single_api": "single_api",
    "multi": "multi_api",
    "multi_api": "multi_api",
}

__all__ = [
    "PipelineConfig",
    "PipelineResult",
    "StepRecord",
    "binding_doc",
    "load_prompt",
    "CompositePipeline",
    "SingleApiPipeline",
    "MultiApiPipeline",
    "retrieve_top_k",
    "PIPELINES",
    "PIPELINE_ALIASES",
]
