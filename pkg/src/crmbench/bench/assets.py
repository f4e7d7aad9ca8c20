"""Resolution of built-in benchmark assets by short name.

The package ships demo datasets and scripted model behaviors so the CLI
works out of the box: a `--dataset` or `scripted:` argument that is not an
existing file is looked up here (e.g. `demo_full` or `thor_demo`).
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Optional


def _bench_root():
    return resources.files("crmbench").joinpath("assets/bench")


def builtin_dataset_names() -> list[str]:
    return sorted(
        entry.name[: -len(".jsonl")]
        for entry in _bench_root().iterdir()
        if entry.is_file() and entry.name.endswith(".jsonl")
    )


def builtin_script_names() -> list[str]:
    return sorted(
        entry.name[: -len(".jsonl")]
        for entry in _bench_root().joinpath("scripts").iterdir()
        if entry.is_file() and entry.name.endswith(".jsonl")
    )


def _materialize(traversable) -> Path:
    # Editable and regular installs expose assets as real files.
    return Path(str(traversable))


def resolve_dataset(spec: str) -> Optional[Path]:
    """A dataset path: an existing file, or a built-in name."""
    candidate = Path(spec)
    if candidate.is_file():
        return candidate
    name = spec if spec.endswith(".jsonl") else f"{spec}.jsonl"
    builtin = _bench_root().joinpath(name)
    if builtin.is_file():
        return _materialize(builtin)
    return None


def resolve_script(spec: str) -> Optional[Path]:
    """A scripted-behavior path: an existing file, or a built-in name."""
    candidate = Path(spec)
    if candidate.is_file():
        return candidate
    name = spec if spec.endswith(".jsonl") else f"{spec}.jsonl"
    builtin = _bench_root().joinpath("scripts").joinpath(name)
    if builtin.is_file():
        return _materialize(builtin)
    return None
