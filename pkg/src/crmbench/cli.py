"""Command-line entry point.

Subcommands: `sim serve`, `bench run`, `bench report`, `dataset validate`,
`eval serve`.  Exit codes: 0 success, 1 domain error, 2 usage error.

Environment: `CRMBENCH_API_KEY` authenticates the HTTP model backend;
`CRMBENCH_BASE_URL` overrides its endpoint (default
https://api.openai.com/v1).
"""

from __future__ import annotations

import hashlib
import json
import secrets
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import click

from .backends import CostBook, HttpBackend, ScriptedBackend
from .bench.assets import (
    builtin_dataset_names,
    builtin_script_names,
    resolve_dataset,
    resolve_script,
)
from .bench.dataset import dataset_hash, load_dataset
from .bench.metrics import COVERAGE_MODES, compute_metrics, load_verdicts
from .bench.report import emit_report, render_csv, write_report_files
from .bench.runner import load_run_dir, run_suite
from .errors import CrmBenchError, UnknownModelError
from .pipelines import PIPELINE_ALIASES, PIPELINES
from .pipelines.base import PipelineConfig
from .registry import default_registry
from .sim import CrmStore, load_seed_fixture

DEFAULT_BASE_URL = "https://api.openai.com/v1"

_RUN_DEFAULTS = {
    "dataset": None,
    "pipeline": "thor",
    "backend": "scripted:thor_demo",
    "repeats": 10,
    "max_attempts": 3,
    "cost_model": None,
    "out": None,
    "parallelism": 4,
    "exec_latency": 0.1,
}


@dataclass
class RunConfig:
    """Everything `bench run` needs, after precedence resolution."""

    dataset: Optional[str]
    pipeline: str
    backend: str
    repeats: int
    max_attempts: int
    cost_model: Optional[str]
    out: Optional[str]
    parallelism: int
    exec_latency: float

    def canonical(self) -> dict:
        doc = asdict(self)
        resolved = resolve_dataset(self.dataset) if self.dataset else None
        if resolved is not None:
            doc["dataset"] = str(resolved.resolve())
        return doc

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


def validate_config(config: RunConfig) -> list[str]:
    """Every invariant violation, not just the first."""
    errors: list[str] = []
    if not config.dataset:
        errors.append("a dataset is required (--dataset)")
    elif resolve_dataset(config.dataset) is None:
        errors.append(f"dataset not found: {config.dataset}")
    if config.pipeline not in PIPELINE_ALIASES:
        errors.append(
            f"unknown pipeline {config.pipeline!r}; choose from "
            + ", ".join(sorted(PIPELINE_ALIASES))
        )
    backend = config.backend or ""
    if backend.startswith("scripted:"):
        spec = backend[len("scripted:") :]
        if resolve_script(spec) is None:
            errors.append(f"scripted backend file not found: {spec}")
    elif backend.startswith("http:"):
        if not backend[len("http:") :]:
            errors.append("http backend needs a model name: http:MODEL")
    else:
        errors.append(
            f"unknown backend spec {backend!r}; use scripted:FILE or http:MODEL"
        )
    if config.repeats < 1:
        errors.append("repeats must be >= 1")
    if config.parallelism < 1:
        errors.append("parallelism must be >= 1")
    if config.max_attempts < 1:
        errors.append("max attempts must be >= 1")
    if config.exec_latency < 0:
        errors.append("exec latency must be >= 0")
    if config.cost_model is not None and not Path(config.cost_model).is_file():
        errors.append(f"cost model file not found: {config.cost_model}")
    if config.out is not None and Path(config.out).is_file():
        errors.append(f"output directory is an existing file: {config.out}")
    return errors


def _fail(messages) -> "NoReturn":  # noqa: F821 - typing comment only
    if isinstance(messages, str):
        messages = [messages]
    for message in messages:
        click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _merge_config(file_path: Optional[str], flags: dict) -> RunConfig:
    """Precedence: flags > config file > defaults."""
    merged = dict(_RUN_DEFAULTS)
    if file_path:
        try:
            loaded = json.loads(Path(file_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as err:
            _fail(f"cannot read config file {file_path}: {err}")
        unknown = sorted(set(loaded) - set(_RUN_DEFAULTS))
        if unknown:
            _fail(f"unknown config keys: {', '.join(unknown)}")
        merged.update(loaded)
    merged.update({k: v for k, v in flags.items() if v is not None})
    return RunConfig(**merged)


@click.group()
def main():
    """Validator-guided function-calling pipelines, CRM simulator, and
    benchmark harness."""


# ---------------------------------------------------------------------------
# sim


@main.group()
def sim():
    """CRM simulator."""


@sim.command("serve")
@click.option("--fixture", default="seed", show_default=True,
              help="Fixture JSON path, or 'seed' for the built-in dataset.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8040, show_default=True, type=int)
def sim_serve(fixture: str, host: str, port: int):
    """Serve the simulator over HTTP and print its endpoint table."""
    if fixture == "seed":
        doc = load_seed_fixture()
    else:
        path = Path(fixture)
        if not path.is_file():
            _fail(f"fixture not found: {fixture}")
        doc = json.loads(path.read_text(encoding="utf-8"))
    store = CrmStore().load_fixture(doc)
    registry = default_registry()
    click.echo(f"simulator on http://{host}:{port} ({store.object_count()} objects)")
    click.echo(f"{'METHOD':7} PATH")
    for schema in sorted(registry.all(), key=lambda s: (s.path_template, s.http_method)):
        click.echo(f"{schema.http_method:7} {schema.path_template}")
    click.echo(f"{'POST':7} /__admin/reset")
    click.echo(f"{'GET':7} /__admin/state_hash")
    from .sim_server import serve as _serve

    _serve(host=host, port=port, store=store)


# ---------------------------------------------------------------------------
# bench


@main.group()
def bench():
    """Benchmark suite execution and reporting."""


@bench.command("run")
@click.option("--dataset", help="Dataset JSONL path or built-in name "
              f"({', '.join(builtin_dataset_names()) or 'none built in'}).")
@click.option("--pipeline",
              type=click.Choice(sorted(PIPELINE_ALIASES), case_sensitive=False),
              default=None, help="Pipeline to run. [default: thor]")
@click.option("--backend", default=None,
              help="scripted:FILE (path or built-in name, e.g. "
              "scripted:thor_demo) or http:MODEL. [default: scripted:thor_demo]")
@click.option("--repeats", type=int, default=None,
              help="Suite repetitions per query. [default: 10]")
@click.option("--max-attempts", type=int, default=None,
              help="Planner repair attempts. [default: 3]")
@click.option("--cost-model", default=None,
              help="Price table JSON (defaults to the built-in table).")
@click.option("--out", default=None, help="Output directory for run logs.")
@click.option("--parallelism", type=int, default=None,
              help="Worker threads over (query, repeat) cells. [default: 4]")
@click.option("--exec-latency", type=float, default=None,
              help="Injected seconds per simulator call. [default: 0.1]")
@click.option("--config", "config_file", default=None,
              help="JSON config file; flags override its values.")
def bench_run(config_file, **flags):
    """Run a pipeline over a dataset, repeatedly, and persist run logs."""
    config = _merge_config(config_file, flags)
    errors = validate_config(config)
    if errors:
        _fail(errors)

    canonical = config.canonical()
    click.echo(json.dumps(canonical, sort_keys=True, indent=2))

    registry = default_registry()
    pipeline_cls = PIPELINES[PIPELINE_ALIASES[config.pipeline]]
    backend_spec = config.backend
    if backend_spec.startswith("scripted:"):
        script_path = resolve_script(backend_spec[len("scripted:") :])
        backend = ScriptedBackend.from_jsonl(script_path)
        model_name = "scripted"
    else:
        model_name = backend_spec[len("http:") :]
        import os

        backend = HttpBackend(
            base_url=os.environ.get("CRMBENCH_BASE_URL", DEFAULT_BASE_URL),
            model=model_name,
        )
    pipeline = pipeline_cls(
        backend,
        registry,
        PipelineConfig(
            max_attempts=config.max_attempts,
            exec_latency_s=config.exec_latency,
        ),
    )

    dataset_path = resolve_dataset(config.dataset)
    try:
        records = load_dataset(dataset_path, registry)
        matrix = run_suite(
            pipeline,
            records,
            repeats=config.repeats,
            max_workers=config.parallelism,
            fixture_root=dataset_path.parent,
            out_dir=config.out,
            extra_meta={
                "backend": backend_spec,
                "model": model_name,
                "dataset_path": str(dataset_path.resolve()),
                "dataset_hash": dataset_hash(dataset_path),
                "config": canonical,
                "config_hash": config.config_hash(),
            },
        )
    except CrmBenchError as err:
        _fail(str(err))

    if config.out:
        out = Path(config.out)
        (out / "config.json").write_text(
            json.dumps(canonical, sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
    passes = sum(1 for cell in matrix.all_cells() if cell.passed)
    click.echo(
        f"ran {matrix.total_cells()} cells "
        f"({len(matrix.query_ids)} queries x {matrix.repeats} repeats): "
        f"{passes} pass, {matrix.total_cells() - passes} fail"
        + (f"; logs in {config.out}" if config.out else "")
    )


def _auto_coverage(matrix, verdicts) -> str:
    if not verdicts:
        return "software"
    have = {(v.query_id, v.repeat) for v in verdicts}
    eligible = [
        qid for qid in matrix.query_ids if matrix.cell(qid, 1).passed
    ]
    if all((qid, 1) in have for qid in eligible):
        return "full"
    return "sampled"


@bench.command("report")
@click.option("--runs", "run_dirs", multiple=True, required=True,
              help="Run directory from `bench run --out` (repeatable).")
@click.option("--format", "fmt", type=click.Choice(["md", "json"]),
              default="md", show_default=True)
@click.option("--coverage",
              type=click.Choice(("auto",) + COVERAGE_MODES), default="auto",
              show_default=True,
              help="Human-review coverage requirement for accuracy.")
@click.option("--cost-model", default=None,
              help="Price table JSON (defaults to the built-in table).")
@click.option("--out", default=None,
              help="Directory for report files and figures "
              "[default: the run directory; required for multiple --runs].")
def bench_report(run_dirs, fmt, coverage, cost_model, out):
    """Compute metrics from run logs; write tables, CSV and figures."""
    if out is None:
        if len(run_dirs) > 1:
            raise click.UsageError("--out is required with multiple --runs")
        out = run_dirs[0]
    book = CostBook.from_file(cost_model) if cost_model else CostBook.default()

    reports = []
    matrices = []
    verdict_lists = []
    models = []
    try:
        for run_dir in run_dirs:
            run_path = Path(run_dir)
            if not (run_path / "runs.jsonl").is_file():
                _fail(f"not a run directory (no runs.jsonl): {run_dir}")
            matrix = load_run_dir(run_path)
            verdict_path = run_path / "verdicts.jsonl"
            verdicts = (
                load_verdicts(verdict_path) if verdict_path.is_file() else []
            )
            model_name = matrix.meta.get("model", "scripted")
            try:
                model = book.get(model_name)
            except UnknownModelError:
                model = None
            mode = (
                _auto_coverage(matrix, verdicts)
                if coverage == "auto"
                else coverage
            )
            reports.append(
                compute_metrics(
                    matrix, verdicts=verdicts, cost_model=model, coverage=mode
                )
            )
            matrices.append(matrix)
            verdict_lists.append(verdicts)
            models.append(model)
    except CrmBenchError as err:
        _fail(str(err))

    out_path = Path(out)
    if len(reports) == 1:
        write_report_files(
            matrices[0],
            reports[0],
            out_path,
            cost_model=models[0],
            verdicts=verdict_lists[0],
        )
    else:
        out_path.mkdir(parents=True, exist_ok=True)
        (out_path / "report.json").write_text(
            emit_report(reports, "json"), encoding="utf-8"
        )
        (out_path / "report.md").write_text(
            emit_report(reports, "md"), encoding="utf-8"
        )
        for matrix, verdicts, model in zip(matrices, verdict_lists, models):
            csv_path = out_path / f"results_{matrix.pipeline}.csv"
            csv_path.write_text(
                render_csv(matrix, cost_model=model, verdicts=verdicts),
                encoding="utf-8",
            )
        from .bench.figures import render_figures

        render_figures(reports, out_path)

    click.echo(emit_report(reports[0] if len(reports) == 1 else reports, fmt),
               nl=False)


# ---------------------------------------------------------------------------
# dataset


@main.group()
def dataset():
    """Dataset utilities."""


@dataset.command("validate")
@click.argument("path")
def dataset_validate(path: str):
    """Validate a dataset file; exit 0 only if every record is well-formed."""
    resolved = resolve_dataset(path)
    if resolved is None:
        _fail(f"dataset not found: {path}")
    try:
        records = load_dataset(resolved)
    except CrmBenchError as err:
        _fail(str(err))
    by_n: dict[int, int] = {}
    by_category: dict[str, int] = {}
    for record in records:
        by_n[record.n_calls] = by_n.get(record.n_calls, 0) + 1
        by_category[record.category] = by_category.get(record.category, 0) + 1
    click.echo(f"{resolved}: {len(records)} records OK")
    click.echo(
        "  calls: "
        + ", ".join(f"N={n}: {count}" for n, count in sorted(by_n.items()))
    )
    click.echo(
        "  categories: "
        + ", ".join(f"{c}: {n}" for c, n in sorted(by_category.items()))
    )


# `bench dataset validate F` works as well as `dataset validate F`.
bench.add_command(dataset, name="dataset")


# ---------------------------------------------------------------------------
# eval


@main.group("eval")
def eval_group():
    """Blind human-evaluation service."""


@eval_group.command("serve")
@click.option("--runs", "run_dirs", multiple=True, required=True,
              help="Run directory from `bench run --out` (repeatable).")
@click.option("--token", default=None,
              help="Shared evaluator token [default: generated and printed].")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8801, show_default=True, type=int)
@click.option("--ui", "ui_dir", default=None,
              help="Static UI directory [default: ./frontend/dist if present].")
@click.option("--lease", "lease_seconds", default=120.0, show_default=True,
              type=float, help="Item lease duration in seconds.")
@click.option("--passing-only", is_flag=True,
              help="Queue only software-passing designated runs.")
def eval_serve(run_dirs, token, host, port, ui_dir, lease_seconds,
               passing_only):
    """Serve anonymized review items and collect five-criteria verdicts."""
    for run_dir in run_dirs:
        if not (Path(run_dir) / "runs.jsonl").is_file():
            _fail(f"not a run directory (no runs.jsonl): {run_dir}")
    token = token or secrets.token_hex(16)
    if ui_dir is None:
        candidate = Path("frontend") / "dist"
        ui_dir = str(candidate) if candidate.is_dir() else None
    from .eval_service import serve as _serve

    click.echo(f"review service on http://{host}:{port}  token: {token}")
    if ui_dir:
        click.echo(f"serving UI from {ui_dir}")
    try:
        _serve(
            run_dirs,
            auth_token=token,
            host=host,
            port=port,
            ui_dir=ui_dir,
            passing_only=passing_only,
            lease_seconds=lease_seconds,
        )
    except CrmBenchError as err:
        _fail(str(err))


if __name__ == "__main__":
    main()
