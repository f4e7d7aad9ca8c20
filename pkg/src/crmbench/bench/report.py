"""Report rendering: stable JSON, markdown tables, and per-query CSV."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Optional, Sequence, Union

from ..backends import CostModel
from .dataset import CATEGORIES
from .metrics import DESIGNATED_REPEAT, HumanVerdict, MetricsReport, _verdict_index
from .runner import RunMatrix
from .scaling import format_growth

REPORT_FORMATS = ("json", "markdown")


def _pct(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.1f}%"


def _latency(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.2f}"


def _cost(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.2f}"


def render_json(report: MetricsReport) -> str:
    """Canonical JSON: identical inputs produce byte-identical output."""
    return json.dumps(report.to_doc(), sort_keys=True, indent=2) + "\n"


def _headline_table(reports: Sequence[MetricsReport]) -> list[str]:
    lines = [
        "| Pipeline | Accuracy | Reliability | Latency (s) | Cost ($/1k queries) |",
        "| --- | ---: | ---: | ---: | ---: |",
    ]
    for report in reports:
        lines.append(
            f"| {report.pipeline} | {_pct(report.accuracy_percent)} |"
            f" {_pct(report.reliability_percent)} |"
            f" {_latency(report.mean_latency_s)} |"
            f" {_cost(report.cost_per_1000)} |"
        )
    return lines


def _category_table(reports: Sequence[MetricsReport]) -> list[str]:
    header = "| Pipeline | " + " | ".join(CATEGORIES) + " |"
    rule = "| --- |" + " ---: |" * len(CATEGORIES)
    lines = [header, rule]
    for report in reports:
        cells = " | ".join(
            _pct(report.per_category.get(category)) for category in CATEGORIES
        )
        lines.append(f"| {report.pipeline} | {cells} |")
    return lines


def _scaling_table(reports: Sequence[MetricsReport]) -> list[str]:
    scaled = [r for r in reports if r.scaling]
    if not scaled:
        return []
    lines = [
        "| Pipeline | N=1 latency (s) | N=2 latency (s) | Growth | α | Regime |",
        "| --- | ---: | ---: | ---: | ---: | --- |",
    ]
    for report in scaled:
        fit = report.scaling
        points = fit["points"]
        first, last = points[0], points[-1]
        lines.append(
            f"| {report.pipeline} | {_latency(first[1])} | {_latency(last[1])} |"
            f" {format_growth(fit['growth_percent'])} |"
            f" {fit['alpha']:.3f} | {fit['classification']} |"
        )
    return lines


def render_markdown(
    reports: Union[MetricsReport, Sequence[MetricsReport]],
) -> str:
    """Markdown tables: headline metrics, category breakdown, scaling."""
    if isinstance(reports, MetricsReport):
        reports = [reports]
    first = reports[0]
    lines = ["# Benchmark report", ""]
    lines.append(
        f"{first.queries} queries x {first.repeats} repeats;"
        f" human coverage: {first.human_coverage.get('mode', 'n/a')}"
        f" ({first.human_coverage.get('covered', 0)}/"
        f"{first.human_coverage.get('eligible', 0)} passing runs reviewed)."
    )
    lines += ["", "## Headline metrics", ""]
    lines += _headline_table(reports)
    lines += ["", "## Accuracy by category", ""]
    lines += _category_table(reports)
    scaling = _scaling_table(reports)
    if scaling:
        lines += ["", "## Latency scaling", ""]
        lines += scaling
    for report in reports:
        if report.fluctuating:
            lines += [
                "",
                f"Fluctuating queries ({report.pipeline}): "
                + ", ".join(report.fluctuating),
            ]
    return "\n".join(lines) + "\n"


def emit_report(
    report: Union[MetricsReport, Sequence[MetricsReport]],
    format: str = "json",
) -> str:
    """Render a report document in the requested format."""
    if format in ("md", "markdown"):
        return render_markdown(report)
    if format == "json":
        if isinstance(report, MetricsReport):
            return render_json(report)
        docs = [r.to_doc() for r in report]
        return json.dumps(docs, sort_keys=True, indent=2) + "\n"
    raise ValueError(f"unknown report format {format!r}")


def render_csv(
    matrix: RunMatrix,
    cost_model: Optional[CostModel] = None,
    verdicts: Optional[Sequence[HumanVerdict]] = None,
) -> str:
    """Per-query results as delimited text."""
    index = _verdict_index(verdicts or [])
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(
        [
            "query_id",
            "category",
            "n_calls",
            "repeats",
            "pass_count",
            "consistent",
            "designated_pass",
            "human_all_pass",
            "mean_latency_s",
            "mean_cost_usd",
        ]
    )
    for qid in matrix.query_ids:
        row = matrix.row(qid)
        meta = matrix.query_meta[qid]
        pass_count = sum(1 for cell in row if cell.passed)
        verdict = index.get((qid, DESIGNATED_REPEAT))
        mean_latency = sum(cell.latency_s for cell in row) / len(row)
        if cost_model is None:
            mean_cost = ""
        else:
            mean_cost = f"{sum((cell.input_tokens * cost_model.input_per_million + cell.output_tokens * cost_model.output_per_million) / 1e6 for cell in row) / len(row):.6f}"
        writer.writerow(
            [
                qid,
                meta["category"],
                meta["n_calls"],
                matrix.repeats,
                pass_count,
                str(pass_count in (0, matrix.repeats)).lower(),
                str(matrix.cell(qid, DESIGNATED_REPEAT).passed).lower(),
                "" if verdict is None else str(verdict.all_pass).lower(),
                f"{mean_latency:.3f}",
                mean_cost,
            ]
        )
    return buffer.getvalue()


def write_report_files(
    matrix: RunMatrix,
    report: MetricsReport,
    out_dir: Union[str, Path],
    cost_model: Optional[CostModel] = None,
    verdicts: Optional[Sequence[HumanVerdict]] = None,
    figures: bool = True,
) -> dict[str, Path]:
    """Write report.json, report.md, results.csv and figures to a directory."""
    from .figures import render_figures

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    paths["json"] = out / "report.json"
    paths["json"].write_text(render_json(report), encoding="utf-8")
    paths["markdown"] = out / "report.md"
    paths["markdown"].write_text(render_markdown(report), encoding="utf-8")
    paths["csv"] = out / "results.csv"
    paths["csv"].write_text(
        render_csv(matrix, cost_model=cost_model, verdicts=verdicts),
        encoding="utf-8",
    )
    if figures:
        for name, path in render_figures([report], out).items():
            paths[name] = path
    return paths
