"""Static figure rendering for benchmark reports (headless Agg backend)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .dataset import CATEGORIES
from .metrics import MetricsReport

_DPI = 120


def _save(fig, path: Path):
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)


def _headline_figure(reports: Sequence[MetricsReport], path: Path):
    labels = [r.pipeline for r in reports]
    accuracy = [r.accuracy_percent for r in reports]
    reliability = [
        0.0 if r.reliability_percent is None else r.reliability_percent
        for r in reports
    ]
    x = np.arange(len(labels))
    width = 0.38
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    ax.bar(x - width / 2, accuracy, width, label="Accuracy")
    ax.bar(x + width / 2, reliability, width, label="Reliability")
    ax.set_xticks(x)
    ax.set_xticklabels(labels)
    ax.set_ylim(0, 105)
    ax.set_ylabel("%")
    ax.set_title("Accuracy and reliability")
    ax.legend()
    _save(fig, path)


def _category_figure(reports: Sequence[MetricsReport], path: Path):
    x = np.arange(len(CATEGORIES))
    width = 0.8 / max(1, len(reports))
    fig, ax = plt.subplots(figsize=(7.2, 3.6))
    for offset, report in enumerate(reports):
        values = [
            report.per_category.get(category) or 0.0
            for category in CATEGORIES
        ]
        ax.bar(
            x + (offset - (len(reports) - 1) / 2) * width,
            values,
            width,
            label=report.pipeline,
        )
    ax.set_xticks(x)
    ax.set_xticklabels(CATEGORIES, fontsize=8)
    ax.set_ylim(0, 105)
    ax.set_ylabel("Accuracy %")
    ax.set_title("Accuracy by operation category")
    ax.legend(fontsize=8)
    _save(fig, path)


def _scaling_figure(reports: Sequence[MetricsReport], path: Path):
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for report in reports:
        fit = report.scaling
        points = fit["points"]
        ns = np.array([p[0] for p in points], dtype=float)
        latencies = np.array([p[1] for p in points], dtype=float)
        scatter = ax.plot(
            ns,
            latencies,
            "o",
            label=f"{report.pipeline} (α={fit['alpha']:.3f})",
        )[0]
        smooth = np.linspace(ns.min(), ns.max(), 50)
        coefficient = latencies[0] / ns[0] ** fit["alpha"]
        ax.plot(
            smooth,
            coefficient * smooth ** fit["alpha"],
            "--",
            color=scatter.get_color(),
            linewidth=1,
        )
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("API calls per query (N)")
    ax.set_ylabel("Mean latency (s)")
    ax.set_title("Latency scaling")
    ax.legend(fontsize=8)
    _save(fig, path)


def render_figures(
    reports: Sequence[MetricsReport], out_dir: Union[str, Path]
) -> dict[str, Path]:
    """Render report figures as PNG files; returns {figure name: path}."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = list(reports)
    paths: dict[str, Path] = {}

    paths["headline_png"] = out / "headline.png"
    _headline_figure(reports, paths["headline_png"])

    paths["categories_png"] = out / "categories.png"
    _category_figure(reports, paths["categories_png"])

    scaled = [r for r in reports if r.scaling]
    if scaled:
        paths["scaling_png"] = out / "scaling.png"
        _scaling_figure(scaled, paths["scaling_png"])
    return paths
