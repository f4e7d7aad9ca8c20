"""Latency-versus-call-count scaling fits.

Fits latency = c * N^alpha by least squares in log-log space.  With exactly
two points the exponent is computed in closed form,
alpha = log(L2/L1) / log(N2/N1), so two-point fits are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import DegenerateInputError


@dataclass(frozen=True)
class ScalingFit:
    """Fitted exponent over (call count, mean latency) points."""

    alpha: float
    points: tuple[tuple[float, float], ...]

    @property
    def classification(self) -> str:
        if self.alpha < 1.0:
            return "sublinear"
        if self.alpha > 1.0:
            return "superlinear"
        return "linear"

    def to_doc(self) -> dict:
        return {
            "alpha": round(self.alpha, 6),
            "classification": self.classification,
            "points": [[n, round(latency, 6)] for n, latency in self.points],
        }


def fit_scaling(points: Sequence[Sequence[float]]) -> ScalingFit:
    """Fit the scaling exponent over >= 2 points with distinct call counts."""
    cleaned = []
    for entry in points:
        n, latency = entry
        if n <= 0:
            raise DegenerateInputError(f"call count must be positive: {n}")
        if latency <= 0:
            raise DegenerateInputError(
                f"latency must be positive: {latency} at N={n}"
            )
        cleaned.append((float(n), float(latency)))
    if len(cleaned) < 2:
        raise DegenerateInputError("need at least two points")
    cleaned.sort()
    if len({n for n, _ in cleaned}) < 2:
        raise DegenerateInputError("need at least two distinct call counts")

    if len(cleaned) == 2:
        (n1, l1), (n2, l2) = cleaned
        alpha = math.log(l2 / l1) / math.log(n2 / n1)
    else:
        log_n = np.log([n for n, _ in cleaned])
        log_l = np.log([latency for _, latency in cleaned])
        alpha = float(np.polyfit(log_n, log_l, 1)[0])
    if not math.isfinite(alpha):
        raise DegenerateInputError("fit produced a non-finite exponent")
    return ScalingFit(alpha=alpha, points=tuple(cleaned))


def growth_percent(first: float, second: float) -> int:
    """Relative latency growth (L2 - L1) / L1 as a whole percent."""
    if first <= 0:
        raise DegenerateInputError("baseline latency must be positive")
    return int(round((second - first) / first * 100.0))


def format_growth(value: int) -> str:
    return f"+{value}%" if value > 0 else f"{value}%"
