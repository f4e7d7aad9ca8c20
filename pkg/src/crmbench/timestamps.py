"""Canonical timestamp format used across the simulated CRM.

Every timestamp in stores, schemas and calls must look like
``2024-05-05T00:00:00.000Z`` (millisecond precision, UTC, trailing Z).
The simulated clock is pinned for reproducibility.
"""

from __future__ import annotations

import re

TIMESTAMP_RE = re.compile(r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}\.\d{3}Z$")

# Pinned simulator clock; object create/update stamps always use this value.
CURRENT_TIME = "2024-05-05T00:00:00.000Z"


def is_canonical_timestamp(value) -> bool:
    return isinstance(value, str) and TIMESTAMP_RE.match(value) is not None
