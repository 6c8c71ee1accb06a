"""Small shared helpers: thread-pool fan-out and canonical JSON."""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor


def worker_count() -> int:
    """Worker cap for embarrassingly parallel loops (optimizer restarts,
    Monte Carlo trials), from the SWITCHCERT_THREADS environment variable.
    Defaults to 1 (serial); results are identical either way."""
    raw = os.environ.get("SWITCHCERT_THREADS", "")
    try:
        value = int(raw)
    except ValueError:
        value = 1
    return max(1, value)


def parallel_map(fn, items):
    """Map preserving input order, fanned out over ``worker_count()`` threads.

    Each item must be processed independently of the others; the reduction
    order (and therefore every result) matches the serial run exactly.
    """
    items = list(items)
    workers = worker_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def canonical_json(payload) -> bytes:
    """Deterministic JSON encoding: sorted keys, no whitespace variance,
    trailing newline.  Floats use repr (shortest round-trip) via json."""
    return (json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n").encode()
