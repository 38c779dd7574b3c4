"""Deterministic parallel map over immutable inputs.

Scans are embarrassingly parallel and every worker writes only its own
slot, so results are identical to the serial run in value and order.
CHARFOL_THREADS caps the pool; 1 short-circuits to a plain loop, which
is also the safest default for debugging.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count() -> int:
    raw = os.environ.get("CHARFOL_THREADS", "")
    try:
        k = int(raw)
    except ValueError:
        k = 0
    if k < 1:
        k = min(8, os.cpu_count() or 1)
    return k


def parallel_map(fn, items) -> list:
    items = list(items)
    k = min(thread_count(), len(items)) or 1
    if k == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=k) as pool:
        return list(pool.map(fn, items))
