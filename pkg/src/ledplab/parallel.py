"""Order-preserving parallel map over independent work items.

Work items must be self-contained (they derive their own random streams
from seeds they carry), so the result is byte-identical for any worker
count, including 1.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

__all__ = ["parallel_map"]


def parallel_map(fn, items, workers: int = 1) -> list:
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
