"""Shared thread-pool policy.

Restarts and benchmark trials are embarrassingly parallel and pure, so
they may run on a thread pool. The pool width is capped by the
STL_SMOOTH_THREADS environment variable; the default of 1 keeps execution
serial. Results are always collected in submission order, so parallel and
serial runs are indistinguishable to callers.
"""

from __future__ import annotations

import contextvars
import os
from concurrent.futures import ThreadPoolExecutor

__all__ = ["thread_limit", "map_ordered"]


def thread_limit():
    raw = os.environ.get("STL_SMOOTH_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"STL_SMOOTH_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def map_ordered(fn, items):
    """Apply fn to each item, possibly on threads; results keep item order.

    Each task runs under a copy of the caller's context, so context-scoped
    state such as the operator counter stays visible on worker threads.
    """
    items = list(items)
    workers = min(thread_limit(), max(1, len(items)))
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(contextvars.copy_context().run, fn, item) for item in items
        ]
        return [f.result() for f in futures]
