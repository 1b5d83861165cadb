"""Small shared helpers: deterministic threading and stable formatting."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "ANDERSON_CHAOS_THREADS"


def resolve_threads(cli_value: int | None) -> int:
    """CLI flag wins over the environment variable; default 1."""
    if cli_value is not None:
        return max(1, int(cli_value))
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return 1


def parallel_map(fn: Callable[[T], R], items: Sequence[T], threads: int) -> list[R]:
    """Map preserving input order; results identical for any thread count.

    Work items are fixed ahead of time and results are collected by index,
    so only wall time depends on ``threads``.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    out: list = [None] * len(items)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = {pool.submit(fn, it): i for i, it in enumerate(items)}
        for fut, i in futures.items():
            out[i] = fut.result()
    return out


def fmt_float(x: float) -> str:
    """Shortest decimal that round-trips the float."""
    return repr(float(x))
