"""Seeded fan-out of independent Monte Carlo realizations.

Realization i of a stream always draws from
SeedSequence(master_seed, spawn_key=(*stream, i)), so results depend only on
(master_seed, stream, i) and never on how work is split between processes.
"""

from __future__ import annotations

import os
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from typing import TypeVar

import numpy as np

T = TypeVar("T")

RealizationTask = Callable[[int, np.random.SeedSequence], T]


def realization_seed(master_seed: int, stream: Sequence[int], index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(*stream, index))


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)


def _run_chunk(
    task: RealizationTask[T],
    master_seed: int,
    stream: tuple[int, ...],
    start: int,
    stop: int,
) -> list[T]:
    return [task(i, realization_seed(master_seed, stream, i)) for i in range(start, stop)]


def run_realizations(
    task: RealizationTask[T],
    count: int,
    *,
    master_seed: int,
    stream: Sequence[int] = (),
    workers: int = 1,
    chunk_size: int | None = None,
) -> list[T]:
    """Results in realization order. `task` must be picklable when workers > 1."""
    if count < 1:
        raise ValueError("count must be at least 1.")
    if workers < 1:
        raise ValueError("workers must be at least 1.")
    key = tuple(int(s) for s in stream)
    if workers == 1 or count == 1:
        return _run_chunk(task, master_seed, key, 0, count)

    size = chunk_size or max(1, -(-count // (workers * 4)))
    bounds = [(start, min(count, start + size)) for start in range(0, count, size)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_run_chunk, task, master_seed, key, start, stop) for start, stop in bounds
        ]
        results: list[T] = []
        for future in futures:
            results.extend(future.result())
    return results
