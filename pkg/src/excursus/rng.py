"""Reproducible random streams and block-parallel execution.

Work is split into fixed-size blocks and block ``b`` always draws from the
stream ``SeedSequence(seed, spawn_key=(b,))``.  Results therefore do not depend
on how many workers execute the blocks.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

DEFAULT_BLOCK = 2000


def block_rng(seed: int, block: int, *, salt: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(salt), int(block)))
    return np.random.Generator(np.random.PCG64(ss))


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return block_rng(0 if seed is None else seed, 0)


def default_threads() -> int:
    env = os.environ.get("EXCURSUS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def block_sizes(n: int, block: int = DEFAULT_BLOCK) -> List[int]:
    full, rest = divmod(int(n), block)
    return [block] * full + ([rest] if rest else [])


def map_blocks(
    fn: Callable[[int, int, np.random.Generator], T],
    n: int,
    seed: int,
    *,
    block: int = DEFAULT_BLOCK,
    threads: int | None = None,
    salt: int = 0,
) -> List[T]:
    """Run ``fn(block_index, block_size, rng)`` over all blocks, results in block order."""
    sizes = block_sizes(n, block)
    threads = default_threads() if threads is None else max(1, int(threads))
    jobs = [(b, m, block_rng(seed, b, salt=salt)) for b, m in enumerate(sizes)]
    if threads == 1 or len(jobs) <= 1:
        return [fn(*j) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda j: fn(*j), jobs))


def spawn(rng: np.random.Generator, k: int) -> Sequence[np.random.Generator]:
    return rng.spawn(k)
