"""Block nested-loop KNN join over two on-disk datasets."""
from __future__ import annotations

import math
import os
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, TextIO

from .candidates import JoinState
from .counters import CostCounters
from .dataset import DEFAULT_PAGE_SIZE, DatasetError, read_blocks, read_header
from .kernels import KERNELS, get_kernel
from .vectors import Block

Neighbors = list[tuple[int, float]]


@dataclass(frozen=True)
class JoinConfig:
    """Join parameters; the buffer is split into outer (R) and inner (S) pages."""

    k: int = 5
    buffer_pages: int = 2
    page_size: int = DEFAULT_PAGE_SIZE
    r_fraction: float = 0.8
    algorithm: str = "iiib"
    threads: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0 < self.r_fraction < 1:
            raise ValueError("r_fraction must be in (0, 1)")
        if self.buffer_pages < 2:
            raise ValueError("buffer_pages must be >= 2")
        if self.page_size < 1:
            raise ValueError("page_size must be >= 1")
        if self.algorithm.lower() not in KERNELS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    @property
    def r_pages(self) -> int:
        # clamped so each side keeps at least one page
        n_r = math.floor(self.r_fraction * self.buffer_pages)
        return min(max(n_r, 1), self.buffer_pages - 1)

    @property
    def s_pages(self) -> int:
        return self.buffer_pages - self.r_pages

    @classmethod
    def for_inputs(cls, r_path, s_path, buffer_pct: float = 50.0, page_size: int = DEFAULT_PAGE_SIZE,
                   **kw) -> "JoinConfig":
        """Size the buffer as a percentage of the combined input file size."""
        if not 0 < buffer_pct:
            raise ValueError("buffer_pct must be positive")
        total = os.path.getsize(r_path) + os.path.getsize(s_path)
        pages = max(2, math.floor(total * buffer_pct / 100 / page_size))
        return cls(buffer_pages=pages, page_size=page_size, **kw)


def _timed_blocks(blocks: Iterator[Block], counters: CostCounters, side: str) -> Iterator[Block]:
    attr = f"{side}_blocks_read"
    while True:
        t0 = time.perf_counter()
        block = next(blocks, None)
        counters.io_time += time.perf_counter() - t0
        if block is None:
            return
        setattr(counters, attr, getattr(counters, attr) + 1)
        yield block


def _join_outer(block_r: Block, s_path, dimensionality: int, config: JoinConfig, kernel,
                counters: CostCounters, trace: Callable | None) -> list[tuple[int, Neighbors]]:
    state = JoinState(block_r.ids, config.k)
    t0 = time.perf_counter()
    outer = kernel.prepare(block_r, dimensionality)
    counters.cpu_time += time.perf_counter() - t0
    inner = read_blocks(s_path, config.s_pages, config.page_size)
    for block_s in _timed_blocks(inner, counters, "s"):
        t0 = time.perf_counter()
        kernel.join(outer, block_s, state, counters)
        state.refresh_min_prune_score()
        counters.cpu_time += time.perf_counter() - t0
        if trace is not None:
            trace(state, block_s)
    return [(int(owner), state.ranked(i)) for i, owner in enumerate(state.owners)]


def block_nested_loops_join(r_path, s_path, config: JoinConfig, counters: CostCounters | None = None,
                            trace: Callable | None = None) -> Iterator[tuple[int, Neighbors]]:
    """Yield ``(r_id, [(s_id, score), ...])`` for every vector of R in file order.

    Neighbor lists are ranked by score descending, ties by ascending s_id,
    and hold at most ``k`` entries with positive score. ``counters`` (if
    given) accumulates work and timing. ``trace(state, block_s)`` is called
    after each inner block, sequential mode only.
    """
    if counters is None:
        counters = CostCounters()
    r_head, s_head = read_header(r_path), read_header(s_path)
    if r_head.dimensionality != s_head.dimensionality:
        raise DatasetError(
            f"dimensionality mismatch: R has {r_head.dimensionality}, S has {s_head.dimensionality}"
        )
    dimensionality = r_head.dimensionality
    kernel = get_kernel(config.algorithm)
    outer_blocks = _timed_blocks(read_blocks(r_path, config.r_pages, config.page_size), counters, "r")

    if config.threads == 1:
        for block_r in outer_blocks:
            yield from _join_outer(block_r, s_path, dimensionality, config, kernel, counters, trace)
        return

    # distinct outer blocks are independent; each worker keeps its own counters
    with ThreadPoolExecutor(config.threads) as pool:
        pending: deque = deque()
        for block_r in outer_blocks:
            local = CostCounters()
            pending.append((pool.submit(_join_outer, block_r, s_path, dimensionality, config,
                                        kernel, local, None), local))
            while len(pending) > config.threads:
                yield from _drain(pending.popleft(), counters)
        while pending:
            yield from _drain(pending.popleft(), counters)


def _drain(item, counters: CostCounters):
    future, local = item
    rows = future.result()
    counters.merge(local)
    return rows


def format_score(score: float) -> str:
    return f"{score:.6g}"


def write_results_tsv(results: Iterable[tuple[int, Neighbors]], out: TextIO) -> int:
    """Write ``r_id, rank, s_id, score`` rows; returns the number of rows."""
    n = 0
    for r_id, neighbors in results:
        for rank, (s_id, score) in enumerate(neighbors, 1):
            out.write(f"{r_id}\t{rank}\t{s_id}\t{format_score(score)}\n")
            n += 1
    return n
