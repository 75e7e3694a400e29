"""Parameter sweeps over synthetic datasets, one report record per run."""
from __future__ import annotations

import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterator, Sequence

from . import _backend
from .counters import CostCounters
from .datagen import SyntheticSpec, generate
from .dataset import DEFAULT_PAGE_SIZE
from .join import JoinConfig, block_nested_loops_join

AXES = ("data-size", "relative-size", "k", "buffer")

DEFAULT_VALUES = {
    "data-size": [10000, 20000, 30000, 40000, 50000],
    "relative-size": [1000, 2000, 5000, 10000, 20000, 50000, 100000],
    "k": [5, 10, 15, 20],
    "buffer": [50, 40, 30, 20, 10],
}


@dataclass(frozen=True)
class BenchSettings:
    """Fixed settings of a sweep; the swept axis overrides one of them per cell."""

    count: int = 10000
    r_count: int = 10000
    dims: int = 10000
    features: tuple[int, int] = (80, 120)
    weights: tuple[float, float] = (0.0, 1.0)
    seed: int = 7
    k: int = 5
    buffer_pct: float = 50.0
    r_fraction: float = 0.8
    page_size: int = DEFAULT_PAGE_SIZE
    threads: int = 1


def cell_settings(axis: str, value, base: BenchSettings) -> tuple[int, int, BenchSettings]:
    """Return ``(|R|, |S|, settings)`` for one cell of the sweep."""
    if axis == "data-size":
        return int(value), int(value), base
    if axis == "relative-size":
        return base.r_count, int(value), base
    if axis == "k":
        return base.count, base.count, replace(base, k=int(value))
    if axis == "buffer":
        return base.count, base.count, replace(base, buffer_pct=float(value))
    raise ValueError(f"unknown axis {axis!r}; choose from {', '.join(AXES)}")


def dataset_path(workdir: Path, count: int, s: BenchSettings, seed: int) -> Path:
    lo, hi = s.features
    wlo, whi = s.weights
    name = f"syn_n{count}_d{s.dims}_f{lo}-{hi}_w{wlo:g}-{whi:g}_s{seed}.sknj"
    path = workdir / name
    if not path.exists():
        tmp = path.with_suffix(".tmp")
        generate(SyntheticSpec(count, s.dims, s.features, s.weights, seed), tmp)
        tmp.replace(path)
    return path


def run_once(r_path, s_path, config: JoinConfig) -> tuple[CostCounters, float, int]:
    counters = CostCounters()
    rows = 0
    t0 = time.perf_counter()
    for _, neighbors in block_nested_loops_join(r_path, s_path, config, counters):
        rows += len(neighbors)
    return counters, time.perf_counter() - t0, rows


def sweep(axis: str, values: Sequence | None, algorithms: Sequence[str], base: BenchSettings,
          workdir, repeat: int = 1) -> Iterator[dict]:
    """Run every (cell, algorithm, repeat) and yield its report record.

    R uses seed ``base.seed`` and S seed ``base.seed + 1``; both are recorded
    so a record can be replayed.
    """
    if axis not in AXES:
        raise ValueError(f"unknown axis {axis!r}; choose from {', '.join(AXES)}")
    if repeat < 1:
        raise ValueError("repeat must be >= 1")
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    values = list(values) if values else DEFAULT_VALUES[axis]
    r_seed, s_seed = base.seed, base.seed + 1
    for value in values:
        r_count, s_count, s = cell_settings(axis, value, base)
        r_path = dataset_path(workdir, r_count, s, r_seed)
        s_path = dataset_path(workdir, s_count, s, s_seed)
        for algo in algorithms:
            config = JoinConfig.for_inputs(
                r_path, s_path, buffer_pct=s.buffer_pct, page_size=s.page_size,
                k=s.k, r_fraction=s.r_fraction, algorithm=algo, threads=s.threads,
            )
            for rep in range(repeat):
                counters, wall, rows = run_once(r_path, s_path, config)
                yield {
                    "axis": axis,
                    "value": value,
                    "algorithm": algo,
                    "repeat": rep,
                    "r_count": r_count,
                    "s_count": s_count,
                    "dims": s.dims,
                    "features": list(s.features),
                    "weights": list(s.weights),
                    "r_seed": r_seed,
                    "s_seed": s_seed,
                    "k": s.k,
                    "page_size": s.page_size,
                    "buffer_pct": s.buffer_pct,
                    "buffer_pages": config.buffer_pages,
                    "r_pages": config.r_pages,
                    "s_pages": config.s_pages,
                    "r_fraction": s.r_fraction,
                    "threads": s.threads,
                    "backend": _backend.name(),
                    **counters.as_dict(),
                    "wall_time": wall,
                    "result_rows": rows,
                }
