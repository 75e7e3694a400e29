"""Instrumented cost counters shared by the driver and the kernels."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from . import _pykernels as _slots


@dataclass
class CostCounters:
    """Work and time tallies for one join run.

    ``feature_visits`` charges ``|r| + |s|`` per brute-force pair (the merge
    budget) and the true iterator advances for standalone ``dot`` calls;
    ``feature_advances`` always holds the true advances of kernel merges.
    """

    feature_visits: int = 0
    feature_advances: int = 0
    postings_built: int = 0
    postings_visited: int = 0
    residual_visits: int = 0
    r_blocks_read: int = 0
    s_blocks_read: int = 0
    io_time: float = 0.0
    cpu_time: float = 0.0

    @staticmethod
    def scratch() -> np.ndarray:
        """A zeroed int64 array laid out for the kernel backends."""
        return np.zeros(_slots.N_COUNTERS, dtype=np.int64)

    def absorb(self, slots: np.ndarray) -> None:
        self.feature_visits += int(slots[_slots.FEATURE_VISITS])
        self.feature_advances += int(slots[_slots.FEATURE_ADVANCES])
        self.postings_visited += int(slots[_slots.POSTINGS_VISITED])
        self.residual_visits += int(slots[_slots.RESIDUAL_VISITS])

    def merge(self, other: "CostCounters") -> None:
        for f in fields(self):
            setattr(self, f.name, getattr(self, f.name) + getattr(other, f.name))

    def work(self) -> dict:
        """The deterministic part of the report (everything but timers)."""
        d = asdict(self)
        del d["io_time"], d["cpu_time"]
        return d

    def as_dict(self) -> dict:
        return asdict(self)
