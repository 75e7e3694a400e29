"""Per-r bounded top-k candidate sets and the block-level pruning threshold."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from . import _backend


class JoinState:
    """Candidate sets for every vector of the resident outer block.

    Each row is a min-heap of capacity ``k`` held in parallel arrays so the
    compiled kernels can update it in place. ``prune[i]`` is the k-th best
    score of row ``i``, or 0.0 while the row holds fewer than ``k`` entries.
    """

    def __init__(self, owners: Sequence[int], k: int):
        if k < 1:
            raise ValueError("k must be >= 1")
        n = len(owners)
        self.k = int(k)
        self.owners = np.asarray(owners, dtype=np.uint64)
        self.scores = np.zeros((n, k), dtype=np.float64)
        self.seqs = np.zeros((n, k), dtype=np.int64)
        self.ids = np.zeros((n, k), dtype=np.uint64)
        self.counts = np.zeros(n, dtype=np.int64)
        self.prune = np.zeros(n, dtype=np.float64)
        self.seq = 0
        self.min_prune_score = 0.0

    def __len__(self) -> int:
        return len(self.owners)

    def heap_args(self) -> tuple:
        return self.scores, self.seqs, self.ids, self.counts, self.prune

    def candidate_set(self, i: int) -> "CandidateSet":
        return CandidateSet(self, i)

    def refresh_min_prune_score(self) -> float:
        """Recompute MinPruneScore; 0.0 if any set is under-full or the block is empty."""
        self.min_prune_score = float(self.prune.min()) if len(self.prune) else 0.0
        return self.min_prune_score

    def ranked(self, i: int) -> list[tuple[int, float]]:
        """Row ``i`` as ``(s_id, score)`` pairs, best first, ties by ascending id."""
        c = int(self.counts[i])
        pairs = zip(self.ids[i, :c].tolist(), self.scores[i, :c].tolist())
        return sorted(pairs, key=lambda p: (-p[1], p[0]))


class CandidateSet:
    """View of one row of a :class:`JoinState`."""

    def __init__(self, state: JoinState, row: int):
        self.state = state
        self.row = row

    @classmethod
    def empty(cls, owner: int, k: int) -> "CandidateSet":
        return cls(JoinState([owner], k), 0)

    @property
    def owner(self) -> int:
        return int(self.state.owners[self.row])

    @property
    def capacity(self) -> int:
        return self.state.k

    @property
    def prune_score(self) -> float:
        return float(self.state.prune[self.row])

    @property
    def entries(self) -> list[tuple[int, float]]:
        return self.state.ranked(self.row)

    def __len__(self) -> int:
        return int(self.state.counts[self.row])

    def insert(self, s_id: int, score: float) -> bool:
        """Admit iff ``score`` strictly exceeds the current prune score."""
        st, i = self.state, self.row
        ok, count, prune = _backend.impl().heap_insert(
            st.scores[i], st.seqs[i], st.ids[i], int(st.counts[i]), st.k,
            float(st.prune[i]), float(score), int(s_id), st.seq,
        )
        st.counts[i] = count
        st.prune[i] = prune
        if ok:
            st.seq += 1
        return ok


def candidate_insert(cset: CandidateSet, s_id: int, score: float) -> CandidateSet:
    cset.insert(s_id, score)
    return cset


def refresh_min_prune_score(state: JoinState) -> float:
    return state.refresh_min_prune_score()
