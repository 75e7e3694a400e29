"""In-memory join kernels for one (outer block, inner block) pair.

Three kernels share the candidate-set state of :mod:`sparseknn.candidates`:

* brute force: merge dot product of every pair;
* inverted index: postings over the inner block, accumulator probe per r;
* thresholded inverted index: indexes only the features of each inner vector
  whose running upper bound against the outer block exceeds the block's
  current MinPruneScore, then completes accumulated candidates with the
  unindexed remainder.

The hot loops live in the backend selected by :mod:`sparseknn._backend`;
index construction is plain numpy.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from . import _backend
from .candidates import JoinState
from .counters import CostCounters
from .vectors import Block, SparseVector

_EMPTY_I64 = np.zeros(0, dtype=np.int64)
_EMPTY_F64 = np.zeros(0, dtype=np.float64)


def _dimensionality(*blocks: Block) -> int:
    top = [int(b.dims.max()) + 1 for b in blocks if b.feature_count]
    return max(top, default=1)


@dataclass(frozen=True)
class InvertedLists:
    """Per-dimension postings, CSR by dimension.

    List ``d`` is ``refs[offsets[d]:offsets[d+1]]`` (indices into the inner
    block) with matching ``weights``; postings keep inner-block scan order.
    """

    offsets: np.ndarray
    refs: np.ndarray
    weights: np.ndarray
    s_ids: np.ndarray

    @property
    def dimensionality(self) -> int:
        return len(self.offsets) - 1

    def __len__(self) -> int:
        return len(self.refs)

    def postings(self, d: int) -> list[tuple[int, float]]:
        if d >= self.dimensionality:
            return []
        lo, hi = self.offsets[d], self.offsets[d + 1]
        return list(zip(self.refs[lo:hi].tolist(), self.weights[lo:hi].tolist()))

    def list_lengths(self) -> np.ndarray:
        return np.diff(self.offsets)


_NO_MASK = np.zeros(0, dtype=np.uint8)


def _build_lists(block: Block, dimensionality: int, mask: np.ndarray | None = None,
                 select: int = 1) -> InvertedLists:
    if mask is None:
        mask, select = _NO_MASK, -1
    offsets, refs, weights = _backend.impl().build_lists(
        block.indptr, block.dims, block.weights, mask, select, dimensionality
    )
    return InvertedLists(offsets, refs, weights, block.ids)


@dataclass(frozen=True)
class FrequencyProfile:
    """Outer-block statistics that drive the thresholded index.

    ``order`` lists dimensions by descending non-zero count in the outer
    block, ties by ascending index; ``rank`` is its inverse permutation.
    """

    counts: np.ndarray
    max_weight: np.ndarray
    order: np.ndarray
    rank: np.ndarray

    @classmethod
    def from_block(cls, block: Block, dimensionality: int) -> "FrequencyProfile":
        counts = np.bincount(block.dims, minlength=dimensionality).astype(np.int64)
        max_weight = np.zeros(dimensionality, dtype=np.float64)
        np.maximum.at(max_weight, block.dims, block.weights)
        order = np.lexsort((np.arange(dimensionality), -counts))
        rank = np.empty(dimensionality, dtype=np.int64)
        rank[order] = np.arange(dimensionality, dtype=np.int64)
        return cls(counts, max_weight, order, rank)

    @property
    def dimensionality(self) -> int:
        return len(self.counts)


@dataclass(frozen=True)
class SplitVector:
    """An inner vector with each feature flagged indexed or residual."""

    vector: SparseVector
    indexed: np.ndarray

    @property
    def indexed_features(self) -> SparseVector:
        m = self.indexed
        return SparseVector(self.vector.id, self.vector.dims[m], self.vector.weights[m])

    @property
    def residual_features(self) -> SparseVector:
        m = ~self.indexed
        return SparseVector(self.vector.id, self.vector.dims[m], self.vector.weights[m])

    def residual_bound(self, profile: FrequencyProfile) -> float:
        res = self.residual_features
        return float(np.sum(profile.max_weight[res.dims] * res.weights))


class SplitBlock(Sequence[SplitVector]):
    """Indexed/residual flags for a whole inner block.

    ``residual_lists`` holds postings of the unindexed features; the probe
    uses them only to complete candidates already in the accumulator.
    """

    def __init__(self, block: Block, mask: np.ndarray, min_prune: float, dimensionality: int):
        self.block = block
        self.mask = mask
        self.min_prune = min_prune
        self.residual_lists = _build_lists(block, dimensionality, mask, select=0)

    def __len__(self) -> int:
        return len(self.block)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        lo, hi = self.block.indptr[i], self.block.indptr[i + 1]
        return SplitVector(self.block[i], self.mask[lo:hi].astype(bool))

    def __iter__(self) -> Iterator[SplitVector]:
        return (self[i] for i in range(len(self)))

    @property
    def indexed_count(self) -> int:
        return int(self.mask.sum())


def _counted(counters: CostCounters | None, fn, *args, **kw):
    scratch = CostCounters.scratch()
    out = fn(*args, scratch, **kw)
    if counters is not None:
        counters.absorb(scratch)
    return out


def kernel_bf(block_r: Block, block_s: Block, state: JoinState, counters: CostCounters | None = None) -> JoinState:
    """Score every (r, s) pair with the merge dot product."""
    impl = _backend.impl()
    state.seq = _counted(
        counters, impl.bf_join,
        block_r.indptr, block_r.dims, block_r.weights,
        block_s.indptr, block_s.dims, block_s.weights, block_s.ids,
        *state.heap_args(), state.seq,
    )
    return state


def build_inverted_lists_iib(block_s: Block, counters: CostCounters | None = None,
                             dimensionality: int | None = None) -> InvertedLists:
    """Index every feature of the inner block."""
    lists = _build_lists(block_s, dimensionality or _dimensionality(block_s))
    if counters is not None:
        counters.postings_built += len(lists)
    return lists


def _probe(block_r, start, stop, lists, splits, state, counters, want_acc=False):
    acc_out = np.zeros(len(lists.s_ids) if want_acc else 0, dtype=np.float64)
    if splits is None:
        residual = (False, _EMPTY_I64, _EMPTY_I64, _EMPTY_F64)
    else:
        res = splits.residual_lists
        residual = (True, res.offsets, res.refs, res.weights)
    state.seq = _counted(
        counters, _backend.impl().probe_join, start, stop,
        block_r.indptr, block_r.dims, block_r.weights,
        lists.offsets, lists.refs, lists.weights, lists.s_ids,
        *residual, *state.heap_args(), state.seq, acc_out=acc_out,
    )
    if want_acc:
        nz = np.flatnonzero(acc_out)
        return dict(zip(nz.tolist(), acc_out[nz].tolist()))
    return None


def find_matches_iib(block_r: Block, i: int, lists: InvertedLists, state: JoinState,
                     counters: CostCounters | None = None) -> dict[int, float]:
    """Probe the lists with outer vector ``i``; returns its accumulator {inner index: score}."""
    return _probe(block_r, i, i + 1, lists, None, state, counters, want_acc=True)


def kernel_iib(block_r: Block, block_s: Block, state: JoinState, counters: CostCounters | None = None,
               dimensionality: int | None = None) -> JoinState:
    dimensionality = dimensionality or _dimensionality(block_r, block_s)
    lists = build_inverted_lists_iib(block_s, counters, dimensionality)
    _probe(block_r, 0, len(block_r), lists, None, state, counters)
    return state


def build_inverted_lists_iiib(block_s: Block, profile: FrequencyProfile, min_prune: float,
                              counters: CostCounters | None = None) -> tuple[InvertedLists, SplitBlock]:
    """Index only the features past each inner vector's threshold point."""
    dimensionality = profile.dimensionality
    if block_s.feature_count and int(block_s.dims.max()) >= dimensionality:
        raise ValueError("inner block has dimensions beyond the profile's dimensionality")
    mask = np.zeros(block_s.feature_count, dtype=np.uint8)
    _backend.impl().iiib_split(
        block_s.indptr, block_s.dims, block_s.weights,
        profile.rank, profile.max_weight, float(min_prune), mask,
    )
    lists = _build_lists(block_s, dimensionality, mask)
    if counters is not None:
        counters.postings_built += len(lists)
    return lists, SplitBlock(block_s, mask, float(min_prune), dimensionality)


def find_matches_iiib(block_r: Block, i: int, lists: InvertedLists, splits: SplitBlock,
                      state: JoinState, counters: CostCounters | None = None) -> dict[int, float]:
    """Probe with outer vector ``i`` and complete each hit with its residual features."""
    return _probe(block_r, i, i + 1, lists, splits, state, counters, want_acc=True)


def kernel_iiib(block_r: Block, block_s: Block, state: JoinState, counters: CostCounters | None = None,
                profile: FrequencyProfile | None = None) -> JoinState:
    if profile is None:
        profile = FrequencyProfile.from_block(block_r, _dimensionality(block_r, block_s))
    lists, splits = build_inverted_lists_iiib(block_s, profile, state.min_prune_score, counters)
    _probe(block_r, 0, len(block_r), lists, splits, state, counters)
    return state


class OuterBlock(NamedTuple):
    block: Block
    dimensionality: int
    profile: FrequencyProfile | None = None


class BruteForce:
    name = "bf"

    def prepare(self, block_r: Block, dimensionality: int) -> OuterBlock:
        return OuterBlock(block_r, dimensionality)

    def join(self, outer: OuterBlock, block_s: Block, state: JoinState, counters: CostCounters) -> None:
        kernel_bf(outer.block, block_s, state, counters)


class InvertedIndex(BruteForce):
    name = "iib"

    def join(self, outer, block_s, state, counters):
        kernel_iib(outer.block, block_s, state, counters, outer.dimensionality)


class ThresholdInvertedIndex(BruteForce):
    name = "iiib"

    def prepare(self, block_r, dimensionality):
        return OuterBlock(block_r, dimensionality, FrequencyProfile.from_block(block_r, dimensionality))

    def join(self, outer, block_s, state, counters):
        kernel_iiib(outer.block, block_s, state, counters, outer.profile)


KERNELS = {k.name: k for k in (BruteForce, InvertedIndex, ThresholdInvertedIndex)}


def get_kernel(name: str):
    try:
        return KERNELS[name.lower()]()
    except KeyError:
        raise ValueError(f"unknown algorithm {name!r}; choose from {sorted(KERNELS)}") from None


def oracle_knn(R: Sequence[SparseVector], S: Sequence[SparseVector], k: int,
               dimensionality: int | None = None) -> dict[int, list[tuple[int, float]]]:
    """Exhaustive top-k by dense matrix products; the reference for tests.

    Per r: positive scores only, ordered by (score desc, s_id asc), cut at k.
    """
    if dimensionality is None:
        dimensionality = max((int(v.dims.max()) + 1 for v in (*R, *S) if len(v)), default=1)
    out: dict[int, list[tuple[int, float]]] = {}
    if not S:
        return {r.id: [] for r in R}
    dense_s = np.zeros((len(S), dimensionality))
    for j, s in enumerate(S):
        dense_s[j, s.dims] = s.weights
    s_ids = np.array([s.id for s in S], dtype=np.uint64)
    chunk = 256
    for lo in range(0, len(R), chunk):
        part = R[lo:lo + chunk]
        dense_r = np.zeros((len(part), dimensionality))
        for i, r in enumerate(part):
            dense_r[i, r.dims] = r.weights
        scores = dense_r @ dense_s.T
        for r, row in zip(part, scores):
            hits = np.flatnonzero(row > 0)
            order = np.lexsort((s_ids[hits], -row[hits]))[:k]
            out[r.id] = [(int(s_ids[hits[o]]), float(row[hits[o]])) for o in order]
    return out
