"""Sparse vector model and the exact merge dot product."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import _backend


class Feature(NamedTuple):
    d: int
    w: float


class InvalidVectorError(ValueError):
    """A vector violates the sorted / positive / in-range feature rules."""

    def __init__(self, vector_id: int, reason: str):
        super().__init__(f"vector {vector_id}: {reason}")
        self.vector_id = vector_id
        self.reason = reason


@dataclass(frozen=True)
class SparseVector:
    """An id plus features kept as two parallel arrays sorted by dimension.

    ``dims`` is int64 and ``weights`` float64. Weights read from disk are
    exact float32 values widened to float64.
    """

    id: int
    dims: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        dims = np.ascontiguousarray(self.dims, dtype=np.int64)
        weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if dims.shape != weights.shape or dims.ndim != 1:
            raise ValueError("dims and weights must be 1-d arrays of equal length")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_pairs(cls, id: int, pairs: Iterable[tuple[int, float]]) -> "SparseVector":
        pairs = list(pairs)
        dims = np.array([d for d, _ in pairs], dtype=np.int64)
        weights = np.array([w for _, w in pairs], dtype=np.float64)
        return cls(int(id), dims, weights)

    @property
    def features(self) -> list[Feature]:
        return [Feature(int(d), float(w)) for d, w in zip(self.dims, self.weights)]

    def __len__(self) -> int:
        return len(self.dims)

    def validate(self, dimensionality: int | None = None) -> None:
        """Raise :class:`InvalidVectorError` unless the vector is well formed."""
        if len(self.dims) and self.dims[0] < 0:
            raise InvalidVectorError(self.id, "negative dimension index")
        if np.any(np.diff(self.dims) <= 0):
            raise InvalidVectorError(self.id, "unsorted features")
        if not np.all(self.weights > 0):
            raise InvalidVectorError(self.id, "non-positive weight")
        if dimensionality is not None and len(self.dims) and self.dims[-1] >= dimensionality:
            raise InvalidVectorError(
                self.id, f"dimension {int(self.dims[-1])} >= D={dimensionality}"
            )

    def to_dense(self, dimensionality: int) -> np.ndarray:
        out = np.zeros(dimensionality, dtype=np.float64)
        out[self.dims] = self.weights
        return out


@dataclass(frozen=True)
class Block:
    """A run of consecutive vectors held in memory at once, stored CSR-style.

    Vector ``i`` owns ``dims[indptr[i]:indptr[i+1]]``.
    """

    ids: np.ndarray
    indptr: np.ndarray
    dims: np.ndarray
    weights: np.ndarray
    serialized_bytes: int = 0
    _views: list = field(default=None, init=False, repr=False, compare=False)

    @classmethod
    def from_vectors(cls, vectors: Sequence[SparseVector], serialized_bytes: int | None = None) -> "Block":
        lengths = np.array([len(v) for v in vectors], dtype=np.int64)
        indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
        np.cumsum(lengths, out=indptr[1:])
        if vectors:
            dims = np.concatenate([v.dims for v in vectors])
            weights = np.concatenate([v.weights for v in vectors])
        else:
            dims = np.zeros(0, dtype=np.int64)
            weights = np.zeros(0, dtype=np.float64)
        ids = np.array([v.id for v in vectors], dtype=np.uint64)
        if serialized_bytes is None:
            serialized_bytes = int(12 * len(vectors) + 8 * indptr[-1])
        return cls(ids, indptr, dims, weights, serialized_bytes)

    def __len__(self) -> int:
        return len(self.ids)

    def __getitem__(self, i: int) -> SparseVector:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return SparseVector(int(self.ids[i]), self.dims[lo:hi], self.weights[lo:hi])

    @property
    def vectors(self) -> list[SparseVector]:
        if self._views is None:
            object.__setattr__(self, "_views", [self[i] for i in range(len(self))])
        return self._views

    def lengths(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def feature_count(self) -> int:
        return int(self.indptr[-1])


def dot(r: SparseVector, s: SparseVector, counters=None) -> float:
    """Exact dot product by merging the two dimension-sorted feature lists.

    When ``counters`` is given its ``feature_visits`` grows by the number of
    iterator advances, at most ``len(r) + len(s)``.
    """
    score, advances = _backend.impl().merge_dot(r.dims, r.weights, s.dims, s.weights)
    if counters is not None:
        counters.feature_visits += advances
    return score
