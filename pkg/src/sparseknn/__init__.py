"""Disk-aware k-nearest-neighbor join for high-dimensional sparse vectors."""
from . import _backend
from .candidates import CandidateSet, JoinState, candidate_insert, refresh_min_prune_score
from .counters import CostCounters
from .dataset import DatasetError, DatasetHeader, read_blocks, read_header, read_vectors, write_dataset
from .join import JoinConfig, block_nested_loops_join, write_results_tsv
from .kernels import (
    FrequencyProfile,
    InvertedLists,
    SplitVector,
    build_inverted_lists_iib,
    build_inverted_lists_iiib,
    find_matches_iib,
    find_matches_iiib,
    kernel_bf,
    kernel_iib,
    kernel_iiib,
    oracle_knn,
)
from .vectors import Block, Feature, InvalidVectorError, SparseVector, dot

backend = _backend.name

__version__ = "0.1.0"

__all__ = [
    "Block", "CandidateSet", "CostCounters", "DatasetError", "DatasetHeader", "Feature",
    "FrequencyProfile", "InvalidVectorError", "InvertedLists", "JoinConfig", "JoinState",
    "SparseVector", "SplitVector", "backend", "block_nested_loops_join",
    "build_inverted_lists_iib", "build_inverted_lists_iiib", "candidate_insert", "dot",
    "find_matches_iib", "find_matches_iiib", "kernel_bf", "kernel_iib", "kernel_iiib",
    "oracle_knn", "read_blocks", "read_header", "read_vectors", "refresh_min_prune_score",
    "write_dataset", "write_results_tsv",
]
