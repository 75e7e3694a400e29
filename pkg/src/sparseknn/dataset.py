"""Paged little-endian binary dataset files.

Layout::

    b"SKNJ" | version u32 | D u32 | vector_count u64
    per vector: id u64 | feature_count u32 | feature_count x (d u32, w f32)

A vector occupies ``12 + 8 * feature_count`` bytes on disk.
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Iterator

import numpy as np

from .vectors import Block, InvalidVectorError, SparseVector

MAGIC = b"SKNJ"
VERSION = 1
HEADER = struct.Struct("<4sIIQ")
VECTOR_HEAD = struct.Struct("<QI")
FEATURE_DTYPE = np.dtype([("d", "<u4"), ("w", "<f4")])
DEFAULT_PAGE_SIZE = 8192


class DatasetError(ValueError):
    """Malformed dataset file or a dataset that violates the buffer model."""


@dataclass(frozen=True)
class DatasetHeader:
    dimensionality: int
    vector_count: int


def vector_nbytes(feature_count: int) -> int:
    return VECTOR_HEAD.size + FEATURE_DTYPE.itemsize * feature_count


def _encode(vec: SparseVector, dimensionality: int) -> bytes:
    vec.validate(dimensionality)
    with np.errstate(over="ignore"):
        w32 = vec.weights.astype("<f4")
    if not np.all(w32 > 0) or not np.all(np.isfinite(w32)):
        raise InvalidVectorError(vec.id, "weight not representable as positive float32")
    rec = np.empty(len(vec), dtype=FEATURE_DTYPE)
    rec["d"] = vec.dims
    rec["w"] = w32
    return VECTOR_HEAD.pack(vec.id, len(vec)) + rec.tobytes()


def write_dataset(vectors: Iterable[SparseVector], dimensionality: int, sink) -> DatasetHeader:
    """Serialize ``vectors`` to ``sink`` (a path or a seekable binary file).

    The vector count is patched into the header after streaming, so the
    input may be a generator. Invalid vectors raise :class:`InvalidVectorError`
    naming the offending id.
    """
    if not 0 < dimensionality < 2**32:
        raise DatasetError(f"dimensionality must be in [1, 2^32), got {dimensionality}")
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "wb") as fh:
            return write_dataset(vectors, dimensionality, fh)
    start = sink.tell()
    sink.write(HEADER.pack(MAGIC, VERSION, dimensionality, 0))
    seen: set[int] = set()
    count = 0
    for vec in vectors:
        if vec.id in seen:
            raise InvalidVectorError(vec.id, "duplicate vector id")
        seen.add(vec.id)
        sink.write(_encode(vec, dimensionality))
        count += 1
    end = sink.tell()
    sink.seek(start)
    sink.write(HEADER.pack(MAGIC, VERSION, dimensionality, count))
    sink.seek(end)
    return DatasetHeader(dimensionality, count)


def _read_header(fh: BinaryIO) -> DatasetHeader:
    raw = fh.read(HEADER.size)
    if len(raw) != HEADER.size:
        raise DatasetError("truncated header")
    magic, version, dims, count = HEADER.unpack(raw)
    if magic != MAGIC:
        raise DatasetError(f"bad magic {magic!r}")
    if version != VERSION:
        raise DatasetError(f"unsupported format version {version}")
    if dims == 0:
        raise DatasetError("dimensionality must be positive")
    return DatasetHeader(dims, count)


def read_header(path) -> DatasetHeader:
    with open(path, "rb") as fh:
        return _read_header(fh)


def _gather_block(buf: bytes, start: int, offsets: list[int], lengths: list[int], nbytes: int) -> Block:
    """Decode the contiguous records ``buf[start:start + nbytes]``."""
    raw = np.frombuffer(buf, dtype=np.uint8, count=nbytes, offset=start)
    heads = np.asarray(offsets, dtype=np.int64)[:, None] - start + np.arange(VECTOR_HEAD.size)
    ids = raw[heads[:, :8]].view("<u8").ravel().astype(np.uint64)
    n = np.asarray(lengths, dtype=np.int64)
    indptr = np.zeros(len(n) + 1, dtype=np.int64)
    np.cumsum(n, out=indptr[1:])
    # dropping the record heads leaves the features back to back
    keep = np.ones(nbytes, dtype=bool)
    keep[heads.ravel()] = False
    feats = raw[keep].view(FEATURE_DTYPE)
    return Block(ids, indptr, feats["d"].astype(np.int64), feats["w"].astype(np.float64), nbytes)


def read_blocks(source, pages: int, page_size: int = DEFAULT_PAGE_SIZE) -> Iterator[Block]:
    """Yield consecutive blocks of at most ``pages * page_size`` serialized bytes.

    Packing is greedy in file order. A single vector larger than the budget
    raises :class:`DatasetError`.
    """
    if pages < 1 or page_size < 1:
        raise ValueError("pages and page_size must be >= 1")
    budget = pages * page_size
    unpack = VECTOR_HEAD.unpack_from
    head = VECTOR_HEAD.size
    with open(source, "rb", buffering=0) as fh:
        remaining = _read_header(fh).vector_count
        # every block starts with at least budget + one record head in memory
        want = budget + head
        chunk = max(want, 1 << 20)
        buf, pos = b"", 0
        while remaining:
            if len(buf) - pos < want:
                buf = buf[pos:] + fh.read(chunk)
                pos = 0
            start, offsets, lengths = pos, [], []
            end = len(buf)
            while remaining:
                if end - pos < head:
                    if offsets:
                        break
                    raise DatasetError("truncated vector record")
                vid, n = unpack(buf, pos)
                size = head + 8 * n
                if size > budget:
                    raise DatasetError(f"vector {vid} exceeds block budget ({size} > {budget} bytes)")
                if pos + size - start > budget:
                    break
                if pos + size > end:
                    raise DatasetError("truncated vector features")
                offsets.append(pos)
                lengths.append(n)
                pos += size
                remaining -= 1
            yield _gather_block(buf, start, offsets, lengths, pos - start)
        if len(buf) > pos or fh.read(1):
            raise DatasetError("trailing bytes after last vector")


def read_vectors(source) -> tuple[DatasetHeader, list[SparseVector]]:
    """Load a whole dataset into memory."""
    header = read_header(source)
    size = os.path.getsize(source)
    vectors: list[SparseVector] = []
    for block in read_blocks(source, pages=1, page_size=max(size, 1)):
        vectors.extend(block.vectors)
    return header, vectors


def block_count(source, pages: int, page_size: int = DEFAULT_PAGE_SIZE) -> int:
    """Number of blocks ``read_blocks`` would yield, without decoding features."""
    budget = pages * page_size
    blocks, used = 0, 0
    with open(source, "rb") as fh:
        header = _read_header(fh)
        buf = fh.read()
    pos = 0
    for _ in range(header.vector_count):
        if len(buf) - pos < VECTOR_HEAD.size:
            raise DatasetError("truncated vector record")
        vid, n = VECTOR_HEAD.unpack_from(buf, pos)
        size = vector_nbytes(n)
        pos += size
        if size > budget:
            raise DatasetError(f"vector {vid} exceeds block budget ({size} > {budget} bytes)")
        if blocks == 0 or used + size > budget:
            blocks += 1
            used = 0
        used += size
    return blocks
