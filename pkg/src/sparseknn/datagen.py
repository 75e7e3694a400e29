"""Synthetic sparse datasets and spectra-to-dataset conversion."""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal, InvalidOperation
from typing import Iterator, TextIO

import numpy as np

from .dataset import DatasetHeader, write_dataset
from .vectors import SparseVector

log = logging.getLogger(__name__)

DEFAULT_SPECTRA_DIMS = 20000


@dataclass(frozen=True)
class SyntheticSpec:
    """Uniform random sparse vectors.

    Feature counts are drawn uniformly from ``features`` (inclusive), the
    dimensions uniformly without replacement from ``[0, dims)``, and weights
    uniformly from the half-open interval ``(weights[0], weights[1]]``.
    """

    count: int
    dims: int = 10000
    features: tuple[int, int] = (80, 120)
    weights: tuple[float, float] = (0.0, 1.0)
    seed: int = 0
    first_id: int = 0

    def __post_init__(self):
        lo, hi = self.features
        if self.count < 0:
            raise ValueError("count must be >= 0")
        if self.dims < 1:
            raise ValueError("dims must be >= 1")
        if not 0 <= lo <= hi:
            raise ValueError(f"invalid feature range {lo}:{hi}")
        if hi > self.dims:
            raise ValueError(f"feature range {lo}:{hi} exceeds dimensionality {self.dims}")
        wlo, whi = self.weights
        if not 0 <= wlo < whi:
            raise ValueError(f"invalid weight range ({wlo}, {whi}]")


def synthetic_vectors(spec: SyntheticSpec) -> Iterator[SparseVector]:
    rng = np.random.default_rng(spec.seed)
    lo, hi = spec.features
    wlo, whi = spec.weights
    for i in range(spec.count):
        n = int(rng.integers(lo, hi + 1))
        dims = np.sort(rng.choice(spec.dims, size=n, replace=False))
        # 1 - U[0,1) lies in (0, 1], which keeps every weight strictly above wlo
        weights = wlo + (whi - wlo) * (1.0 - rng.random(n))
        yield SparseVector(spec.first_id + i, dims, weights.astype(np.float32))


def generate(spec: SyntheticSpec, out) -> DatasetHeader:
    """Write the dataset described by ``spec``; identical specs give identical bytes."""
    return write_dataset(synthetic_vectors(spec), spec.dims, out)


@dataclass
class SpectrumRecord:
    spectrum_id: str
    peaks: list[tuple[Decimal, float]] = field(default_factory=list)


class SpectraFormatError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def parse_spectra(text: TextIO) -> Iterator[SpectrumRecord]:
    """Parse blank-line separated records of ``# id`` followed by ``m/z intensity`` lines."""
    record: SpectrumRecord | None = None
    for line_no, raw in enumerate(text, 1):
        line = raw.strip()
        if not line:
            if record is not None:
                yield record
                record = None
            continue
        if line.startswith("#"):
            if record is not None:
                raise SpectraFormatError(line_no, "record header without preceding blank line")
            spectrum_id = line[1:].strip()
            if not spectrum_id:
                raise SpectraFormatError(line_no, "empty spectrum id")
            record = SpectrumRecord(spectrum_id)
            continue
        if record is None:
            raise SpectraFormatError(line_no, "peak line outside a record")
        parts = line.split()
        if len(parts) != 2:
            raise SpectraFormatError(line_no, f"expected 'm/z intensity', got {line!r}")
        try:
            mz = Decimal(parts[0])
            intensity = float(Decimal(parts[1]))
        except InvalidOperation:
            raise SpectraFormatError(line_no, f"non-numeric peak {line!r}") from None
        if not (mz.is_finite() and mz > 0 and intensity > 0 and np.isfinite(intensity)):
            raise SpectraFormatError(line_no, f"non-positive peak {line!r}")
        record.peaks.append((mz, intensity))
    if record is not None:
        yield record


def mz_to_dimension(mz: Decimal) -> int:
    """Dimension index of a peak: m/z times 10, rounded half up."""
    return int((mz * 10).quantize(Decimal(1), rounding=ROUND_HALF_UP))


@dataclass
class ConversionStats:
    records: int = 0
    peaks: int = 0
    dropped: int = 0
    collisions: int = 0


_INT_ID = re.compile(r"\d+")


def spectrum_to_vector(record: SpectrumRecord, vector_id: int, dims: int,
                       stats: ConversionStats | None = None) -> SparseVector:
    """Quantize peaks; a collision keeps the larger intensity, out-of-range peaks drop."""
    stats = stats if stats is not None else ConversionStats()
    features: dict[int, float] = {}
    for mz, intensity in record.peaks:
        stats.peaks += 1
        d = mz_to_dimension(mz)
        if d >= dims:
            stats.dropped += 1
            continue
        if d in features:
            stats.collisions += 1
            intensity = max(intensity, features[d])
        features[d] = intensity
    pairs = sorted(features.items())
    return SparseVector.from_pairs(vector_id, pairs)


def convert_spectra(text: TextIO, out, dims: int = DEFAULT_SPECTRA_DIMS,
                    renumber: bool = False) -> tuple[DatasetHeader, ConversionStats]:
    """Convert a spectra text stream into a dataset file.

    Spectrum ids must be decimal integers unless ``renumber`` is set, in
    which case vectors are numbered by record position from 0.
    """
    stats = ConversionStats()

    def vectors():
        for ordinal, record in enumerate(parse_spectra(text)):
            stats.records += 1
            if renumber:
                vid = ordinal
            elif _INT_ID.fullmatch(record.spectrum_id):
                vid = int(record.spectrum_id)
            else:
                raise ValueError(
                    f"spectrum id {record.spectrum_id!r} is not an integer (use renumber)"
                )
            yield spectrum_to_vector(record, vid, dims, stats)

    header = write_dataset(vectors(), dims, out)
    if stats.dropped:
        log.warning("dropped %d of %d peaks with dimension >= %d", stats.dropped, stats.peaks, dims)
    return header, stats
