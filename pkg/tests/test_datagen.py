import io
from decimal import Decimal
from pathlib import Path

import numpy as np
import pytest

from sparseknn.datagen import (
    SpectraFormatError, SpectrumRecord, SyntheticSpec, convert_spectra, generate, mz_to_dimension,
    parse_spectra, spectrum_to_vector,
)
from sparseknn.dataset import read_header, read_vectors

DATA = Path(__file__).parent / "data"


def test_empty_spec(tmp_path):
    p = tmp_path / "e.sknj"
    generate(SyntheticSpec(0), p)
    assert read_header(p).vector_count == 0


def test_same_seed_same_bytes(tmp_path):
    spec = SyntheticSpec(200, dims=500, features=(5, 30), seed=9)
    generate(spec, tmp_path / "a")
    generate(spec, tmp_path / "b")
    generate(SyntheticSpec(200, dims=500, features=(5, 30), seed=10), tmp_path / "c")
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()
    assert (tmp_path / "a").read_bytes() != (tmp_path / "c").read_bytes()


def test_generated_statistics(tmp_path):
    p = tmp_path / "g.sknj"
    generate(SyntheticSpec(1000, dims=10000, features=(80, 120), seed=1), p)
    header, vs = read_vectors(p)
    assert header.vector_count == 1000 and header.dimensionality == 10000
    for v in vs:
        v.validate(10000)
        assert 80 <= len(v) <= 120
        assert (v.weights > 0).all() and (v.weights <= 1).all()
    assert 95 <= np.mean([len(v) for v in vs]) <= 105
    assert [v.id for v in vs] == list(range(1000))


def test_weight_range_and_first_id(tmp_path):
    p = tmp_path / "w.sknj"
    generate(SyntheticSpec(50, dims=100, features=(3, 3), weights=(2.0, 3.0), seed=1, first_id=500), p)
    _, vs = read_vectors(p)
    assert vs[0].id == 500
    w = np.concatenate([v.weights for v in vs])
    assert (w > 2.0).all() and (w <= 3.0).all()


@pytest.mark.parametrize("kw", [dict(count=-1), dict(count=1, dims=0), dict(count=1, features=(5, 2)),
                                dict(count=1, dims=10, features=(1, 11)), dict(count=1, weights=(1.0, 1.0))])
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        SyntheticSpec(**kw)


@pytest.mark.parametrize("mz, d", [("234.56", 2346), ("100.0", 1000), ("0.05", 1), ("123.45", 1235), ("123.44", 1234)])
def test_mz_mapping(mz, d):
    assert mz_to_dimension(Decimal(mz)) == d


def test_peak_examples():
    v = spectrum_to_vector(SpectrumRecord("1", [(Decimal("234.56"), 77.3)]), 1, 20000)
    assert v.features == [(2346, 77.3)]
    v = spectrum_to_vector(SpectrumRecord("1", [(Decimal("100.0"), 5.0)]), 1, 20000)
    assert v.features == [(1000, 5.0)]
    v = spectrum_to_vector(SpectrumRecord("1", [(Decimal("50.01"), 3.0), (Decimal("50.04"), 9.0)]), 1, 20000)
    assert v.features == [(500, 9.0)]


def test_golden_conversion(tmp_path):
    out = tmp_path / "g.sknj"
    with open(DATA / "golden_spectra.txt") as fh:
        header, stats = convert_spectra(fh, out, 20000)
    assert out.read_bytes() == (DATA / "golden_spectra.sknj").read_bytes()
    assert (stats.records, stats.peaks, stats.dropped, stats.collisions) == (3, 11, 1, 2)


@pytest.mark.parametrize("text, line", [
    ("# 1\n10.0 abc\n", 2),
    ("# 1\n10.0 1.0\n-3.0 1.0\n", 3),
    ("# 1\n10.0 0\n", 2),
    ("10.0 1.0\n", 1),
    ("# 1\n10.0\n", 2),
    ("# 1\n1.0 1.0\n# 2\n", 3),
])
def test_malformed_lines_report_line_number(text, line):
    with pytest.raises(SpectraFormatError) as err:
        list(parse_spectra(io.StringIO(text)))
    assert err.value.line_no == line
    assert f"line {line}" in str(err.value)


def test_non_integer_ids(tmp_path):
    text = "# spec-a\n10.0 1.0\n\n# spec-b\n20.0 2.0\n"
    with pytest.raises(ValueError, match="not an integer"):
        convert_spectra(io.StringIO(text), tmp_path / "x.sknj")
    header, _ = convert_spectra(io.StringIO(text), tmp_path / "y.sknj", renumber=True)
    _, vs = read_vectors(tmp_path / "y.sknj")
    assert [v.id for v in vs] == [0, 1]


def test_reconversion_is_idempotent(tmp_path):
    a, b = tmp_path / "a.sknj", tmp_path / "b.sknj"
    for p in (a, b):
        with open(DATA / "golden_spectra.txt") as fh:
            convert_spectra(fh, p)
    assert a.read_bytes() == b.read_bytes()
