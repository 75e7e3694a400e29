import numpy as np
import pytest

from sparseknn import _backend
from sparseknn.vectors import Block, SparseVector

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(params=_backend.available())
def backend(request):
    with _backend.use(request.param):
        yield request.param


def random_vectors(rng, count, dims, features, first_id=0, weights=(0.0, 1.0)):
    lo, hi = features
    out = []
    for i in range(count):
        n = int(rng.integers(lo, hi + 1))
        d = np.sort(rng.choice(dims, size=n, replace=False))
        w = weights[0] + (weights[1] - weights[0]) * (1.0 - rng.random(n))
        out.append(SparseVector(first_id + i, d, w.astype(np.float32).astype(np.float64)))
    return out


def random_block(rng, count, dims, features, first_id=0):
    return Block.from_vectors(random_vectors(rng, count, dims, features, first_id))


def dense_dot(r, s, dims):
    return float(np.dot(r.to_dense(dims), s.to_dense(dims)))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
