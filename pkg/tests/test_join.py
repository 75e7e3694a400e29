import io
import math

import numpy as np
import pytest

from sparseknn import (
    CostCounters, DatasetError, JoinConfig, SparseVector, block_nested_loops_join, oracle_knn,
    write_dataset, write_results_tsv,
)
from sparseknn.dataset import block_count, read_vectors

from conftest import random_vectors


def fixed(count, n_features, first_id=0, dims=100, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        d = np.sort(rng.choice(dims, n_features, replace=False))
        out.append(SparseVector(first_id + i, d, rng.integers(1, 9, n_features).astype(float)))
    return out


def write(tmp_path, name, vectors, dims=100):
    p = tmp_path / name
    write_dataset(vectors, dims, p)
    return p


def config_for(r_pages, s_pages, page_size, **kw):
    total = r_pages + s_pages
    return JoinConfig(buffer_pages=total, r_fraction=(r_pages + 0.5) / total, page_size=page_size, **kw)


def test_config_split_and_clamp():
    c = JoinConfig(buffer_pages=10, r_fraction=0.8)
    assert (c.r_pages, c.s_pages) == (8, 2)
    assert JoinConfig(buffer_pages=2, r_fraction=0.1).r_pages == 1
    assert JoinConfig(buffer_pages=3, r_fraction=0.99).s_pages == 1
    assert config_for(7, 3, 64).r_pages == 7


@pytest.mark.parametrize("kw", [dict(k=0), dict(buffer_pages=1), dict(r_fraction=1.0),
                                dict(r_fraction=0.0), dict(algorithm="nope"), dict(threads=0)])
def test_config_rejects(kw):
    with pytest.raises(ValueError):
        JoinConfig(**kw)


def test_for_inputs_pages(tmp_path):
    r = write(tmp_path, "r", fixed(100, 10))   # 100 * 92 + 20 bytes
    s = write(tmp_path, "s", fixed(100, 10, 1000))
    total = r.stat().st_size + s.stat().st_size
    c = JoinConfig.for_inputs(r, s, buffer_pct=50, page_size=512)
    assert c.buffer_pages == math.floor(total * 0.5 / 512)
    assert JoinConfig.for_inputs(r, s, buffer_pct=0.001, page_size=512).buffer_pages == 2


# 4 features -> 44 bytes per vector; one 176-byte page holds 4 of them
@pytest.mark.parametrize("r_pages, expect_r", [(3, 1), (1, 3)])
def test_loop_counts(tmp_path, algo, r_pages, expect_r):
    r = write(tmp_path, "r", fixed(12, 4, seed=1))
    s = write(tmp_path, "s", fixed(12, 4, 1000, seed=2))
    cfg = config_for(r_pages, 1, 176, algorithm=algo)
    assert block_count(s, cfg.s_pages, 176) == 3
    c = CostCounters()
    list(block_nested_loops_join(r, s, cfg, c))
    assert c.r_blocks_read == expect_r
    assert c.s_blocks_read == 3 * expect_r


def test_four_by_three(tmp_path):
    r = write(tmp_path, "r", fixed(16, 4, seed=1))
    s = write(tmp_path, "s", fixed(12, 4, 1000, seed=2))
    c = CostCounters()
    list(block_nested_loops_join(r, s, config_for(1, 1, 176), c))
    assert (c.r_blocks_read, c.s_blocks_read) == (4, 12)


@pytest.fixture(params=["bf", "iib", "iiib"])
def algo(request):
    return request.param


def test_fewer_matches_than_k(tmp_path, algo):
    r = write(tmp_path, "r", [SparseVector.from_pairs(0, [(1, 1.0)])])
    s = write(tmp_path, "s", [SparseVector.from_pairs(10 + j, [(1 if j < 2 else 2, 1.0 + j)]) for j in range(6)])
    out = dict(block_nested_loops_join(r, s, JoinConfig(k=5, algorithm=algo)))
    assert out == {0: [(11, 2.0), (10, 1.0)]}


def test_empty_inputs(tmp_path, algo):
    r = write(tmp_path, "r", fixed(3, 4))
    e = write(tmp_path, "e", [])
    assert list(block_nested_loops_join(e, r, JoinConfig(algorithm=algo))) == []
    assert list(block_nested_loops_join(r, e, JoinConfig(algorithm=algo))) == [(0, []), (1, []), (2, [])]


def test_dimensionality_mismatch(tmp_path):
    r = write(tmp_path, "r", fixed(3, 4), dims=100)
    s = write(tmp_path, "s", fixed(3, 4), dims=200)
    with pytest.raises(DatasetError, match="dimensionality mismatch"):
        list(block_nested_loops_join(r, s, JoinConfig()))


def test_prune_scores_never_decrease(tmp_path, algo):
    rng = np.random.default_rng(8)
    r = write(tmp_path, "r", random_vectors(rng, 40, 100, (5, 15)))
    s = write(tmp_path, "s", random_vectors(rng, 200, 100, (5, 15), 1000))
    history = []

    def trace(state, block_s):
        history.append((state, state.prune.copy(), state.min_prune_score))

    cfg = config_for(4, 2, 256, k=3, algorithm=algo)
    list(block_nested_loops_join(r, s, cfg, trace=trace))
    assert len(history) > 4
    for (sa, pa, ma), (sb, pb, mb) in zip(history, history[1:]):
        if sa is sb:
            assert (pb >= pa).all() and mb >= ma
        assert mb == pytest.approx(pb.min())


def test_matches_oracle_across_budgets(tmp_path, algo):
    rng = np.random.default_rng(21)
    R = random_vectors(rng, 60, 80, (3, 12))
    S = random_vectors(rng, 150, 80, (3, 12), 10_000)
    r, s = write(tmp_path, "r", R, 80), write(tmp_path, "s", S, 80)
    expect = oracle_knn(R, S, 4, 80)
    for r_pages, s_pages in [(1, 1), (3, 2), (40, 40)]:
        got = dict(block_nested_loops_join(r, s, config_for(r_pages, s_pages, 128, k=4, algorithm=algo)))
        assert got.keys() == expect.keys()
        for rid in got:
            assert [x for _, x in got[rid]] == pytest.approx([x for _, x in expect[rid]], rel=1e-9)


def test_threads_give_same_output(tmp_path):
    rng = np.random.default_rng(4)
    r = write(tmp_path, "r", random_vectors(rng, 80, 100, (5, 15)))
    s = write(tmp_path, "s", random_vectors(rng, 120, 100, (5, 15), 1000))
    base = config_for(2, 2, 256, k=3)
    c1, c4 = CostCounters(), CostCounters()
    one = list(block_nested_loops_join(r, s, base, c1))
    four = list(block_nested_loops_join(r, s, JoinConfig(**{**base.__dict__, "threads": 4}), c4))
    assert one == four
    assert c1.work() == c4.work()


def test_tsv_format():
    buf = io.StringIO()
    n = write_results_tsv([(7, [(3, 2.5), (9, 1.0 / 3)]), (8, [])], buf)
    assert n == 2
    assert buf.getvalue() == "7\t1\t3\t2.5\n7\t2\t9\t0.333333\n"


def test_counters_consistent(tmp_path):
    rng = np.random.default_rng(2)
    r = write(tmp_path, "r", random_vectors(rng, 30, 100, (5, 15)))
    s = write(tmp_path, "s", random_vectors(rng, 30, 100, (5, 15), 1000))
    c = CostCounters()
    list(block_nested_loops_join(r, s, JoinConfig(algorithm="bf"), c))
    _, R = read_vectors(r)
    _, S = read_vectors(s)
    assert c.feature_visits == sum(len(x) + len(y) for x in R for y in S)
    assert c.io_time > 0 and c.cpu_time > 0
