"""Pure-Python kernel backend.

Mirrors ``_ckernels.pyx`` function for function. Array arguments are numpy
arrays; rows are copied into lists for the duration of a call because list
indexing is far cheaper than numpy scalar indexing in an interpreted loop.
"""
from __future__ import annotations

import numpy as np

# slots of the int64 counter array shared with the compiled backend
FEATURE_VISITS = 0
FEATURE_ADVANCES = 1
POSTINGS_VISITED = 2
RESIDUAL_VISITS = 3
N_COUNTERS = 4


def _evicts_first(sa, qa, sb, qb):
    # lower score leaves first; among equal scores the later insertion leaves
    return sa < sb or (sa == sb and qa > qb)


def heap_insert(sc, sq, ids, count, k, prune, score, sid, seq):
    """Admit ``(sid, score)`` into a bounded min-heap of capacity ``k``.

    ``sc``/``sq``/``ids`` are parallel mutable sequences (scores, insertion
    sequence numbers, ids). Returns ``(admitted, count, prune)``.
    """
    if not score > prune:
        return False, count, prune
    if count < k:
        pos = count
        while pos > 0:
            parent = (pos - 1) >> 1
            if _evicts_first(score, seq, sc[parent], sq[parent]):
                sc[pos], sq[pos], ids[pos] = sc[parent], sq[parent], ids[parent]
                pos = parent
            else:
                break
        count += 1
    else:
        pos = 0
        while True:
            child = 2 * pos + 1
            if child >= k:
                break
            if child + 1 < k and _evicts_first(sc[child + 1], sq[child + 1], sc[child], sq[child]):
                child += 1
            if _evicts_first(sc[child], sq[child], score, seq):
                sc[pos], sq[pos], ids[pos] = sc[child], sq[child], ids[child]
                pos = child
            else:
                break
    sc[pos], sq[pos], ids[pos] = score, seq, sid
    prune = sc[0] if count == k else 0.0
    return True, count, prune


def _merge(rd, rw, sd, sw):
    i = j = 0
    nr, ns = len(rd), len(sd)
    acc = 0.0
    while i < nr and j < ns:
        a = rd[i]
        b = sd[j]
        if a == b:
            acc += rw[i] * sw[j]
            i += 1
            j += 1
        elif a > b:
            j += 1
        else:
            i += 1
    return acc, i + j


def merge_dot(rd, rw, sd, sw):
    return _merge(rd.tolist(), rw.tolist(), sd.tolist(), sw.tolist())


class _Rows:
    """List copies of the candidate heaps, written back on ``flush``."""

    def __init__(self, hs, hq, hid, hcount, prune):
        self.arrays = (hs, hq, hid, hcount, prune)
        self.sc = hs.tolist()
        self.sq = hq.tolist()
        self.ids = hid.tolist()
        self.count = hcount.tolist()
        self.prune = prune.tolist()
        self.k = hs.shape[1]

    def insert(self, i, score, sid, seq):
        ok, self.count[i], self.prune[i] = heap_insert(
            self.sc[i], self.sq[i], self.ids[i], self.count[i], self.k,
            self.prune[i], score, sid, seq,
        )
        return ok

    def flush(self):
        hs, hq, hid, hcount, prune = self.arrays
        if len(self.sc):
            hs[:] = self.sc
            hq[:] = self.sq
            hid[:] = self.ids
        hcount[:] = self.count
        prune[:] = self.prune


def _split_csr(indptr, dims, weights):
    p = indptr.tolist()
    d = dims.tolist()
    w = weights.tolist()
    return [(d[p[i]:p[i + 1]], w[p[i]:p[i + 1]]) for i in range(len(p) - 1)]


def bf_join(r_indptr, r_dims, r_w, s_indptr, s_dims, s_w, s_ids,
            hs, hq, hid, hcount, prune, seq, counts):
    rows = _Rows(hs, hq, hid, hcount, prune)
    rvecs = _split_csr(r_indptr, r_dims, r_w)
    svecs = _split_csr(s_indptr, s_dims, s_w)
    sids = s_ids.tolist()
    charged = 0
    advances = 0
    for i, (rd, rw) in enumerate(rvecs):
        for j, (sd, sw) in enumerate(svecs):
            score, adv = _merge(rd, rw, sd, sw)
            advances += adv
            charged += len(rd) + len(sd)
            if score > rows.prune[i] and rows.insert(i, score, sids[j], seq):
                seq += 1
    rows.flush()
    counts[FEATURE_VISITS] += charged
    counts[FEATURE_ADVANCES] += advances
    return seq


def iiib_split(s_indptr, s_dims, s_w, rank, maxw, min_prune, mask_out):
    """Flag, per feature, whether it goes into the inverted lists.

    Features of each vector are visited most-frequent-dimension first while a
    running upper bound ``t`` accumulates ``maxw[d] * w``; a feature is
    indexed once ``t`` exceeds ``min_prune``.
    """
    rank_l = rank.tolist()
    maxw_l = maxw.tolist()
    p = s_indptr.tolist()
    d = s_dims.tolist()
    w = s_w.tolist()
    mask = [0] * len(d)
    for i in range(len(p) - 1):
        t = 0.0
        for f in sorted(range(p[i], p[i + 1]), key=lambda f: rank_l[d[f]]):
            t += maxw_l[d[f]] * w[f]
            if t > min_prune:
                mask[f] = 1
    mask_out[:] = mask


def probe_join(r_start, r_stop, r_indptr, r_dims, r_w, l_off, l_refs, l_w, s_ids,
               has_residual, res_off, res_refs, res_w,
               hs, hq, hid, hcount, prune, seq, counts, acc_out):
    """Accumulator probe for rows ``r_start:r_stop`` of the outer block.

    With ``has_residual``, ``res_*`` hold postings of the unindexed features;
    they are added only to candidates already in the accumulator, which
    completes each of those to its exact dot product. ``acc_out`` (length
    |B_s| or 0) receives the final accumulator of the last probed row.
    """
    rows = _Rows(hs, hq, hid, hcount, prune)
    off, refs, lw = l_off.tolist(), l_refs.tolist(), l_w.tolist()
    if has_residual:
        roff, rrefs, rlw = res_off.tolist(), res_refs.tolist(), res_w.tolist()
    else:
        roff = [0]
    sids = s_ids.tolist()
    n_dims = len(off) - 1
    n_res_dims = len(roff) - 1
    rp = r_indptr.tolist()
    rdims = r_dims.tolist()
    rws = r_w.tolist()
    visited = 0
    res_visits = 0
    acc = {}
    for i in range(r_start, r_stop):
        acc = {}
        lo_r, hi_r = rp[i], rp[i + 1]
        for d, x in zip(rdims[lo_r:hi_r], rws[lo_r:hi_r]):
            if d >= n_dims:
                continue
            lo, hi = off[d], off[d + 1]
            visited += hi - lo
            for p in range(lo, hi):
                ref = refs[p]
                acc[ref] = acc.get(ref, 0.0) + x * lw[p]
        if acc:
            for d, x in zip(rdims[lo_r:hi_r], rws[lo_r:hi_r]):
                if d >= n_res_dims:
                    continue
                lo, hi = roff[d], roff[d + 1]
                res_visits += hi - lo
                for p in range(lo, hi):
                    ref = rrefs[p]
                    if ref in acc:
                        acc[ref] += x * rlw[p]
        for ref, score in acc.items():
            if score > rows.prune[i] and rows.insert(i, score, sids[ref], seq):
                seq += 1
    rows.flush()
    if len(acc_out):
        acc_out[:] = 0.0
        for ref, score in acc.items():
            acc_out[ref] = score
    counts[POSTINGS_VISITED] += visited
    counts[RESIDUAL_VISITS] += res_visits
    return seq


def build_lists(indptr, dims, weights, mask, select, n_dims):
    """Postings sorted by dimension, block scan order within each list."""
    owners = np.repeat(np.arange(len(indptr) - 1, dtype=np.int64), np.diff(indptr))
    if select >= 0:
        keep = mask == select
        owners, dims, weights = owners[keep], dims[keep], weights[keep]
    order = np.argsort(dims, kind="stable")
    offsets = np.zeros(n_dims + 1, dtype=np.int64)
    np.cumsum(np.bincount(dims, minlength=n_dims), out=offsets[1:])
    return offsets, owners[order], weights[order]
