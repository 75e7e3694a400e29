# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernel backend; see ``_pykernels`` for the reference semantics.

Every loop runs without the GIL so distinct outer blocks can be joined from
worker threads.
"""
from libc.stdint cimport int64_t, uint64_t, uint8_t
from libc.stdlib cimport calloc, free, malloc, qsort

import numpy as np

ctypedef int64_t i64

cdef enum:
    FEATURE_VISITS = 0
    FEATURE_ADVANCES = 1
    POSTINGS_VISITED = 2
    RESIDUAL_VISITS = 3
    # selection steps in iiib_split before sorting the remainder outright
    SELECT_STEPS = 8

N_COUNTERS = 4


cdef inline bint _evicts_first(double sa, i64 qa, double sb, i64 qb) noexcept nogil:
    return sa < sb or (sa == sb and qa > qb)


cdef inline bint _heap_insert(double* sc, i64* sq, uint64_t* ids, i64* count, i64 k,
                              double* prune, double score, uint64_t sid, i64 seq) noexcept nogil:
    cdef i64 pos, parent, child
    cdef i64 c = count[0]
    if not score > prune[0]:
        return False
    if c < k:
        pos = c
        while pos > 0:
            parent = (pos - 1) >> 1
            if _evicts_first(score, seq, sc[parent], sq[parent]):
                sc[pos] = sc[parent]
                sq[pos] = sq[parent]
                ids[pos] = ids[parent]
                pos = parent
            else:
                break
        c += 1
        count[0] = c
    else:
        pos = 0
        while True:
            child = 2 * pos + 1
            if child >= k:
                break
            if child + 1 < k and _evicts_first(sc[child + 1], sq[child + 1], sc[child], sq[child]):
                child += 1
            if _evicts_first(sc[child], sq[child], score, seq):
                sc[pos] = sc[child]
                sq[pos] = sq[child]
                ids[pos] = ids[child]
                pos = child
            else:
                break
    sc[pos] = score
    sq[pos] = seq
    ids[pos] = sid
    prune[0] = sc[0] if c == k else 0.0
    return True


cdef inline double _merge(const i64* rd, const double* rw, i64 nr,
                          const i64* sd, const double* sw, i64 ns, i64* advances) noexcept nogil:
    cdef i64 i = 0, j = 0, a, b
    cdef double acc = 0.0, p
    while i < nr and j < ns:
        a = rd[i]
        b = sd[j]
        # unconditional product lets the compiler emit a select, not a branch
        p = rw[i] * sw[j]
        acc += p if a == b else 0.0
        # equal dimensions advance both sides
        i += a <= b
        j += b <= a
    advances[0] += i + j
    return acc


cdef inline double _merge_from(const i64* rd, const double* rw, i64 nr,
                               const i64* sd, const double* sw, i64 ns,
                               i64 i, i64 j, double acc, i64* advances) noexcept nogil:
    cdef i64 a, b
    cdef double p
    while i < nr and j < ns:
        a = rd[i]
        b = sd[j]
        p = rw[i] * sw[j]
        acc += p if a == b else 0.0
        i += a <= b
        j += b <= a
    advances[0] += i + j
    return acc


cdef inline void _merge2(const i64* rd, const double* rw, i64 nr,
                         const i64* sd1, const double* sw1, i64 n1,
                         const i64* sd2, const double* sw2, i64 n2,
                         double* out1, double* out2, i64* advances) noexcept nogil:
    # two independent merges in one loop; their load chains overlap
    cdef i64 i1 = 0, j1 = 0, i2 = 0, j2 = 0, a1, b1, a2, b2
    cdef double acc1 = 0.0, acc2 = 0.0, p1, p2
    while i1 < nr and j1 < n1 and i2 < nr and j2 < n2:
        a1 = rd[i1]
        b1 = sd1[j1]
        a2 = rd[i2]
        b2 = sd2[j2]
        p1 = rw[i1] * sw1[j1]
        p2 = rw[i2] * sw2[j2]
        acc1 += p1 if a1 == b1 else 0.0
        acc2 += p2 if a2 == b2 else 0.0
        i1 += a1 <= b1
        j1 += b1 <= a1
        i2 += a2 <= b2
        j2 += b2 <= a2
    out1[0] = _merge_from(rd, rw, nr, sd1, sw1, n1, i1, j1, acc1, advances)
    out2[0] = _merge_from(rd, rw, nr, sd2, sw2, n2, i2, j2, acc2, advances)


def heap_insert(double[::1] sc, i64[::1] sq, uint64_t[::1] ids, i64 count, i64 k,
                double prune, double score, uint64_t sid, i64 seq):
    cdef bint ok = _heap_insert(&sc[0], &sq[0], &ids[0], &count, k, &prune, score, sid, seq)
    return ok, count, prune


def merge_dot(const i64[::1] rd, const double[::1] rw, const i64[::1] sd, const double[::1] sw):
    cdef i64 adv = 0
    cdef double score
    if rd.shape[0] == 0 or sd.shape[0] == 0:
        return 0.0, 0
    score = _merge(&rd[0], &rw[0], rd.shape[0], &sd[0], &sw[0], sd.shape[0], &adv)
    return score, adv


def bf_join(const i64[::1] r_indptr, const i64[::1] r_dims, const double[::1] r_w,
            const i64[::1] s_indptr, const i64[::1] s_dims, const double[::1] s_w,
            const uint64_t[::1] s_ids,
            double[:, ::1] hs, i64[:, ::1] hq, uint64_t[:, ::1] hid, i64[::1] hcount,
            double[::1] prune, i64 seq, i64[::1] counts):
    cdef i64 nr = r_indptr.shape[0] - 1
    cdef i64 ns = s_indptr.shape[0] - 1
    cdef i64 k = hs.shape[1]
    cdef i64 i, j, rlo, rlen, slo, slen, slo2, slen2
    cdef i64 charged = 0, advances = 0
    cdef double score, score2 = 0.0
    cdef const i64* rdp
    cdef const double* rwp
    cdef const i64* sdp
    cdef const double* swp
    if nr <= 0 or ns <= 0:
        return seq
    if r_dims.shape[0] == 0 or s_dims.shape[0] == 0:
        # no features anywhere on one side: every score is zero
        for i in range(nr):
            for j in range(ns):
                charged += (r_indptr[i + 1] - r_indptr[i]) + (s_indptr[j + 1] - s_indptr[j])
        counts[FEATURE_VISITS] += charged
        return seq
    rdp = &r_dims[0]
    rwp = &r_w[0]
    sdp = &s_dims[0]
    swp = &s_w[0]
    with nogil:
        for i in range(nr):
            rlo = r_indptr[i]
            rlen = r_indptr[i + 1] - rlo
            j = 0
            while j < ns:
                slo = s_indptr[j]
                slen = s_indptr[j + 1] - slo
                if j + 1 < ns:
                    # pairs of inner vectors, still admitted in scan order
                    slo2 = s_indptr[j + 1]
                    slen2 = s_indptr[j + 2] - slo2
                    charged += 2 * rlen + slen + slen2
                    _merge2(rdp + rlo, rwp + rlo, rlen, sdp + slo, swp + slo, slen,
                            sdp + slo2, swp + slo2, slen2, &score, &score2, &advances)
                else:
                    charged += rlen + slen
                    score = _merge(rdp + rlo, rwp + rlo, rlen, sdp + slo, swp + slo, slen, &advances)
                if score > prune[i]:
                    if _heap_insert(&hs[i, 0], &hq[i, 0], &hid[i, 0], &hcount[i], k,
                                    &prune[i], score, s_ids[j], seq):
                        seq += 1
                if j + 1 < ns and score2 > prune[i]:
                    if _heap_insert(&hs[i, 0], &hq[i, 0], &hid[i, 0], &hcount[i], k,
                                    &prune[i], score2, s_ids[j + 1], seq):
                        seq += 1
                j += 2
    counts[FEATURE_VISITS] += charged
    counts[FEATURE_ADVANCES] += advances
    return seq


cdef int _cmp_i64(const void* a, const void* b) noexcept nogil:
    cdef i64 x = (<const i64*>a)[0]
    cdef i64 y = (<const i64*>b)[0]
    return (x > y) - (x < y)


def iiib_split(const i64[::1] s_indptr, const i64[::1] s_dims, const double[::1] s_w,
               const i64[::1] rank, const double[::1] maxw, double min_prune,
               uint8_t[::1] mask_out):
    cdef i64 ns = s_indptr.shape[0] - 1
    cdef i64 i, f, m, best, lo, n, longest = 0, d
    cdef i64 tmp
    cdef double t
    cdef i64* keys
    for i in range(ns):
        n = s_indptr[i + 1] - s_indptr[i]
        if n > longest:
            longest = n
    if longest == 0:
        return
    keys = <i64*>malloc(longest * sizeof(i64))
    if keys == NULL:
        raise MemoryError()
    with nogil:
        for i in range(ns):
            lo = s_indptr[i]
            n = s_indptr[i + 1] - lo
            # rank in the high bits, local offset in the low 32
            for f in range(n):
                keys[f] = (rank[s_dims[lo + f]] << 32) | f
            t = 0.0
            m = 0
            while m < n:
                if m == SELECT_STEPS:
                    qsort(keys + m, n - m, sizeof(i64), _cmp_i64)
                elif m < SELECT_STEPS:
                    best = m
                    for f in range(m + 1, n):
                        if keys[f] < keys[best]:
                            best = f
                    tmp = keys[m]
                    keys[m] = keys[best]
                    keys[best] = tmp
                f = lo + (keys[m] & <i64>0xFFFFFFFF)
                d = s_dims[f]
                t += maxw[d] * s_w[f]
                if t > min_prune:
                    break
                mask_out[f] = 0
                m += 1
            # the bound never decreases, so every later feature is indexed too
            while m < n:
                mask_out[lo + (keys[m] & <i64>0xFFFFFFFF)] = 1
                m += 1
    free(keys)


def probe_join(i64 r_start, i64 r_stop,
               const i64[::1] r_indptr, const i64[::1] r_dims, const double[::1] r_w,
               const i64[::1] l_off, const i64[::1] l_refs, const double[::1] l_w,
               const uint64_t[::1] s_ids, bint has_residual,
               const i64[::1] res_off, const i64[::1] res_refs, const double[::1] res_w,
               double[:, ::1] hs, i64[:, ::1] hq, uint64_t[:, ::1] hid, i64[::1] hcount,
               double[::1] prune, i64 seq, i64[::1] counts, double[::1] acc_out):
    cdef i64 ns = s_ids.shape[0]
    cdef i64 n_dims = l_off.shape[0] - 1
    cdef i64 n_res_dims = res_off.shape[0] - 1 if has_residual else 0
    cdef i64 k = hs.shape[1]
    cdef i64 i, f, p, d, ref, nt, t, lo, hi
    cdef i64 visited = 0, res_visits = 0
    cdef double x, score
    cdef double* acc
    cdef i64* touched
    cdef bint dump = acc_out.shape[0] > 0
    if ns == 0 or r_stop <= r_start:
        return seq
    acc = <double*>calloc(ns, sizeof(double))
    touched = <i64*>malloc(ns * sizeof(i64))
    if acc == NULL or touched == NULL:
        free(acc)
        free(touched)
        raise MemoryError()
    with nogil:
        for i in range(r_start, r_stop):
            nt = 0
            for f in range(r_indptr[i], r_indptr[i + 1]):
                d = r_dims[f]
                if d >= n_dims:
                    continue
                x = r_w[f]
                lo = l_off[d]
                hi = l_off[d + 1]
                visited += hi - lo
                for p in range(lo, hi):
                    ref = l_refs[p]
                    if acc[ref] == 0.0:
                        touched[nt] = ref
                        nt += 1
                    acc[ref] += x * l_w[p]
            if nt > 0:
                # complete every accumulated candidate with its unindexed features;
                # candidates never reached through an indexed feature stay out
                for f in range(r_indptr[i], r_indptr[i + 1]):
                    d = r_dims[f]
                    if d >= n_res_dims:
                        continue
                    x = r_w[f]
                    lo = res_off[d]
                    hi = res_off[d + 1]
                    res_visits += hi - lo
                    for p in range(lo, hi):
                        ref = res_refs[p]
                        if acc[ref] != 0.0:
                            acc[ref] += x * res_w[p]
            if dump and i == r_stop - 1:
                for t in range(nt):
                    acc_out[touched[t]] = acc[touched[t]]
            for t in range(nt):
                ref = touched[t]
                score = acc[ref]
                acc[ref] = 0.0
                if score > prune[i]:
                    if _heap_insert(&hs[i, 0], &hq[i, 0], &hid[i, 0], &hcount[i], k,
                                    &prune[i], score, s_ids[ref], seq):
                        seq += 1
    free(acc)
    free(touched)
    counts[POSTINGS_VISITED] += visited
    counts[RESIDUAL_VISITS] += res_visits
    return seq


def build_lists(const i64[::1] indptr, const i64[::1] dims, const double[::1] weights,
                const uint8_t[::1] mask, int select, i64 n_dims):
    """Counting-sort postings by dimension, keeping block scan order per list.

    ``select`` is -1 for every feature, otherwise only features whose mask
    byte equals it.
    """
    cdef i64 nv = indptr.shape[0] - 1
    cdef i64 v, f, d, pos, total = 0
    offsets_arr = np.zeros(n_dims + 1, dtype=np.int64)
    cdef i64[::1] offsets = offsets_arr
    for f in range(dims.shape[0]):
        if dims[f] < 0 or dims[f] >= n_dims:
            raise ValueError(f"dimension {dims[f]} outside [0, {n_dims})")
    with nogil:
        for f in range(dims.shape[0]):
            if select < 0 or mask[f] == select:
                offsets[dims[f] + 1] += 1
                total += 1
        for d in range(n_dims):
            offsets[d + 1] += offsets[d]
    refs_arr = np.empty(total, dtype=np.int64)
    w_arr = np.empty(total, dtype=np.float64)
    cursor_arr = offsets_arr[:-1].copy()
    cdef i64[::1] refs = refs_arr
    cdef double[::1] w = w_arr
    cdef i64[::1] cursor = cursor_arr
    with nogil:
        for v in range(nv):
            for f in range(indptr[v], indptr[v + 1]):
                if select < 0 or mask[f] == select:
                    d = dims[f]
                    pos = cursor[d]
                    cursor[d] = pos + 1
                    refs[pos] = v
                    w[pos] = weights[f]
    return offsets_arr, refs_arr, w_arr
