# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel backend: edit-distance pair scoring and co-clustering sweeps.

Same API and same results as ``patlas._kernels_py`` (scores use exact integer
arithmetic); this module only makes the inner loops fast.
"""

from libc.stdlib cimport free, malloc

import numpy as np

BACKEND = "c"

cdef long long LL_MIN = <long long>(-9223372036854775807) - 1


# ---------------------------------------------------------------------------
# string similarity
# ---------------------------------------------------------------------------

cdef int _lev(const unsigned int* a, Py_ssize_t la,
              const unsigned int* b, Py_ssize_t lb,
              int* buf) noexcept nogil:
    """Edit distance; ``buf`` must hold at least lb+1 ints."""
    cdef Py_ssize_t i, j
    cdef int above, diag, cur, cand
    cdef unsigned int ca
    if la == 0:
        return <int>lb
    if lb == 0:
        return <int>la
    for j in range(lb + 1):
        buf[j] = <int>j
    for i in range(la):
        ca = a[i]
        diag = buf[0]
        buf[0] = <int>i + 1
        for j in range(lb):
            above = buf[j + 1]
            cur = above + 1
            if buf[j] + 1 < cur:
                cur = buf[j] + 1
            cand = diag
            if ca != b[j]:
                cand += 1
            if cand < cur:
                cur = cand
            diag = above
            buf[j + 1] = cur
    return buf[lb]


cdef double _normal_ratio(const unsigned int* a, Py_ssize_t la,
                          const unsigned int* b, Py_ssize_t lb,
                          int* buf) noexcept nogil:
    cdef Py_ssize_t m = la if la > lb else lb
    if m == 0:
        return 100.0
    return 100.0 * (1.0 - _lev(a, la, b, lb, buf) / <double>m)


cdef double _partial_ratio(const unsigned int* a, Py_ssize_t la,
                           const unsigned int* b, Py_ssize_t lb,
                           int* buf) noexcept nogil:
    cdef const unsigned int* s
    cdef const unsigned int* l
    cdef Py_ssize_t ls, ll, start
    cdef double best = 0.0, r
    cdef int d
    if la <= lb:
        s = a; ls = la; l = b; ll = lb
    else:
        s = b; ls = lb; l = a; ll = la
    if ls == 0:
        return 100.0
    if ls == ll:
        return _normal_ratio(s, ls, l, ll, buf)
    for start in range(ll - ls + 1):
        d = _lev(s, ls, l + start, ls, buf)
        r = 100.0 * (1.0 - d / <double>ls)
        if r > best:
            best = r
            if best == 100.0:
                break
    return best


cdef double _score(const unsigned int* ra, Py_ssize_t nra,
                   const unsigned int* rb, Py_ssize_t nrb,
                   const unsigned int* sa, Py_ssize_t nsa,
                   const unsigned int* sb, Py_ssize_t nsb,
                   int* buf) noexcept nogil:
    cdef double s = _normal_ratio(ra, nra, rb, nrb, buf)
    cdef double p
    if s < 100.0:
        p = _partial_ratio(ra, nra, rb, nrb, buf)
        if p > s:
            s = p
    if s < 100.0:
        p = _partial_ratio(sa, nsa, sb, nsb, buf)
        if p > s:
            s = p
    return s


def _codes(s: str):
    return np.frombuffer(s.encode("utf-32-le"), dtype=np.uint32)


def prepare_name(name: str):
    """Precompute the (raw, token-sorted) codepoint arrays used by scoring."""
    return _codes(name), _codes(" ".join(sorted(name.split())))


def levenshtein(a: str, b: str) -> int:
    cdef const unsigned int[::1] ca = _codes(a)
    cdef const unsigned int[::1] cb = _codes(b)
    cdef Py_ssize_t la = ca.shape[0], lb = cb.shape[0]
    cdef const unsigned int* pa = NULL
    cdef const unsigned int* pb = NULL
    if la:
        pa = &ca[0]
    if lb:
        pb = &cb[0]
    cdef int* buf = <int*>malloc((lb + 2) * sizeof(int))
    if buf == NULL:
        raise MemoryError()
    try:
        return _lev(pa, la, pb, lb, buf)
    finally:
        free(buf)


def score_one(a, b) -> float:
    out = score_pairs([a, b], np.zeros(1, np.int64), np.ones(1, np.int64))
    return float(out[0])


def score_pairs(prepared, left, right):
    """Score each (left[k], right[k]) pair of prepared names.

    Releases the GIL for the scoring loop, so concurrent calls on disjoint
    chunks scale across threads.
    """
    cdef Py_ssize_t n_names = len(prepared)
    cdef Py_ssize_t n_pairs = len(left)
    raw_parts = [p[0] for p in prepared]
    srt_parts = [p[1] for p in prepared]
    raw_flat_a = np.concatenate(raw_parts) if n_names else np.empty(0, np.uint32)
    srt_flat_a = np.concatenate(srt_parts) if n_names else np.empty(0, np.uint32)
    raw_off_a = np.zeros(n_names + 1, dtype=np.int64)
    srt_off_a = np.zeros(n_names + 1, dtype=np.int64)
    if n_names:
        np.cumsum([len(p) for p in raw_parts], out=raw_off_a[1:])
        np.cumsum([len(p) for p in srt_parts], out=srt_off_a[1:])

    cdef const unsigned int[::1] raw_flat = raw_flat_a
    cdef const unsigned int[::1] srt_flat = srt_flat_a
    cdef const long long[::1] raw_off = raw_off_a
    cdef const long long[::1] srt_off = srt_off_a
    cdef const long long[::1] li = np.ascontiguousarray(left, dtype=np.int64)
    cdef const long long[::1] ri = np.ascontiguousarray(right, dtype=np.int64)
    out_a = np.empty(n_pairs, dtype=np.float64)
    cdef double[::1] out = out_a

    cdef Py_ssize_t maxlen = 0, k
    for k in range(n_names):
        if raw_off[k + 1] - raw_off[k] > maxlen:
            maxlen = raw_off[k + 1] - raw_off[k]
        if srt_off[k + 1] - srt_off[k] > maxlen:
            maxlen = srt_off[k + 1] - srt_off[k]
    cdef int* buf = <int*>malloc((maxlen + 2) * sizeof(int))
    if buf == NULL:
        raise MemoryError()

    cdef const unsigned int* rf = NULL
    cdef const unsigned int* sf = NULL
    if raw_flat.shape[0]:
        rf = &raw_flat[0]
    if srt_flat.shape[0]:
        sf = &srt_flat[0]
    cdef long long a, b
    try:
        with nogil:
            for k in range(n_pairs):
                a = li[k]
                b = ri[k]
                out[k] = _score(rf + raw_off[a], raw_off[a + 1] - raw_off[a],
                                rf + raw_off[b], raw_off[b + 1] - raw_off[b],
                                sf + srt_off[a], srt_off[a + 1] - srt_off[a],
                                sf + srt_off[b], srt_off[b + 1] - srt_off[b],
                                buf)
    finally:
        free(buf)
    return out_a


# ---------------------------------------------------------------------------
# co-clustering sweeps
# ---------------------------------------------------------------------------

def assign_sweep(const long long[::1] indptr, const int[::1] indices,
                 const long long[::1] deg, const int[::1] other_assign,
                 const long long[::1] other_mass, long long total,
                 int[::1] assign, long long[::1] contrib):
    """Batch-reassign every item on one axis to its best cluster.

    Integer scores total*count_k - deg_i*other_mass_k; ties keep the current
    cluster, else lowest cluster id. In-place; returns items moved.
    """
    cdef Py_ssize_t n = assign.shape[0]
    cdef Py_ssize_t g = other_mass.shape[0]
    cdef long long* counts = <long long*>malloc(g * sizeof(long long))
    if counts == NULL:
        raise MemoryError()
    cdef Py_ssize_t i, k
    cdef long long p, best, s, di
    cdef int bestk, cur, changed = 0
    try:
        with nogil:
            for i in range(n):
                for k in range(g):
                    counts[k] = 0
                for p in range(indptr[i], indptr[i + 1]):
                    counts[other_assign[indices[p]]] += 1
                di = deg[i]
                best = LL_MIN
                bestk = 0
                for k in range(g):
                    s = total * counts[k] - di * other_mass[k]
                    if s > best:
                        best = s
                        bestk = <int>k
                cur = assign[i]
                if total * counts[cur] - di * other_mass[cur] == best:
                    bestk = cur
                if bestk != cur:
                    changed += 1
                assign[i] = bestk
                contrib[i] = best
    finally:
        free(counts)
    return changed


def member_contrib(const long long[::1] indptr, const int[::1] indices,
                   const long long[::1] deg, const int[::1] other_assign,
                   const long long[::1] other_mass, long long total,
                   const int[::1] assign, Py_ssize_t item):
    """Scaled modularity contribution of one item in its current cluster."""
    cdef int k = assign[item]
    cdef long long count = 0, p
    for p in range(indptr[item], indptr[item + 1]):
        if other_assign[indices[p]] == k:
            count += 1
    return total * count - deg[item] * other_mass[k]


def inblock_count(const long long[::1] indptr, const int[::1] indices,
                  const int[::1] assign, const int[::1] other_assign):
    """Number of matrix entries whose row and column share a cluster."""
    cdef Py_ssize_t n = assign.shape[0], i
    cdef long long p, total = 0
    with nogil:
        for i in range(n):
            for p in range(indptr[i], indptr[i + 1]):
                if other_assign[indices[p]] == assign[i]:
                    total += 1
    return total
