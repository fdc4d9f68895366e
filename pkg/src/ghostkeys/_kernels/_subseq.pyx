# cython: language_level=3
"""Compiled twin of ``_pure.top_subsequences``.

Same contract, same visit order, same arithmetic expression per step, so
results (including float bit patterns and tie-breaks) are identical to the
pure kernel's.  The DFS is iterative with explicit stacks and the bounded
heap lives in flat C arrays.
"""

from cpython.bytes cimport PyBytes_FromStringAndSize
from cpython.mem cimport PyMem_Free, PyMem_Malloc


cdef inline int _lex_cmp(const unsigned char* a, Py_ssize_t la,
                         const unsigned char* b, Py_ssize_t lb) noexcept nogil:
    cdef Py_ssize_t i
    cdef Py_ssize_t m = la if la < lb else lb
    for i in range(m):
        if a[i] != b[i]:
            return -1 if a[i] < b[i] else 1
    if la == lb:
        return 0
    return -1 if la < lb else 1


cdef inline bint _worse(const double* hs, const unsigned char* hc,
                        const Py_ssize_t* hl, Py_ssize_t cap_len,
                        Py_ssize_t i, double score,
                        const unsigned char* cand, Py_ssize_t clen) noexcept nogil:
    # heap entry i strictly worse than (score, cand)?
    if hs[i] != score:
        return hs[i] < score
    return _lex_cmp(hc + i * cap_len, hl[i], cand, clen) > 0


cdef inline bint _entry_worse(const double* hs, const unsigned char* hc,
                              const Py_ssize_t* hl, Py_ssize_t cap_len,
                              Py_ssize_t i, Py_ssize_t j) noexcept nogil:
    # heap entry i strictly worse than heap entry j?
    if hs[i] != hs[j]:
        return hs[i] < hs[j]
    return _lex_cmp(hc + i * cap_len, hl[i], hc + j * cap_len, hl[j]) > 0


cdef inline void _swap(double* hs, unsigned char* hc, Py_ssize_t* hl,
                       Py_ssize_t cap_len, unsigned char* tmp,
                       Py_ssize_t i, Py_ssize_t j) noexcept nogil:
    cdef double ts = hs[i]
    cdef Py_ssize_t tl = hl[i]
    cdef Py_ssize_t b
    hs[i] = hs[j]; hs[j] = ts
    hl[i] = hl[j]; hl[j] = tl
    for b in range(cap_len):
        tmp[b] = hc[i * cap_len + b]
        hc[i * cap_len + b] = hc[j * cap_len + b]
        hc[j * cap_len + b] = tmp[b]


def top_subsequences(obs, const int[:, ::1] next_occ,
                     const double[:, ::1] step_nll, const double[::1] prior,
                     int lo, int hi, int k):
    """See _pure.top_subsequences; argument and result contract match."""
    if k <= 0 or hi < lo:
        return []
    cdef Py_ssize_t n = len(obs)
    if n == 0 or lo < 1:
        return []
    cdef Py_ssize_t d = next_occ.shape[1]
    cdef Py_ssize_t base = d + 1
    cdef Py_ssize_t sq = base * base
    cdef Py_ssize_t ctx0 = d * sq + d * base + d

    cdef Py_ssize_t depth_cap = hi + 2
    cdef Py_ssize_t* pos_s = <Py_ssize_t*> PyMem_Malloc(depth_cap * sizeof(Py_ssize_t))
    cdef Py_ssize_t* ctx_s = <Py_ssize_t*> PyMem_Malloc(depth_cap * sizeof(Py_ssize_t))
    cdef Py_ssize_t* ci_s = <Py_ssize_t*> PyMem_Malloc(depth_cap * sizeof(Py_ssize_t))
    cdef double* nll_s = <double*> PyMem_Malloc(depth_cap * sizeof(double))
    cdef unsigned char* cand = <unsigned char*> PyMem_Malloc(hi if hi > 0 else 1)

    cdef double* hs = <double*> PyMem_Malloc(k * sizeof(double))
    cdef Py_ssize_t* hl = <Py_ssize_t*> PyMem_Malloc(k * sizeof(Py_ssize_t))
    cdef unsigned char* hc = <unsigned char*> PyMem_Malloc(k * hi if k * hi > 0 else 1)
    cdef unsigned char* tmp = <unsigned char*> PyMem_Malloc(hi if hi > 0 else 1)

    if (pos_s == NULL or ctx_s == NULL or ci_s == NULL or nll_s == NULL
            or cand == NULL or hs == NULL or hl == NULL or hc == NULL
            or tmp == NULL):
        PyMem_Free(pos_s); PyMem_Free(ctx_s); PyMem_Free(ci_s)
        PyMem_Free(nll_s); PyMem_Free(cand); PyMem_Free(hs)
        PyMem_Free(hl); PyMem_Free(hc); PyMem_Free(tmp)
        raise MemoryError

    cdef Py_ssize_t m = 0  # heap size
    cdef Py_ssize_t depth = 0
    cdef Py_ssize_t ci, j, child_depth, i, parent, left, right, worst, b
    cdef Py_ssize_t child_ctx
    cdef double child_nll, score

    pos_s[0] = 0
    ctx_s[0] = ctx0
    nll_s[0] = 0.0
    ci_s[0] = 0

    try:
        with nogil:
            while depth >= 0:
                if ci_s[depth] >= d:
                    depth -= 1
                    continue
                ci = ci_s[depth]
                ci_s[depth] = ci + 1
                j = next_occ[pos_s[depth], ci]
                if j < 0:
                    continue
                cand[depth] = <unsigned char> ci
                child_nll = nll_s[depth] + step_nll[ctx_s[depth], ci]
                child_ctx = (ctx_s[depth] % sq) * base + ci
                child_depth = depth + 1
                if child_depth >= lo:
                    score = prior[child_depth] - child_nll / child_depth
                    # bounded worst-first heap insert
                    if m < k:
                        hs[m] = score
                        hl[m] = child_depth
                        for b in range(child_depth):
                            hc[m * hi + b] = cand[b]
                        i = m
                        m += 1
                        while i > 0:
                            parent = (i - 1) >> 1
                            if _entry_worse(hs, hc, hl, hi, i, parent):
                                _swap(hs, hc, hl, hi, tmp, i, parent)
                                i = parent
                            else:
                                break
                    elif _worse(hs, hc, hl, hi, 0, score, cand, child_depth):
                        hs[0] = score
                        hl[0] = child_depth
                        for b in range(child_depth):
                            hc[b] = cand[b]
                        i = 0
                        while True:
                            left = 2 * i + 1
                            if left >= m:
                                break
                            worst = left
                            right = left + 1
                            if right < m and _entry_worse(hs, hc, hl, hi, right, left):
                                worst = right
                            if _entry_worse(hs, hc, hl, hi, worst, i):
                                _swap(hs, hc, hl, hi, tmp, i, worst)
                                i = worst
                            else:
                                break
                if child_depth == hi:
                    continue
                depth = child_depth
                pos_s[depth] = j + 1
                ctx_s[depth] = child_ctx
                nll_s[depth] = child_nll
                ci_s[depth] = 0

        entries = [
            (hs[i], PyBytes_FromStringAndSize(<char*> (hc + i * hi), hl[i]))
            for i in range(m)
        ]
    finally:
        PyMem_Free(pos_s); PyMem_Free(ctx_s); PyMem_Free(ci_s)
        PyMem_Free(nll_s); PyMem_Free(cand); PyMem_Free(hs)
        PyMem_Free(hl); PyMem_Free(hc); PyMem_Free(tmp)

    entries.sort(key=lambda e: (-e[0], e[1]))
    return entries
