# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: masked Gram assembly over bit-set intersections and
symmetric sparse matrix-vector products."""

import numpy as np
from cython.parallel import prange
from libc.stdint cimport int32_t, int64_t, uint64_t

cdef extern from *:
    """
    static inline int pk_ctz(unsigned long long x) { return __builtin_ctzll(x); }
    static inline int pk_popcount(unsigned long long x) { return __builtin_popcountll(x); }
    """
    int pk_ctz(unsigned long long x) nogil
    int pk_popcount(unsigned long long x) nogil

ctypedef fused scalar:
    double
    double complex

BACKEND = "compiled"


cdef inline int64_t _masked_dot(const scalar[::1] cvals, const int64_t[::1] cptr,
                                const int32_t[:, ::1] rank, const uint64_t[:, ::1] words,
                                Py_ssize_t i, Py_ssize_t j, Py_ssize_t nwords,
                                double scale, scalar* out) noexcept nogil:
    # Writes scale * masked inner product to out, returns the product count.
    # Bit l of column c sits at cvals[cptr[c] + rank[c, w] + popcount(word below l)].
    cdef scalar acc = 0
    cdef uint64_t wi, wj, m, below
    cdef Py_ssize_t w, oi, oj
    cdef int64_t c = 0
    for w in range(nwords):
        wi = words[i, w]
        wj = words[j, w]
        m = wi & wj
        if m == 0:
            continue
        oi = cptr[i] + rank[i, w]
        oj = cptr[j] + rank[j, w]
        while m:
            below = (m & (~m + 1)) - 1
            if scalar is double:
                acc = acc + cvals[oi + pk_popcount(wi & below)] * cvals[oj + pk_popcount(wj & below)]
            else:
                acc = acc + cvals[oi + pk_popcount(wi & below)].conjugate() * cvals[oj + pk_popcount(wj & below)]
            c += 1
            m &= m - 1
    out[0] = acc * scale
    return c


def build_upper(const uint64_t[:, ::1] words, const scalar[::1] cvals,
                const int64_t[::1] cptr, const int32_t[:, ::1] rank, Py_ssize_t p,
                const int64_t[::1] indptr, const int32_t[::1] indices, bint with_diag):
    """Entries ``(1/p) sum_l S_li S_lj conj(X_li) X_lj`` over the stored pattern.

    Column ``c`` of the masked data is held compressed: its kept values in
    ascending feature order in ``cvals[cptr[c]:cptr[c+1]]``, its support as
    the bit-set ``words[c]`` and ``rank[c, w]`` = set bits before word ``w``.
    Each entry is summed in ascending feature order, independently of the
    thread schedule. Returns ``(upper_values, diag_values or None, products)``.
    """
    cdef Py_ssize_t n = words.shape[0]
    cdef Py_ssize_t nwords = words.shape[1]
    cdef Py_ssize_t i, k
    cdef double inv_p = 1.0 / p
    cdef int64_t flops = 0
    cdef int64_t row_flops, c
    dtype = np.float64 if scalar is double else np.complex128
    values = np.empty(indptr[n], dtype=dtype)
    diag = np.zeros(n if with_diag else 0, dtype=dtype)
    cdef scalar[::1] vals = values
    cdef scalar[::1] dvals = diag

    for i in prange(n, nogil=True, schedule="dynamic"):
        row_flops = 0
        for k in range(indptr[i], indptr[i + 1]):
            c = _masked_dot(cvals, cptr, rank, words, i, indices[k], nwords, inv_p, &vals[k])
            row_flops = row_flops + c
        if with_diag:
            c = _masked_dot(cvals, cptr, rank, words, i, i, nwords, inv_p, &dvals[i])
            row_flops = row_flops + c
        flops += row_flops
    return values, (diag if with_diag else None), int(flops)


def sym_matvec(const int64_t[::1] indptr, const int32_t[::1] indices,
               const scalar[::1] vals, const scalar[::1] diag, const scalar[::1] v):
    """``y = K v`` from the strict upper triangle plus an optional diagonal."""
    cdef Py_ssize_t n = v.shape[0]
    cdef Py_ssize_t i, k, j
    cdef scalar acc, vi, a
    dtype = np.float64 if scalar is double else np.complex128
    out = np.zeros(n, dtype=dtype)
    cdef scalar[::1] y = out
    cdef bint has_diag = diag.shape[0] == n
    with nogil:
        for i in range(n):
            vi = v[i]
            acc = diag[i] * vi if has_diag else 0
            for k in range(indptr[i], indptr[i + 1]):
                j = indices[k]
                a = vals[k]
                acc = acc + a * v[j]
                if scalar is double:
                    y[j] = y[j] + a * vi
                else:
                    y[j] = y[j] + a.conjugate() * vi
            y[i] = y[i] + acc
    return out
