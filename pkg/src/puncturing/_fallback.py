"""Vectorized NumPy/SciPy versions of the compiled kernels.

Same signatures and results as :mod:`puncturing._core`. Entry values come
from BLAS dot products on the masked data, so they agree with the compiled
path to rounding rather than bit for bit; the product count is the number of
feature indices where both mask bits are set, exactly what the compiled path
multiplies.
"""
import numpy as np
import scipy.sparse as sp

BACKEND = "python"


def _popcount_rows(words):
    return np.bitwise_count(words).sum(axis=-1, dtype=np.int64)


def build_upper(words, cvals, cptr, rank, p, indptr, indices, with_diag):
    words = np.asarray(words)
    n = words.shape[0]
    inv_p = 1.0 / p
    bits = np.unpackbits(words.view(np.uint8), axis=1, bitorder="little")[:, :p].astype(bool)
    xs = np.zeros((n, p), dtype=cvals.dtype)
    xs[bits] = cvals
    values = np.empty(int(indptr[n]), dtype=cvals.dtype)
    flops = 0
    for i in range(n):
        lo, hi = indptr[i], indptr[i + 1]
        if hi == lo:
            continue
        cols = indices[lo:hi]
        values[lo:hi] = (xs[cols] @ xs[i].conj()) * inv_p
        flops += int(_popcount_rows(words[cols] & words[i]).sum())
    diag = None
    if with_diag:
        diag = (np.abs(xs) ** 2).sum(axis=1).astype(cvals.dtype) * inv_p
        flops += int(_popcount_rows(words).sum())
    return values, diag, flops


def symmetric_csr(indptr, indices, vals, diag, n):
    """Full Hermitian CSR matrix from the strict upper triangle and diagonal."""
    upper = sp.csr_matrix((vals, indices, indptr), shape=(n, n))
    full = upper + upper.conj().T
    if diag is not None and len(diag) == n:
        full = full + sp.diags(diag)
    return full.tocsr()


def sym_matvec(indptr, indices, vals, diag, v):
    return symmetric_csr(indptr, indices, vals, diag, v.shape[0]) @ v
