"""Two-way punctured kernel ``K = {(1/p) (X*S)^H (X*S)} * B``.

Only the entries allowed by ``B`` are computed, each one as an inner
product restricted to the features kept by both columns of ``S``. The hot
loops live in the compiled extension :mod:`puncturing._core`; when it is not
built, the vectorized fallback :mod:`puncturing._fallback` is used. Set
``PUNCTURING_BACKEND=python`` to force the fallback.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import _fallback
from .errors import ConfigError, DataError, DimensionError, SizeError
from .masks import DataMask, KernelMask

try:
    from . import _core
except ImportError:  # extension not built
    _core = None

__all__ = [
    "PuncturedKernel",
    "as_data_matrix",
    "available_backends",
    "build_kernel",
    "dense_kernel_oracle",
    "default_backend",
    "matvec",
    "DENSE_LIMIT",
]

DENSE_LIMIT = 2000


def available_backends():
    return (["compiled"] if _core is not None else []) + ["python"]


def default_backend():
    forced = os.environ.get("PUNCTURING_BACKEND")
    if forced:
        if forced not in available_backends():
            raise ConfigError(f"backend {forced!r} unavailable; have {available_backends()}")
        return forced
    return available_backends()[0]


def _impl(backend):
    backend = backend or default_backend()
    if backend == "compiled":
        if _core is None:
            raise ConfigError("compiled backend not built")
        return _core
    if backend == "python":
        return _fallback
    raise ConfigError(f"unknown backend {backend!r}")


def as_data_matrix(x):
    """Validate a ``p x n`` data matrix and return it as float64 or complex128."""
    x = np.asarray(x)
    if x.ndim != 2 or min(x.shape) < 1:
        raise DimensionError(f"data matrix must be 2-d with p, n >= 1, got shape {x.shape}")
    dtype = np.complex128 if np.iscomplexobj(x) else np.float64
    x = x.astype(dtype, copy=False)
    if not np.all(np.isfinite(x)):
        raise DataError("data matrix contains non-finite entries")
    return x


@dataclass(frozen=True, eq=False)
class PuncturedKernel:
    """Sparse Hermitian kernel: strict upper CSR, optional diagonal, product count."""

    n: int
    p: int
    indptr: np.ndarray
    indices: np.ndarray
    values: np.ndarray
    diag: np.ndarray | None
    flop_count: int
    backend: str = "python"
    products_computed: int | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dtype(self):
        return self.values.dtype

    @property
    def stored_entries(self):
        return int(self.indptr[-1]) + (self.n if self.diag is not None else 0)

    @property
    def nnz_pairs(self):
        return int(self.indptr[-1])

    def pattern(self) -> KernelMask:
        return KernelMask(self.n, self.indptr, self.indices, int(self.diag is not None))

    def to_dense(self):
        if self.n > 10_000:
            raise SizeError(f"n={self.n} too large to densify")
        out = np.zeros((self.n, self.n), dtype=self.dtype)
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        out[rows, self.indices] = self.values
        out[self.indices, rows] = self.values.conj()
        if self.diag is not None:
            out[np.diag_indices(self.n)] = self.diag
        return out

    def matvec(self, v):
        return matvec(self, v)

    def gershgorin_bound(self):
        """Upper bound on the spectral radius from absolute row sums."""
        if "gershgorin" not in self._cache:
            ones = np.ones(self.n)
            absk = PuncturedKernel(
                self.n, self.p, self.indptr, self.indices, np.abs(self.values),
                None if self.diag is None else np.abs(self.diag), 0, self.backend,
            )
            self._cache["gershgorin"] = float(np.max(matvec(absk, ones), initial=0.0))
        return self._cache["gershgorin"]


def _compress_columns(x, s):
    """Kept values of each column of ``X * S`` plus bit-set support and word ranks."""
    words = s.column_words()
    kept = s.to_dense().T
    cvals = np.ascontiguousarray(x.T[kept])
    counts = np.bitwise_count(words).astype(np.int32)
    cptr = np.concatenate([[0], np.cumsum(counts.sum(axis=1, dtype=np.int64))]).astype(np.int64)
    rank = np.ascontiguousarray(np.cumsum(counts, axis=1, dtype=np.int32) - counts)
    return words, cvals, cptr, rank


def build_kernel(x, s: DataMask, bmask: KernelMask, backend=None) -> PuncturedKernel:
    """Assemble the punctured kernel on the pattern of ``bmask``.

    ``flop_count`` is the number of scalar multiply-adds needed for every
    entry of ``K``, i.e. the number of ``(i, j, l)`` with ``B_ij = S_li =
    S_lj = 1`` over all ordered pairs ``(i, j)``. Only the upper triangle is
    evaluated; the products actually executed are in ``products_computed``.
    """
    x = as_data_matrix(x)
    p, n = x.shape
    if (s.rows, s.cols) != (p, n):
        raise DimensionError(f"data mask is {s.rows}x{s.cols}, data is {p}x{n}")
    if bmask.n != n:
        raise DimensionError(f"kernel mask has n={bmask.n}, data has n={n}")
    impl = _impl(backend)
    words, cvals, cptr, rank = _compress_columns(x, s)
    indptr = np.ascontiguousarray(bmask.indptr, dtype=np.int64)
    indices = np.ascontiguousarray(bmask.indices, dtype=np.int32)
    values, diag, flops = impl.build_upper(words, cvals, cptr, rank, p, indptr, indices, bool(bmask.diag))
    diag_flops = int(cptr[-1]) if bmask.diag else 0
    total = 2 * (int(flops) - diag_flops) + diag_flops
    return PuncturedKernel(n, p, indptr, indices, values, diag, total, impl.BACKEND, int(flops))


def dense_kernel_oracle(x, s: DataMask, bmask: KernelMask):
    """Dense reference: full Gram of the masked data, then the ``B`` mask."""
    x = as_data_matrix(x)
    p, n = x.shape
    if n > DENSE_LIMIT:
        raise SizeError(f"dense oracle limited to n <= {DENSE_LIMIT}, got {n}")
    if (s.rows, s.cols) != (p, n) or bmask.n != n:
        raise DimensionError("mask shapes do not match the data")
    xs = x * s.to_dense()
    return (xs.conj().T @ xs) / p * bmask.to_dense()


def matvec(k: PuncturedKernel, v):
    v = np.asarray(v)
    if v.shape != (k.n,):
        raise DimensionError(f"vector of length {k.n} expected, got shape {v.shape}")
    if k.backend == "python" or _core is None:
        op = k._cache.get("csr")
        if op is None:
            op = k._cache["csr"] = _fallback.symmetric_csr(k.indptr, k.indices, k.values, k.diag, k.n)
        return op @ v
    diag = k.diag if k.diag is not None else np.zeros(0, dtype=k.dtype)
    if np.iscomplexobj(v) and not np.iscomplexobj(k.values):
        re = _core.sym_matvec(k.indptr, k.indices, k.values, diag, np.ascontiguousarray(v.real))
        im = _core.sym_matvec(k.indptr, k.indices, k.values, diag, np.ascontiguousarray(v.imag))
        return re + 1j * im
    v = np.ascontiguousarray(v, dtype=k.dtype)
    return _core.sym_matvec(k.indptr, k.indices, k.values, diag, v)
