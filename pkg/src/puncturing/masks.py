"""Bernoulli puncturing masks.

``S`` (``p x n``) punctures the data, ``B`` (symmetric ``n x n`` with a fixed
diagonal ``b``) punctures the kernel. Both are drawn from counter-based
Philox streams keyed by the seed, so a mask is fully determined by its
dimensions and :class:`MaskConfig`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError

__all__ = [
    "MaskConfig",
    "DataMask",
    "KernelMask",
    "gen_data_mask",
    "gen_kernel_mask",
    "mask_stream",
]

_STREAM_DATA = 0x5
_STREAM_KERNEL = 0xB
_CHUNK = 1 << 22


@dataclass(frozen=True)
class MaskConfig:
    eps_s: float
    eps_b: float
    b_diag: int = 1
    seed: int = 0

    def __post_init__(self):
        for name in ("eps_s", "eps_b"):
            eps = getattr(self, name)
            if not (isinstance(eps, (int, float, np.floating)) and 0.0 < eps <= 1.0):
                raise ConfigError(f"{name} must lie in (0, 1], got {eps!r}")
        if self.b_diag not in (0, 1):
            raise ConfigError(f"b_diag must be 0 or 1, got {self.b_diag!r}")
        if not (0 <= int(self.seed) < 2**64):
            raise ConfigError("seed must be a 64-bit unsigned integer")


def mask_stream(seed, stream):
    """Independent Philox generator for ``(seed, stream)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), stream])))


def _bernoulli(rng, count, eps):
    """``count`` Bernoulli(eps) draws, generated in fixed-size chunks."""
    out = np.empty(count, dtype=bool)
    if eps >= 1.0:
        out[:] = True
        return out
    for start in range(0, count, _CHUNK):
        stop = min(start + _CHUNK, count)
        out[start:stop] = rng.random(stop - start) < eps
    return out


@dataclass(frozen=True, eq=False)
class DataMask:
    """``p x n`` binary mask stored as a row-major packed bit-set."""

    rows: int
    cols: int
    bits: np.ndarray  # uint8, np.packbits of the row-major boolean array

    @classmethod
    def from_dense(cls, dense):
        dense = np.asarray(dense, dtype=bool)
        if dense.ndim != 2:
            raise DimensionError("mask must be two-dimensional")
        bits = np.packbits(dense, axis=None)
        bits.flags.writeable = False
        return cls(dense.shape[0], dense.shape[1], bits)

    def to_dense(self):
        flat = np.unpackbits(self.bits, count=self.rows * self.cols)
        return flat.reshape(self.rows, self.cols).astype(bool)

    def count(self):
        return int(np.unpackbits(self.bits, count=self.rows * self.cols).sum())

    def density(self):
        return self.count() / (self.rows * self.cols)

    def column_words(self):
        """Per-column supports packed little-endian into ``uint64`` words.

        Row ``i`` of the result is the bit-set of column ``i``; bit ``l`` of
        word ``w`` stands for feature index ``64*w + l``.
        """
        dense = self.to_dense()
        nwords = (self.rows + 63) // 64
        padded = np.zeros((self.cols, nwords * 64), dtype=bool)
        padded[:, : self.rows] = dense.T
        packed = np.packbits(padded, axis=1, bitorder="little")
        return np.ascontiguousarray(packed).view("<u8").astype(np.uint64, copy=False)

    def __eq__(self, other):
        return (
            isinstance(other, DataMask)
            and (self.rows, self.cols) == (other.rows, other.cols)
            and np.array_equal(self.bits, other.bits)
        )


@dataclass(frozen=True, eq=False)
class KernelMask:
    """Symmetric ``n x n`` mask: strict upper pattern in CSR form plus diagonal flag.

    ``indptr``/``indices`` list, for each row ``i``, the sorted columns
    ``j > i`` where ``B_ij = 1``; lower entries are implied by symmetry.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    diag: int

    @classmethod
    def from_pairs(cls, n, pairs, diag):
        pairs = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)
        if len(pairs) and (np.any(pairs[:, 0] >= pairs[:, 1]) or pairs.min() < 0 or pairs.max() >= n):
            raise DimensionError("pairs must satisfy 0 <= i < j < n")
        order = np.lexsort((pairs[:, 1], pairs[:, 0]))
        pairs = np.unique(pairs[order], axis=0)
        counts = np.bincount(pairs[:, 0], minlength=n)
        indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        return cls(n, indptr, pairs[:, 1].astype(np.int32), int(diag))

    @classmethod
    def from_dense(cls, dense):
        dense = np.asarray(dense, dtype=bool)
        n = dense.shape[0]
        if dense.shape != (n, n) or not np.array_equal(dense, dense.T):
            raise DimensionError("kernel mask must be square and symmetric")
        d = np.unique(np.diag(dense))
        if len(d) > 1:
            raise ConfigError("kernel mask diagonal must be constant")
        i, j = np.nonzero(np.triu(dense, 1))
        return cls.from_pairs(n, np.column_stack([i, j]), int(d[0]) if n else 0)

    @property
    def nnz_pairs(self):
        return int(self.indptr[-1])

    @property
    def stored_entries(self):
        """Stored kernel values: off-diagonal pairs plus ``n`` if the diagonal is kept."""
        return self.nnz_pairs + (self.n if self.diag else 0)

    def pairs(self):
        rows = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.indptr))
        return np.column_stack([rows, self.indices.astype(np.int64)])

    def to_dense(self):
        out = np.zeros((self.n, self.n), dtype=bool)
        pr = self.pairs()
        out[pr[:, 0], pr[:, 1]] = True
        out[pr[:, 1], pr[:, 0]] = True
        if self.diag:
            np.fill_diagonal(out, True)
        return out

    def density(self):
        total = self.n * (self.n - 1) // 2
        return self.nnz_pairs / total if total else 0.0

    def __eq__(self, other):
        return (
            isinstance(other, KernelMask)
            and self.n == other.n
            and self.diag == other.diag
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )


def gen_data_mask(p, n, cfg: MaskConfig) -> DataMask:
    """Draw ``S`` with i.i.d. Bernoulli(eps_s) entries, row-major order."""
    if p < 1 or n < 1:
        raise DimensionError("p and n must be >= 1")
    rng = mask_stream(cfg.seed, _STREAM_DATA)
    flat = _bernoulli(rng, p * n, cfg.eps_s)
    return DataMask.from_dense(flat.reshape(p, n))


def gen_kernel_mask(n, cfg: MaskConfig) -> KernelMask:
    """Draw ``B``: i.i.d. Bernoulli(eps_b) over ``i < j``, diagonal fixed to ``b``.

    Draws are consumed row by row over the strict upper triangle.
    """
    if n < 1:
        raise DimensionError("n must be >= 1")
    rng = mask_stream(cfg.seed, _STREAM_KERNEL)
    total = n * (n - 1) // 2
    upper = _bernoulli(rng, total, cfg.eps_b)
    row_len = np.arange(n - 1, -1, -1, dtype=np.int64)
    starts = np.concatenate([[0], np.cumsum(row_len)])
    hits = np.flatnonzero(upper)
    rows = np.searchsorted(starts, hits, side="right") - 1
    cols = hits - starts[rows] + rows + 1
    indptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=n))]).astype(np.int64)
    cols = cols.astype(np.int32)
    for arr in (indptr, cols):
        arr.flags.writeable = False
    return KernelMask(n, indptr, cols, cfg.b_diag)
