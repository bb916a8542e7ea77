"""Binary and CSV serialization.

Binary files start with a 4-byte magic and a little-endian ``u32`` version:

* ``PNCM`` masks: one or more records, each ``u32 kind`` (1 = data mask,
  2 = kernel mask) followed by the dimensions and a packed bit payload.
  Data masks store ``p*n`` bits row-major; kernel masks store the
  ``n(n-1)/2`` strict upper-triangle bits row-major plus the diagonal flag.
* ``PNCK`` kernels: header, then row offsets (int64), column indices
  (int32), values and the optional diagonal.
* ``PNCX`` data matrices: header, then float64 (or complex128) values in
  column-major order.
"""
from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .errors import InputError
from .kernel import PuncturedKernel, as_data_matrix, default_backend
from .masks import DataMask, KernelMask

__all__ = [
    "write_masks",
    "read_masks",
    "write_kernel",
    "read_kernel",
    "write_matrix",
    "read_matrix",
    "read_csv_matrix",
    "write_csv",
    "format_float",
]

VERSION = 1
_MASK_DATA = 1
_MASK_KERNEL = 2
_FLAG_COMPLEX = 1
_FLAG_DIAG = 2


def format_float(x):
    """Shortest text that round-trips a double (17 significant digits)."""
    return format(float(x), ".17g")


def _header(fh, magic):
    head = fh.read(8)
    if len(head) != 8 or head[:4] != magic:
        raise InputError(f"not a {magic.decode()} file")
    (version,) = struct.unpack("<I", head[4:])
    if version != VERSION:
        raise InputError(f"unsupported {magic.decode()} version {version}")


def _read_exact(fh, nbytes):
    buf = fh.read(nbytes)
    if len(buf) != nbytes:
        raise InputError("truncated file")
    return buf


def _array(fh, dtype, count):
    dtype = np.dtype(dtype)
    return np.frombuffer(_read_exact(fh, dtype.itemsize * count), dtype=dtype).copy()


def _upper_bits(b: KernelMask):
    """Row-major strict upper-triangle indicator of ``b``."""
    n = b.n
    rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(b.indptr))
    cols = b.indices.astype(np.int64)
    # offset of (i, j) in the row-major enumeration of pairs i < j
    offset = rows * (2 * n - rows - 1) // 2 + (cols - rows - 1)
    flat = np.zeros(n * (n - 1) // 2, dtype=bool)
    flat[offset] = True
    return flat


def _mask_from_upper(n, flat, diag):
    row_len = np.arange(n - 1, -1, -1, dtype=np.int64)
    starts = np.concatenate([[0], np.cumsum(row_len)])
    hits = np.flatnonzero(flat)
    rows = np.searchsorted(starts, hits, side="right") - 1
    cols = (hits - starts[rows] + rows + 1).astype(np.int32)
    indptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=n))]).astype(np.int64)
    return KernelMask(n, indptr, cols, int(diag))


def write_masks(path, *masks):
    """Write any sequence of DataMask / KernelMask records to one file."""
    with open(path, "wb") as fh:
        fh.write(b"PNCM" + struct.pack("<I", VERSION))
        for m in masks:
            if isinstance(m, DataMask):
                fh.write(struct.pack("<IQQ", _MASK_DATA, m.rows, m.cols))
                fh.write(np.asarray(m.bits, dtype=np.uint8).tobytes())
            elif isinstance(m, KernelMask):
                fh.write(struct.pack("<IQI", _MASK_KERNEL, m.n, m.diag))
                fh.write(np.packbits(_upper_bits(m)).tobytes())
            else:
                raise TypeError(f"cannot serialize {type(m).__name__}")


def read_masks(path):
    """Records of a ``PNCM`` file, in order."""
    out = []
    with open(path, "rb") as fh:
        _header(fh, b"PNCM")
        while True:
            tag = fh.read(4)
            if not tag:
                break
            if len(tag) != 4:
                raise InputError("truncated file")
            (kind,) = struct.unpack("<I", tag)
            if kind == _MASK_DATA:
                rows, cols = struct.unpack("<QQ", _read_exact(fh, 16))
                bits = _array(fh, np.uint8, (rows * cols + 7) // 8)
                bits.flags.writeable = False
                out.append(DataMask(rows, cols, bits))
            elif kind == _MASK_KERNEL:
                n, diag = struct.unpack("<QI", _read_exact(fh, 12))
                total = n * (n - 1) // 2
                packed = _array(fh, np.uint8, (total + 7) // 8)
                flat = np.unpackbits(packed, count=total).astype(bool)
                out.append(_mask_from_upper(n, flat, diag))
            else:
                raise InputError(f"unknown mask record kind {kind}")
    return out


def write_kernel(path, k: PuncturedKernel):
    flags = (_FLAG_COMPLEX if np.iscomplexobj(k.values) else 0) | (_FLAG_DIAG if k.diag is not None else 0)
    dtype = np.complex128 if flags & _FLAG_COMPLEX else np.float64
    with open(path, "wb") as fh:
        fh.write(b"PNCK" + struct.pack("<I", VERSION))
        fh.write(struct.pack("<IQQQQ", flags, k.n, k.p, k.nnz_pairs, k.flop_count))
        fh.write(np.asarray(k.indptr, dtype="<i8").tobytes())
        fh.write(np.asarray(k.indices, dtype="<i4").tobytes())
        fh.write(np.asarray(k.values, dtype=dtype).tobytes())
        if k.diag is not None:
            fh.write(np.asarray(k.diag, dtype=dtype).tobytes())


def read_kernel(path) -> PuncturedKernel:
    with open(path, "rb") as fh:
        _header(fh, b"PNCK")
        flags, n, p, nnz, flops = struct.unpack("<IQQQQ", _read_exact(fh, 36))
        dtype = np.complex128 if flags & _FLAG_COMPLEX else np.float64
        indptr = _array(fh, "<i8", n + 1).astype(np.int64)
        indices = _array(fh, "<i4", nnz).astype(np.int32)
        values = _array(fh, dtype, nnz)
        diag = _array(fh, dtype, n) if flags & _FLAG_DIAG else None
    if indptr[-1] != nnz:
        raise InputError("kernel row offsets do not match the entry count")
    return PuncturedKernel(n, p, indptr, indices, values, diag, flops, default_backend())


def write_matrix(path, x):
    """Write a ``p x n`` data matrix as ``PNCX`` (column-major payload)."""
    x = as_data_matrix(x)
    code = 1 if np.iscomplexobj(x) else 0
    with open(path, "wb") as fh:
        fh.write(b"PNCX" + struct.pack("<IIQQ", VERSION, code, x.shape[0], x.shape[1]))
        fh.write(np.asfortranarray(x).tobytes(order="F"))


def read_matrix(path):
    """Read a data matrix from ``PNCX`` or, for ``.csv`` files, from CSV."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return read_csv_matrix(path)
    with open(path, "rb") as fh:
        _header(fh, b"PNCX")
        code, p, n = struct.unpack("<IQQ", _read_exact(fh, 20))
        if code not in (0, 1):
            raise InputError(f"unknown PNCX value type {code}")
        dtype = np.complex128 if code else np.float64
        flat = _array(fh, dtype, p * n)
    return as_data_matrix(flat.reshape((p, n), order="F"))


def read_csv_matrix(path):
    """CSV with one feature per row and one sample per column; a header row is skipped."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{path}: empty CSV")
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        rows = rows[1:]
    if not rows or len({len(r) for r in rows}) != 1:
        raise InputError(f"{path}: rows must be non-empty and of equal length")
    try:
        x = np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric entry ({exc})") from None
    return as_data_matrix(x)


def write_csv(path, header, rows):
    """Comma-separated table; floats written with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
