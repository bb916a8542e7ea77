"""Synthetic data with a known low-rank signal: ``X = Z + P``.

Two generators are provided: a Gaussian mixture (``P = M J^T``) and a
spiked covariance model (``P = Z~ A^H``). Both return the data together with
a :class:`GroundTruth` holding the isometric population matrix ``V``, the
spike spectrum of ``(1/n) L^H L`` where ``P = L V^H``, and class labels.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError
from .theory import SpikeSpectrum

__all__ = [
    "GmmModel",
    "SpikedPcaModel",
    "GroundTruth",
    "sample_gmm",
    "sample_spiked_pca",
    "classify_by_sign",
    "draw_class_means",
    "two_class_means",
    "class_sizes",
]

_STREAM_NOISE = 0x21
_STREAM_MEANS = 0x3A
_STREAM_SIZES = 0x4C
_STREAM_FACTORS = 0x5E


def _rng(seed, stream):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), stream])))


def _noise(rng, shape, complex_data):
    if complex_data:
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    return rng.standard_normal(shape)


@dataclass(frozen=True, eq=False)
class GmmModel:
    """Mixture ``sum_a pi_a N(mu_a, I_p)``; ``class_means`` is ``p x k``."""

    p: int
    class_means: np.ndarray
    proportions: tuple
    seed: int = 0
    multinomial: bool = False
    complex_data: bool = False

    def __post_init__(self):
        means = np.asarray(self.class_means)
        if means.ndim == 1:
            means = means[:, None]
        if means.ndim != 2 or means.shape[0] != self.p:
            raise ConfigError(f"class_means must be p x k with p={self.p}, got {means.shape}")
        if not np.all(np.isfinite(means)):
            raise ConfigError("class means must be finite")
        pi = np.asarray(self.proportions, dtype=float)
        if pi.shape != (means.shape[1],):
            raise ConfigError("one proportion per class expected")
        if np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-12:
            raise ConfigError(f"proportions must be non-negative and sum to 1, got {tuple(pi)}")
        object.__setattr__(self, "class_means", means)
        object.__setattr__(self, "proportions", tuple(float(x) for x in pi))

    @property
    def k(self):
        return self.class_means.shape[1]


@dataclass(frozen=True, eq=False)
class SpikedPcaModel:
    """Factor model ``X = Z + Z~ A^H`` with ``A`` the ``n x k`` loadings."""

    n: int
    p: int
    loadings: np.ndarray
    seed: int = 0
    complex_data: bool = False

    def __post_init__(self):
        a = np.asarray(self.loadings)
        if a.ndim == 1:
            a = a[:, None]
        if self.n < 1 or self.p < 1:
            raise ConfigError("n and p must be >= 1")
        if a.ndim != 2 or a.shape[0] != self.n:
            raise ConfigError(f"loadings must be n x k with n={self.n}, got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ConfigError("loadings must be finite")
        object.__setattr__(self, "loadings", a)


@dataclass(frozen=True, eq=False)
class GroundTruth:
    v: np.ndarray
    spike_spectrum: SpikeSpectrum
    labels: np.ndarray | None = None

    def __post_init__(self):
        k = self.v.shape[1]
        if k and not np.allclose(self.v.conj().T @ self.v, np.eye(k), atol=1e-10, rtol=0):
            raise InputError("population matrix is not isometric")

    @property
    def delocalization(self):
        """``max_ij sqrt(n) |V_ij|^2``; small values mean a delocalized ``V``."""
        if self.v.size == 0:
            return 0.0
        return float(np.sqrt(self.v.shape[0]) * np.max(np.abs(self.v) ** 2))


def class_sizes(n, proportions, multinomial=False, seed=0):
    """Class sizes summing to ``n``: largest-remainder rounding or a multinomial draw."""
    pi = np.asarray(proportions, dtype=float)
    if multinomial:
        return _rng(seed, _STREAM_SIZES).multinomial(n, pi)
    raw = n * pi
    sizes = np.floor(raw).astype(np.int64)
    rest = n - sizes.sum()
    order = np.argsort(-(raw - sizes), kind="stable")
    sizes[order[:rest]] += 1
    return sizes


def _ground_truth(basis, lmat, n, labels=None):
    """Rotate ``basis`` (``V`` with ``P = L V^H``) onto the eigenvectors of ``L^H L / n``."""
    gram = lmat.conj().T @ lmat / n
    vals, u = np.linalg.eigh(0.5 * (gram + gram.conj().T))
    order = np.argsort(vals)[::-1]
    vals, u = vals[order], u[:, order]
    spectrum = SpikeSpectrum.from_eigenvalues(vals) if len(vals) else SpikeSpectrum((), ())
    return GroundTruth(basis @ u, spectrum, labels)


def sample_gmm(model: GmmModel, n):
    """Draw ``n`` samples; returns ``(X, truth)`` with ``X`` of shape ``p x n``.

    Samples are grouped by class (class 0 first). ``V = J D_n^{-1/2}`` and
    the spike spectrum is that of ``D_n^{1/2} M^H M D_n^{1/2} / n`` for the
    realized class sizes.
    """
    k = model.k
    if not (n >= k >= 1):
        raise ConfigError(f"need n >= k >= 1, got n={n}, k={k}")
    sizes = class_sizes(n, model.proportions, model.multinomial, model.seed)
    if np.any(sizes == 0):
        raise ConfigError(f"empty class in realized sizes {sizes.tolist()}")
    labels = np.repeat(np.arange(k), sizes)
    z = _noise(_rng(model.seed, _STREAM_NOISE), (model.p, n), model.complex_data)
    x = z + model.class_means[:, labels]
    j = np.zeros((n, k))
    j[np.arange(n), labels] = 1.0
    basis = j / np.sqrt(sizes)
    lmat = model.class_means * np.sqrt(sizes)
    return x, _ground_truth(basis, lmat, n, labels)


def sample_spiked_pca(model: SpikedPcaModel):
    """Draw ``X = Z + Z~ A^H``; ``V`` spans the left singular vectors of ``A``.

    Directions with a singular value below ``1e-10`` times the largest are
    dropped with a warning.
    """
    n, p, a = model.n, model.p, model.loadings
    rng = _rng(model.seed, _STREAM_FACTORS)
    z = _noise(_rng(model.seed, _STREAM_NOISE), (p, n), model.complex_data)
    k = a.shape[1]
    zt = _noise(rng, (p, k), model.complex_data)
    x = z + zt @ a.conj().T
    w, sv, rh = np.linalg.svd(a, full_matrices=False)
    keep = sv > 1e-10 * (sv[0] if len(sv) and sv[0] > 0 else 1.0)
    if len(sv) and not keep.all() and sv[0] > 0:
        warnings.warn(f"loadings have rank {int(keep.sum())} < {k}; spikes merged", RuntimeWarning)
    if not np.any(keep):
        return x, GroundTruth(np.zeros((n, 0)), SpikeSpectrum((), ()))
    w, sv, rh = w[:, keep], sv[keep], rh[keep]
    # P = Z~ A^H = (Z~ R S) W^H with A = W S R^H
    lmat = zt @ rh.conj().T * sv
    return x, _ground_truth(w, lmat, n)


def draw_class_means(p, cov, seed=0):
    """Means ``[mu_1; ...; mu_k] ~ N(0, (1/p) cov (x) I_p)``, returned ``p x k``."""
    cov = np.asarray(cov, dtype=float)
    chol = np.linalg.cholesky(cov)
    g = _rng(seed, _STREAM_MEANS).standard_normal((p, cov.shape[0]))
    return g @ chol.T / np.sqrt(p)


def two_class_means(p, ell, seed=0):
    """Symmetric means ``(+mu, -mu)`` with ``||mu||^2 = ell`` along a random direction."""
    g = _rng(seed, _STREAM_MEANS).standard_normal(p)
    mu = np.sqrt(ell) * g / np.linalg.norm(g)
    return np.column_stack([mu, -mu])


def classify_by_sign(eigvec, labels):
    """Sign-classification error, minimized over the global sign of ``eigvec``."""
    labels = np.asarray(labels)
    v = np.real(np.asarray(eigvec))
    if v.shape != labels.shape:
        raise InputError("eigenvector and labels differ in length")
    if not np.all(np.isin(labels, (-1, 1))):
        raise InputError("labels must be +1 or -1")
    err = float(np.mean(np.where(v > 0, 1, -1) != labels))
    return min(err, 1.0 - err)
