"""Dominant eigenpairs of the punctured kernel.

:func:`top_eigen` returns the algebraically largest eigenpairs. The default
method is a Krylov scheme (Lanczos with full reorthogonalization, thick
restarts and locking of converged pairs); ``method="power"`` runs the
shifted, deflated power iteration. Both only touch ``K`` through
:func:`puncturing.kernel.matvec`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ConvergenceError, InputError, SizeError
from .kernel import DENSE_LIMIT, PuncturedKernel, matvec

__all__ = [
    "EigenPair",
    "EigenBasis",
    "top_eigen",
    "dense_eigen_oracle",
    "alignment",
    "normalize_phase",
    "dense_eigenvalues",
    "SPECTRUM_LIMIT",
]

SPECTRUM_LIMIT = 10_000


@dataclass(frozen=True, eq=False)
class EigenPair:
    value: float
    vector: np.ndarray
    residual: float = 0.0


@dataclass(frozen=True, eq=False)
class EigenBasis:
    """Eigenpairs sorted by descending eigenvalue."""

    pairs: tuple
    iterations: int
    tol: float

    @property
    def values(self):
        return np.array([pr.value for pr in self.pairs])

    @property
    def vectors(self):
        """``n x k`` matrix whose columns are the eigenvectors."""
        return np.column_stack([pr.vector for pr in self.pairs])

    def gaps(self):
        return -np.diff(self.values)

    def __len__(self):
        return len(self.pairs)


def normalize_phase(v):
    """Scale ``v`` to unit norm with its largest-magnitude entry real positive."""
    v = v / np.linalg.norm(v)
    big = v[np.argmax(np.abs(v))]
    return v * (abs(big) / big)


def _operator(k):
    if isinstance(k, PuncturedKernel):
        return k.n, lambda v: matvec(k, v), k.dtype, k.gershgorin_bound
    a = np.asarray(k)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError("expected a square matrix or a PuncturedKernel")
    return a.shape[0], lambda v: a @ v, a.dtype, lambda: float(np.abs(a).sum(axis=1).max(initial=0.0))


def _orthogonalize(w, *bases):
    """Two passes of classical Gram-Schmidt against the columns of all ``bases``."""
    bases = [q for q in bases if q.shape[1]]
    for _ in range(2):
        for q in bases:
            w = w - q @ (q.conj().T @ w)
    return w


def _random_start(rng, n, dtype, locked):
    v = rng.standard_normal(n)
    if np.issubdtype(dtype, np.complexfloating):
        v = v + 1j * rng.standard_normal(n)
    v = _orthogonalize(v, locked)
    return v / np.linalg.norm(v)


def top_eigen(k, count=1, tol=1e-9, max_iter=5000, seed=0, method="lanczos", krylov_dim=None):
    """Largest ``count`` eigenpairs of the Hermitian operator ``k``.

    Each returned pair satisfies ``||K v - lam v|| <= tol * max(1, |lam|)``.
    ``max_iter`` bounds the number of products with ``K``; exceeding it
    raises :class:`ConvergenceError` carrying the best residual reached.
    """
    n, _, _, _ = _operator(k)
    if not (1 <= count <= n):
        raise ConfigError(f"count must lie in [1, {n}], got {count}")
    if not tol > 0:
        raise ConfigError("tol must be positive")
    if max_iter < 1:
        raise ConfigError("max_iter must be >= 1")
    if method == "lanczos":
        return _lanczos(k, count, tol, max_iter, seed, krylov_dim)
    if method == "power":
        return _power(k, count, tol, max_iter, seed)
    raise ConfigError(f"unknown method {method!r}")


def _finish(values, vectors, residuals, iterations, tol):
    order = np.argsort(values)[::-1]
    pairs = tuple(
        EigenPair(float(values[i]), normalize_phase(vectors[:, i]), float(residuals[i])) for i in order
    )
    return EigenBasis(pairs, iterations, tol)


def _lanczos(k, count, tol, max_iter, seed, krylov_dim):
    n, apply, dtype, _ = _operator(k)
    dtype = np.complex128 if np.issubdtype(dtype, np.complexfloating) else np.float64
    rng = np.random.default_rng(seed)
    m_max = min(n, krylov_dim or max(2 * count + 40, 80))
    keep = max(1, min(count + 10, m_max // 2))

    locked_v = np.zeros((n, 0), dtype=dtype)
    locked_vals = []
    basis = np.zeros((n, m_max), dtype=dtype)
    images = np.zeros((n, m_max), dtype=dtype)
    basis[:, 0] = _random_start(rng, n, dtype, locked_v)
    filled, matvecs, best = 0, 0, np.inf

    while True:
        room = min(m_max, n - locked_v.shape[1], filled + max_iter - matvecs)
        # expand the search space; images[:, c] = K basis[:, c]
        while filled < room:
            w = apply(basis[:, filled])
            matvecs += 1
            images[:, filled] = w
            filled += 1
            if filled == room:
                break
            r = _orthogonalize(w, locked_v, basis[:, :filled])
            nr = np.linalg.norm(r)
            if nr <= 1e-12 * max(1.0, np.linalg.norm(w)):
                # invariant subspace found: continue with a fresh direction
                r = _orthogonalize(_random_start(rng, n, dtype, locked_v), locked_v, basis[:, :filled])
                nr = np.linalg.norm(r)
            basis[:, filled] = r / nr

        v_cur, w_cur = basis[:, :filled], images[:, :filled]
        h = v_cur.conj().T @ w_cur
        theta, s = np.linalg.eigh(0.5 * (h + h.conj().T))
        theta, s = theta[::-1], s[:, ::-1]
        ritz = v_cur @ s
        ritz_img = w_cur @ s
        resid = np.linalg.norm(ritz_img - ritz * theta, axis=0)
        rel = resid / np.maximum(1.0, np.abs(theta))

        need = count - len(locked_vals)
        exhausted = filled + locked_v.shape[1] >= n
        newly = need if exhausted else 0
        while newly < min(need, filled) and rel[newly] <= tol:
            newly += 1
        if newly:
            locked_v = np.column_stack([locked_v, ritz[:, :newly]])
            locked_vals.extend(theta[:newly])
            best = np.inf
            if len(locked_vals) >= count:
                break
        else:
            best = min(best, rel[0])
        if matvecs >= max_iter:
            raise ConvergenceError(
                f"Lanczos stopped after {matvecs} products with {len(locked_vals)}/{count} pairs converged",
                best_residual=float(best),
            )

        # thick restart on the leading unconverged Ritz vectors, extended by
        # the (shared) residual direction
        nkeep = max(1, min(keep, filled - newly - 1))
        sel = slice(newly, newly + nkeep)
        basis[:, :nkeep] = ritz[:, sel]
        images[:, :nkeep] = ritz_img[:, sel]
        filled = nkeep
        lead = ritz_img[:, newly] - theta[newly] * ritz[:, newly]
        r = _orthogonalize(lead, locked_v, basis[:, :filled])
        nr = np.linalg.norm(r)
        if nr <= 1e-14 * max(1.0, abs(theta[newly])):
            r = _orthogonalize(_random_start(rng, n, dtype, locked_v), locked_v, basis[:, :filled])
            nr = np.linalg.norm(r)
        if filled < min(m_max, n - locked_v.shape[1]):
            basis[:, filled] = r / nr

    values = np.array(locked_vals[:count])
    vectors = locked_v[:, :count]
    residuals = np.array([np.linalg.norm(apply(vectors[:, i]) - values[i] * vectors[:, i]) for i in range(count)])
    return _finish(values, vectors, residuals, matvecs, tol)


def _power(k, count, tol, max_iter, seed):
    """Power iteration on ``K + sigma I`` with explicit deflation.

    ``sigma`` is the Gershgorin bound, which makes the shifted operator
    positive semidefinite so its dominant eigenvalues are the algebraically
    largest ones of ``K``. Each vector is iterated until its residual on the
    deflated operator meets ``tol``; a final Rayleigh-Ritz step on the span of
    all locked vectors removes the error they leave in each other.
    """
    n, apply, dtype, bound = _operator(k)
    dtype = np.complex128 if np.issubdtype(dtype, np.complexfloating) else np.float64
    sigma = bound()
    rng = np.random.default_rng(seed)
    locked = np.zeros((n, 0), dtype=dtype)
    images = []
    iters = 0
    for _ in range(count):
        v = _random_start(rng, n, dtype, locked)
        best = np.inf
        while True:
            kv = apply(v)
            iters += 1
            lam = float(np.real(np.vdot(v, kv)))
            pkv = _orthogonalize(kv, locked)
            res = np.linalg.norm(pkv - lam * v)
            best = min(best, res / max(1.0, abs(lam)))
            if res <= tol * max(1.0, abs(lam)):
                break
            if iters >= max_iter:
                raise ConvergenceError(
                    f"power iteration stopped after {iters} products", best_residual=float(best)
                )
            w = _orthogonalize(pkv + sigma * v, locked)
            v = w / np.linalg.norm(w)
        locked = np.column_stack([locked, v])
        images.append(kv)
    images = np.column_stack(images)
    h = locked.conj().T @ images
    theta, s = np.linalg.eigh(0.5 * (h + h.conj().T))
    vectors = locked @ s
    residuals = np.linalg.norm(images @ s - vectors * theta, axis=0)
    return _finish(theta, vectors, residuals, iters, tol)


def _dense(k):
    return k.to_dense() if isinstance(k, PuncturedKernel) else np.asarray(k)


def dense_eigen_oracle(k) -> EigenBasis:
    """Full eigendecomposition by LAPACK (``numpy.linalg.eigh``), ``n <= 2000``."""
    n = k.n if isinstance(k, PuncturedKernel) else np.asarray(k).shape[0]
    if n > DENSE_LIMIT:
        raise SizeError(f"dense eigensolver limited to n <= {DENSE_LIMIT}, got {n}")
    vals, vecs = np.linalg.eigh(_dense(k))
    return _finish(vals, vecs, np.zeros(n), 0, 0.0)


def dense_eigenvalues(k, limit=SPECTRUM_LIMIT):
    """All eigenvalues (descending) without eigenvectors, ``n <= limit``."""
    n = k.n if isinstance(k, PuncturedKernel) else np.asarray(k).shape[0]
    if n > limit:
        raise SizeError(f"full spectrum limited to n <= {limit}, got {n}")
    return np.linalg.eigvalsh(_dense(k))[::-1]


def alignment(basis, population, block) -> float:
    """Normalized squared overlap ``||Vhat_i^H V_block||_F^2 / L_i``.

    ``basis`` is an :class:`EigenBasis` or an ``n x k`` array of sample
    eigenvectors, ``population`` an isometric ``n x k`` matrix and ``block``
    the index range of the eigenspace (shared by both).
    """
    vhat = basis.vectors if isinstance(basis, EigenBasis) else np.asarray(basis)
    if vhat.ndim == 1:
        vhat = vhat[:, None]
    pop = np.asarray(population)
    if pop.ndim == 1:
        pop = pop[:, None]
    gram = pop.conj().T @ pop
    if not np.allclose(gram, np.eye(pop.shape[1]), atol=1e-8, rtol=0):
        raise InputError("population matrix is not isometric")
    idx = list(block)
    overlap = vhat[:, idx].conj().T @ pop[:, idx]
    return float(np.sum(np.abs(overlap) ** 2) / len(idx))
