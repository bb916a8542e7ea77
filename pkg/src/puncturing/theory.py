"""Closed-form large-dimensional predictions for the two-way punctured kernel.

Everything here is a pure function of a :class:`TheoryParams` value:

* the Stieltjes transform ``m(z)`` of the limiting eigenvalue distribution,
  obtained as a root of a cubic polynomial with the correct branch,
* the limiting density recovered by Stieltjes inversion,
* the phase transition quartic ``F``, its threshold ``gamma`` and the spike
  map ``G`` together with the eigenvector alignment ``zeta``,
* the small puncturing-rate (semicircle) approximations,
* the spectral clustering error predicted from ``zeta``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BranchSelectionError, ConfigError, DomainError, NumericalError

__all__ = [
    "TheoryParams",
    "SpikeSpectrum",
    "StieltjesValue",
    "SpectralDensity",
    "SpikePrediction",
    "SmallEpsSummary",
    "solve_stieltjes",
    "limiting_density",
    "support_edges",
    "f_poly",
    "g_func",
    "gamma_threshold",
    "spike_prediction",
    "zeta_from_f_identity_check",
    "clustering_error",
    "small_eps_summary",
    "marchenko_pastur_density",
    "semicircle_density",
]


@dataclass(frozen=True)
class TheoryParams:
    """Scalar regime: ``c0 = lim p/n``, puncturing rates and kernel diagonal."""

    c0: float
    eps_s: float
    eps_b: float
    b_diag: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.c0) and self.c0 > 0):
            raise ConfigError(f"c0 must be positive, got {self.c0}")
        for name in ("eps_s", "eps_b"):
            eps = getattr(self, name)
            if not (0.0 < eps <= 1.0):
                raise ConfigError(f"{name} must lie in (0, 1], got {eps}")
        if self.b_diag not in (0, 1):
            raise ConfigError(f"b_diag must be 0 or 1, got {self.b_diag}")

    @classmethod
    def from_dims(cls, p, n, eps_s, eps_b, b_diag=1):
        return cls(p / n, eps_s, eps_b, b_diag)

    # Coefficients of the canonical equation
    #   z = shift - 1/m - beta*m + gamma3*m^2 / (1 + a*m)
    @property
    def shift(self):
        return self.eps_s * self.b_diag

    @property
    def a(self):
        return self.eps_b * self.eps_s / self.c0

    @property
    def beta(self):
        return self.eps_b * self.eps_s**2 / self.c0

    @property
    def gamma3(self):
        return self.eps_b**3 * self.eps_s**3 / self.c0**2

    def z_of_m(self, m):
        """Inverse map ``m -> z`` of the Stieltjes transform."""
        return self.shift - 1.0 / m - self.beta * m + self.gamma3 * m**2 / (1.0 + self.a * m)

    def dz_dm(self, m):
        a = self.a
        return 1.0 / m**2 - self.beta + self.gamma3 * m * (2.0 + a * m) / (1.0 + a * m) ** 2


@dataclass(frozen=True)
class SpikeSpectrum:
    """Distinct eigenvalues (descending) of the population signal matrix."""

    values: tuple
    multiplicities: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        mult = tuple(int(x) for x in self.multiplicities)
        if len(vals) != len(mult):
            raise ConfigError("values and multiplicities differ in length")
        if any(x < 1 for x in mult):
            raise ConfigError("multiplicities must be >= 1")
        if any(vals[i] <= vals[i + 1] for i in range(len(vals) - 1)):
            raise ConfigError("spike values must be strictly descending")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "multiplicities", mult)

    @property
    def k(self):
        return sum(self.multiplicities)

    def blocks(self):
        """Index ranges ``range(start, stop)`` of each distinct value."""
        out, start = [], 0
        for mult in self.multiplicities:
            out.append(range(start, start + mult))
            start += mult
        return out

    @classmethod
    def from_eigenvalues(cls, eigenvalues, rtol=1e-9):
        """Merge eigenvalues closer than ``rtol`` times the largest magnitude."""
        vals = np.sort(np.asarray(eigenvalues, dtype=float))[::-1]
        scale = float(np.max(np.abs(vals), initial=0.0)) or 1.0
        distinct, mult = [], []
        for v in vals:
            if distinct and abs(v - distinct[-1]) <= rtol * scale:
                mult[-1] += 1
            else:
                distinct.append(float(v))
                mult.append(1)
        return cls(tuple(distinct), tuple(mult))


@dataclass(frozen=True)
class StieltjesValue:
    z: complex
    m: complex
    residual: float


@dataclass(frozen=True)
class SpectralDensity:
    grid: np.ndarray
    density: np.ndarray
    eta: float

    def mass(self):
        return float(np.trapezoid(self.density, self.grid))


@dataclass(frozen=True)
class SpikePrediction:
    ell: float
    gamma: float
    rho: float
    zeta: float
    isolated: bool


@dataclass(frozen=True)
class SmallEpsSummary:
    center: float
    radius: float
    ell_prime: float
    rho_prime: float
    zeta_approx: float
    gamma_approx: float


# ---------------------------------------------------------------------------
# Stieltjes transform


def _cubic_coefficients(z, params):
    """Coefficients (descending powers of m) of the cleared canonical equation."""
    a, beta, g3 = params.a, params.beta, params.gamma3
    d = params.shift - z
    return np.array([g3 - a * beta, a * d - beta, d - a, -1.0], dtype=complex)


def _roots(z, params):
    coefs = _cubic_coefficients(z, params)
    scale = np.max(np.abs(coefs))
    if abs(coefs[0]) <= 1e-15 * scale:
        # eps_b == 1: the cubic term cancels exactly
        coefs = coefs[1:]
    roots = np.roots(coefs)
    return np.array([_polish(r, z, params) for r in roots])


def _polish(m, z, params, steps=4):
    """Newton refinement on the rational form ``z_of_m(m) - z``."""
    best, best_res = m, abs(params.z_of_m(m) - z)
    for _ in range(steps):
        d = params.dz_dm(best)
        if d == 0 or not np.isfinite(d):
            break
        cand = best - (params.z_of_m(best) - z) / d
        res = abs(params.z_of_m(cand) - z)
        if not np.isfinite(res) or res >= best_res:
            break
        best, best_res = cand, res
    return best


def _fixed_point(z, params, m0=None, damping=0.5, tol=1e-14, max_iter=20000):
    a, beta, g3, shift = params.a, params.beta, params.gamma3, params.shift
    m = -1.0 / z if m0 is None else m0
    for _ in range(max_iter):
        new = 1.0 / (shift - z - beta * m + g3 * m**2 / (1.0 + a * m))
        new = damping * new + (1.0 - damping) * m
        if abs(new - m) <= tol * max(1.0, abs(new)):
            return new
        m = new
    return m


def _admissible_upper(roots, z):
    bound = 1.0 / z.imag
    keep = [r for r in roots if r.imag > 0 and abs(r) <= bound * (1 + 1e-9)]
    return keep


def _track(z, params):
    """Follow the physical root down a vertical path from far above ``z``."""
    x, y = z.real, max(z.imag, 0.0)
    top = 10.0 * (1.0 + abs(x) + params.shift + params.beta + params.a)
    heights = np.geomspace(top, max(y, 1e-13 * (1 + abs(x))), 60)
    m = -1.0 / complex(x, top)
    for h in heights:
        cand = _roots(complex(x, h), params)
        m = cand[np.argmin(np.abs(cand - m))]
    if y == 0.0:
        cand = _roots(complex(x, 0.0), params)
        m = cand[np.argmin(np.abs(cand - m))]
    return m


def _select_real_axis(x, params):
    z = complex(x, 0.0)
    roots = _roots(z, params)
    scale = 1e-9
    real = [r.real for r in roots if abs(r.imag) <= scale * (1 + abs(r))]
    increasing = [r for r in real if r != 0 and params.dz_dm(r) > 0]
    if len(increasing) == 1:
        return complex(increasing[0], 0.0)
    if not increasing:
        upper = [r for r in roots if r.imag > scale * (1 + abs(r))]
        if len(upper) == 1:
            return upper[0]
    return _track(z, params)


def solve_stieltjes(z, params: TheoryParams) -> StieltjesValue:
    """Limiting Stieltjes transform ``m(z)``.

    For ``Im z > 0`` the unique root of the cubic in the upper half-plane
    with ``|m| <= 1/Im z`` is returned. For real ``z`` the boundary value
    ``m(x + i0)`` is returned; it is real outside the support.
    """
    z = complex(z)
    if z.imag < 0:
        return _conj_value(solve_stieltjes(z.conjugate(), params))
    if z.imag > 0:
        cand = _admissible_upper(_roots(z, params), z)
        if len(cand) == 1:
            m = cand[0]
        else:
            m = _track(z, params)
            if not m.imag > 0:
                m = _fixed_point(z, params)
    else:
        m = _select_real_axis(z.real, params)
    if z.imag > 0 and not m.imag > 0:
        raise BranchSelectionError(f"no root with Im m > 0 at z={z}")
    residual = abs(params.z_of_m(m) - z)
    if not np.isfinite(residual):
        raise BranchSelectionError(f"non-finite residual at z={z}")
    return StieltjesValue(z, complex(m), float(residual))


def _conj_value(v):
    return StieltjesValue(v.z.conjugate(), v.m.conjugate(), v.residual)


def support_edges(params: TheoryParams):
    """Edges of the limiting support, ascending.

    Edges are the images ``z(m)`` of the real critical points of the
    inverse map; consecutive pairs delimit the support intervals.
    """
    a, beta, g3 = params.a, params.beta, params.gamma3
    # m^2 (1 + a m)^2 * dz/dm = (1+am)^2 - beta m^2 (1+am)^2 + g3 m^3 (2 + a m)
    one_am = np.poly1d([a, 1.0])
    mm = np.poly1d([1.0, 0.0, 0.0])
    poly = one_am**2 - beta * mm * one_am**2 + g3 * np.poly1d([1.0, 0, 0, 0]) * np.poly1d([a, 2.0])
    crit = [r.real for r in poly.roots if abs(r.imag) <= 1e-9 * (1 + abs(r)) and r.real != 0]
    crit = [m for m in crit if abs(1 + a * m) > 1e-12]
    edges = sorted(float(params.z_of_m(m)) for m in crit)
    return edges


def limiting_density(params: TheoryParams, grid, eta=1e-4, richardson=False) -> SpectralDensity:
    """Density ``Im m(x + i eta) / pi`` over ``grid``.

    ``eta`` must lie in ``(1e-6, 1e-2]``; ``eta = 0`` evaluates the exact
    boundary value instead. With ``richardson`` the estimates at ``eta`` and
    ``eta/2`` are combined to cancel the O(eta) bias.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
        raise ConfigError("grid must be a strictly ascending 1-d array")
    if not (eta == 0 or 1e-6 < eta <= 1e-2):
        raise ConfigError(f"eta must be 0 or lie in (1e-6, 1e-2], got {eta}")

    def at(h):
        return np.array([solve_stieltjes(complex(x, h), params).m.imag for x in grid]) / np.pi

    dens = at(eta)
    if richardson and eta > 0:
        dens = 2.0 * at(eta / 2.0) - dens
    dens = np.where(dens < 1e-12, 0.0, dens)
    return SpectralDensity(grid, dens, float(eta))


# ---------------------------------------------------------------------------
# Phase transition


def _f_coefficients(params):
    es, eb, c0 = params.eps_s, params.eps_b, params.c0
    return (1.0, 2.0 / es, (1.0 - c0 / eb) / es**2, -2.0 * c0 / es**3, -c0 / es**4)


def f_poly(t, params: TheoryParams):
    """Phase transition quartic, evaluated by Horner's rule."""
    acc = 0.0
    for c in _f_coefficients(params):
        acc = acc * t + c
    return acc


def g_func(t, params: TheoryParams):
    """Spike map: limiting position of the eigenvalue attached to ``t``."""
    es, eb, c0 = params.eps_s, params.eps_b, params.c0
    u = 1.0 + es * t
    return params.shift + eb * es * u / c0 + es / u + eb / (t * u)


def gamma_threshold(params: TheoryParams) -> float:
    """Largest real root of the quartic.

    The coefficient sign pattern has a single sign change, so the quartic
    has exactly one positive root; it is bracketed and bisected to full
    precision.
    """
    coefs = _f_coefficients(params)
    lo, hi = 0.0, 1.0 + max(abs(c) for c in coefs[1:])  # Cauchy bound
    if not (f_poly(lo, params) < 0 < f_poly(hi, params)):
        raise NumericalError("failed to bracket the phase transition threshold")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if f_poly(mid, params) > 0:
            hi = mid
        else:
            lo = mid
    return lo if abs(f_poly(lo, params)) <= abs(f_poly(hi, params)) else hi


def _zeta(ell, params):
    es = params.eps_s
    return f_poly(ell, params) * es**3 / (ell * (1.0 + es * ell) ** 3)


def spike_prediction(ell, params: TheoryParams, gamma=None) -> SpikePrediction:
    if not ell > 0:
        raise DomainError(f"ell must be positive, got {ell}")
    if gamma is None:
        gamma = gamma_threshold(params)
    if ell > gamma:
        zeta = min(max(_zeta(ell, params), 0.0), 1.0)
        return SpikePrediction(float(ell), gamma, float(g_func(ell, params)), float(zeta), True)
    return SpikePrediction(float(ell), gamma, float(g_func(gamma, params)), 0.0, False)


def zeta_from_f_identity_check(ell, params: TheoryParams) -> float:
    """Alignment from the expanded four-term expression (above threshold only)."""
    if not ell > 0:
        raise DomainError(f"ell must be positive, got {ell}")
    if ell < gamma_threshold(params):
        raise DomainError("ell must exceed the phase transition threshold")
    es, eb, c0 = params.eps_s, params.eps_b, params.c0
    u = es * ell
    return (
        u / (1 + u)
        - u / (eb / c0 * (1 + u) ** 3)
        - 1 / ((1 / c0) * (1 + u) ** 3)
        - 1 / ((1 / c0) * u * (1 + u) ** 2)
    )


def clustering_error(zeta) -> float:
    """Gaussian tail ``Q(sqrt(zeta / (1 - zeta)))``."""
    if not (0.0 <= zeta < 1.0):
        raise DomainError(f"zeta must lie in [0, 1), got {zeta}")
    t = math.sqrt(zeta / (1.0 - zeta))
    return 0.5 * math.erfc(t / math.sqrt(2.0))


def small_eps_summary(params: TheoryParams, ell) -> SmallEpsSummary:
    """Semicircle-regime approximations; only accurate for small rates."""
    scale = math.sqrt(params.beta)
    ell_p = ell * scale
    rho_p = ell_p + 1.0 / ell_p if ell_p > 1 else 2.0
    return SmallEpsSummary(
        center=params.shift,
        radius=2.0 * scale,
        ell_prime=ell_p,
        rho_prime=rho_p,
        zeta_approx=max(0.0, 1.0 - 1.0 / ell_p**2),
        gamma_approx=1.0 / scale,
    )


# ---------------------------------------------------------------------------
# Reference laws


def marchenko_pastur_density(x, ratio, scale=1.0):
    """Continuous part of the Marchenko-Pastur law.

    Limit of ``(1/N) X^T X`` eigenvalues for an ``N x M`` matrix of unit
    variance entries with ``ratio = M/N``, multiplied by ``scale``. For
    ``ratio > 1`` an atom of mass ``1 - 1/ratio`` sits at zero and is not
    included.
    """
    x = np.asarray(x, dtype=float) / scale
    lo, hi = (1 - math.sqrt(ratio)) ** 2, (1 + math.sqrt(ratio)) ** 2
    inside = (x > lo) & (x < hi)
    out = np.zeros_like(x)
    xi = x[inside]
    out[inside] = np.sqrt((hi - xi) * (xi - lo)) / (2 * math.pi * ratio * xi)
    return out / scale


def semicircle_density(x, center, radius):
    x = np.asarray(x, dtype=float)
    u = (x - center) / radius
    out = np.zeros_like(x)
    inside = np.abs(u) < 1
    out[inside] = 2.0 / (math.pi * radius) * np.sqrt(1 - u[inside] ** 2)
    return out
