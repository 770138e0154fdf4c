"""Harmonic extension onto thin cylinders and the delta rate constants.

A handle is the cylinder ``[0, ell] x eps S^(m-1)``. After rescaling the
longitudinal variable to ``s in [0, 1]`` and expanding in sphere
eigenfunctions, the harmonic extension of boundary data splits into
one profile per transversal frequency ``mu``:

    mu = 0:  h(s) = a_plus s + a_minus (1 - s)
    mu > 0:  h(s) = a_plus sinh(mu s)/sinh(mu) + a_minus sinh(mu (1-s))/sinh(mu)

with the scaled frequency ``mu_eps = (ell / eps) mu`` in place of ``mu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence

import numpy as np

from . import constants
from ._errors import DomainError
from .constants import ManifoldConstants

_SERIES_SWITCH = 0.5

__all__ = [
    "HandleGeometry",
    "ModeBoundaryData",
    "HarmonicExtension",
    "DeltaBundle",
    "DeltaOrders",
    "sphere_frequency",
    "mode_profile",
    "mode_l2_norm_sq",
    "mode_energy_sq",
    "mode_l2_bound",
    "mode_energy_bound",
    "handle_energy",
    "harmonic_extension",
    "poincare_dirichlet_bound",
    "delta_bundle",
    "delta_orders",
]


@dataclass(frozen=True)
class HandleGeometry:
    m: int
    eps: float
    ell: float
    eta: float
    mc: ManifoldConstants = field(default_factory=ManifoldConstants)

    def __post_init__(self):
        constants.log2_bracket(1.0, self.m)  # dimension check
        if not 0 < self.eps < self.eta <= self.mc.r0:
            raise DomainError(
                f"need 0 < eps < eta <= r0, got eps={self.eps}, eta={self.eta}, r0={self.mc.r0}"
            )
        if not self.ell > 0:
            raise DomainError(f"handle length must be > 0, got {self.ell}")


@dataclass(frozen=True)
class ModeBoundaryData:
    """Boundary amplitudes of one transversal mode: ``h(1) = a_plus``, ``h(0) = a_minus``."""

    mu: float
    a_plus: complex
    a_minus: complex

    def __post_init__(self):
        if not self.mu >= 0:
            raise DomainError(f"mu must be >= 0, got {self.mu}")

    @classmethod
    def from_sphere_mode(cls, m: int, k: int, a_plus: complex, a_minus: complex) -> "ModeBoundaryData":
        return cls(sphere_frequency(m, k), a_plus, a_minus)


def sphere_frequency(m: int, k: int) -> float:
    """``sqrt(k(k+m-2))``, the square root of the k-th eigenvalue of the unit sphere ``S^(m-1)``."""
    constants.log2_bracket(1.0, m)
    if int(k) != k or k < 0:
        raise DomainError(f"mode index must be an integer >= 0, got {k!r}")
    return math.sqrt(k * (k + m - 2))


# ------------------------------------------------------------ one profile


def mode_profile(mu_eps: float, data: ModeBoundaryData, s):
    """Evaluate ``h^mu(s)`` at scaled frequency ``mu_eps``; ``h(0) = a_minus`` and ``h(1) = a_plus``."""
    s_arr = np.asarray(s, dtype=float)
    if np.any((s_arr < 0) | (s_arr > 1)):
        raise DomainError("profile variable s must lie in [0, 1]")
    if mu_eps == 0:
        out = data.a_plus * s_arr + data.a_minus * (1.0 - s_arr)
    else:
        out = data.a_plus * _sinh_ratio(mu_eps, s_arr) + data.a_minus * _sinh_ratio(mu_eps, 1.0 - s_arr)
    return complex(out) if np.ndim(s) == 0 else out


def _sinh_ratio(mu, s):
    # sinh(mu s) / sinh(mu) = e^{mu (s-1)} (1 - e^{-2 mu s}) / (1 - e^{-2 mu}), overflow free
    return np.exp(mu * (s - 1.0)) * np.expm1(-2.0 * mu * s) / math.expm1(-2.0 * mu)


def _series_sinh_minus_x(x):
    # sinh x - x for small x
    term = x**3 / 6.0
    total = term
    k = 1
    while abs(term) > 1e-18 * abs(total):
        term *= x * x / ((2 * k + 2) * (2 * k + 3))
        total += term
        k += 1
    return total


def _series_x_cosh_minus_sinh(x):
    # x cosh x - sinh x = sum_{k>=1} 2k x^(2k+1) / (2k+1)!
    total = 0.0
    power_over_fact = x  # x^(2k+1)/(2k+1)! at k = 0
    k = 0
    while True:
        k += 1
        power_over_fact *= x * x / ((2 * k) * (2 * k + 1))
        term = 2 * k * power_over_fact
        total += term
        if term < 1e-18 * total:
            return total


def _coefficients(mu):
    """Return ``(l2_diag, l2_cross, en_diag, en_cross)`` so that

    ``||h||^2 = l2_diag (|a+|^2 + |a-|^2) + l2_cross Re(a+ conj a-)`` and
    ``||h'||^2 = en_diag (|a+|^2 + |a-|^2) - en_cross Re(a+ conj a-)``.
    """
    if mu == 0:
        return 1.0 / 3.0, 1.0 / 3.0, 1.0, 2.0
    if mu < _SERIES_SWITCH:
        sh2 = math.sinh(mu) ** 2
        l2_diag = _series_sinh_minus_x(2 * mu) / (4.0 * mu * sh2)
        l2_cross = _series_x_cosh_minus_sinh(mu) / (mu * sh2)
        en_diag = mu * (math.sinh(2 * mu) + 2 * mu) / (4.0 * sh2)
        en_cross = mu * (mu * math.cosh(mu) + math.sinh(mu)) / sh2
        return l2_diag, l2_cross, en_diag, en_cross
    q = math.exp(-2.0 * mu)
    d = (1.0 - q) ** 2
    half_em = 2.0 * math.exp(-mu)
    l2_diag = (0.5 * (1.0 - q * q) - 2.0 * mu * q) / (mu * d)
    l2_cross = half_em * (mu * (1.0 + q) - (1.0 - q)) / (mu * d)
    en_diag = mu * (0.5 * (1.0 - q * q) + 2.0 * mu * q) / d
    en_cross = mu * half_em * (mu * (1.0 + q) + (1.0 - q)) / d
    return l2_diag, l2_cross, en_diag, en_cross


def _amplitudes(data):
    ap = complex(data.a_plus)
    am = complex(data.a_minus)
    return abs(ap) ** 2 + abs(am) ** 2, (ap * am.conjugate()).real


def mode_l2_norm_sq(mu: float, data: ModeBoundaryData) -> float:
    """Exact ``int_0^1 |h^mu(s)|^2 ds``."""
    if not mu >= 0:
        raise DomainError(f"mu must be >= 0, got {mu}")
    diag, cross = _amplitudes(data)
    l2_diag, l2_cross, _, _ = _coefficients(mu)
    return l2_diag * diag + l2_cross * cross


def mode_energy_sq(mu: float, data: ModeBoundaryData) -> float:
    """Exact ``int_0^1 |d/ds h^mu(s)|^2 ds``."""
    if not mu >= 0:
        raise DomainError(f"mu must be >= 0, got {mu}")
    diag, cross = _amplitudes(data)
    _, _, en_diag, en_cross = _coefficients(mu)
    return max(en_diag * diag - en_cross * cross, 0.0)


def mode_l2_bound(mu: float, data: ModeBoundaryData) -> float:
    diag, _ = _amplitudes(data)
    return 0.5 * diag if mu == 0 else 2.0 / (3.0 * mu) * diag


def mode_energy_bound(mu: float, data: ModeBoundaryData) -> float:
    diag, _ = _amplitudes(data)
    return 2.0 * diag if mu == 0 else (mu + 2.0) * diag


# ------------------------------------------------------------ whole handle


def _mode_energy_on_handle(geom, mode):
    mu_eps = geom.ell / geom.eps * mode.mu
    return (mode_energy_sq(mu_eps, mode) / geom.ell**2
            + (mode.mu / geom.eps) ** 2 * mode_l2_norm_sq(mu_eps, mode))


def handle_energy(geom: HandleGeometry, modes: Sequence[ModeBoundaryData]) -> float:
    """Energy of the harmonic extension, weights ``1/ell^2`` along and ``mu^2/eps^2`` across."""
    return float(math.fsum(_mode_energy_on_handle(geom, md) for md in modes))


@dataclass(frozen=True)
class HarmonicExtension:
    modes: tuple[ModeBoundaryData, ...]
    l2_bullet: float
    l2_perp: float
    energy_bullet: float
    energy_perp: float
    bounds: dict
    tail_estimate: float = 0.0

    @property
    def l2_total(self) -> float:
        return self.l2_bullet + self.l2_perp

    @property
    def energy_total(self) -> float:
        return self.energy_bullet + self.energy_perp


def _truncate(modes, geom, rtol, max_modes):
    if isinstance(modes, Sequence):
        return tuple(modes), 0.0
    kept = []
    running = 0.0
    last = 0.0
    for md in modes:
        kept.append(md)
        last = mode_l2_norm_sq(geom.ell / geom.eps * md.mu, md) + _mode_energy_on_handle(geom, md)
        running += last
        if running > 0 and last < rtol * running:
            break
        if len(kept) >= max_modes:
            break
    return tuple(kept), last


def harmonic_extension(geom: HandleGeometry, modes: Iterable[ModeBoundaryData], *,
                       rtol: float = 1e-14, max_modes: int = 100_000) -> HarmonicExtension:
    """Assemble the extension of per-mode boundary traces and split it into ``mu = 0`` and ``mu > 0`` parts.

    Norms refer to the rescaled cylinder ``[0,1] x S^(m-1)`` with orthonormal
    sphere modes; each entry of ``modes`` is one sphere eigenfunction. A
    sequence is used in full. Any other iterable (e.g. an infinite generator)
    is cut once a mode contributes less than ``rtol`` of the running total;
    the last contribution is kept as ``tail_estimate``.
    """
    modes, tail = _truncate(modes, geom, rtol, max_modes)
    zero = [md for md in modes if md.mu == 0]
    rest = [md for md in modes if md.mu > 0]
    ratio = geom.ell / geom.eps
    l2_b = math.fsum(mode_l2_norm_sq(0.0, md) for md in zero)
    l2_p = math.fsum(mode_l2_norm_sq(ratio * md.mu, md) for md in rest)
    en_b = math.fsum(_mode_energy_on_handle(geom, md) for md in zero)
    en_p = math.fsum(_mode_energy_on_handle(geom, md) for md in rest)
    sq_b = math.fsum(_amplitudes(md)[0] for md in zero)
    sq_p = math.fsum(_amplitudes(md)[0] for md in rest)
    bounds = {
        "l2_bullet": 0.5 * sq_b,
        "l2_perp": geom.eps / geom.ell * sq_p,
        "energy_bullet": 2.0 / geom.ell**2 * sq_b,
        "energy_perp": math.fsum(
            ((md.mu + 1.0) / (geom.eps * geom.ell) + 2.0 / geom.ell**2) * _amplitudes(md)[0]
            for md in rest
        ),
    }
    return HarmonicExtension(modes, l2_b, l2_p, en_b, en_p, bounds, tail)


def poincare_dirichlet_bound(ell: float) -> float:
    """Lowest Dirichlet eigenvalue ``pi^2 / ell^2`` of a handle of length ``ell``."""
    if not ell > 0:
        raise DomainError(f"handle length must be > 0, got {ell}")
    return math.pi**2 / ell**2


# ------------------------------------------------------------ delta family


@dataclass(frozen=True)
class DeltaBundle:
    delta_ball: float
    delta_harm: float
    delta_handle: float
    delta_harm_bullet: float
    delta_harm_perp: float
    delta_harm_prime: float
    delta_antisym: float
    method: str = "exact"

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in DELTA_NAMES} | {"method": self.method}


DELTA_NAMES = (
    "delta_ball",
    "delta_harm",
    "delta_handle",
    "delta_harm_bullet",
    "delta_harm_perp",
    "delta_harm_prime",
    "delta_antisym",
)


def _euclidean_pair(geom, asymptotic):
    m, eps, eta = geom.m, geom.eps, geom.eta
    if asymptotic:
        nonconc = eps**m / eta**m + constants.nonconc_leading_correction(m, eps)
        trace = m * eps ** (m - 1) / eta**m + constants.trace_leading_correction(m, eps)
    else:
        nonconc = constants.nonconc_const(m, eps, eta)
        trace = constants.trace_const_full(m, eps, eta)
    return nonconc, trace


def delta_bundle(geom: HandleGeometry, *, asymptotic: bool = False) -> DeltaBundle:
    """All seven rate constants for one handle geometry.

    ``asymptotic=True`` replaces the exact Euclidean constants by their
    leading terms (faster, flagged in ``method``).
    """
    m, eps, ell, eta, mc = geom.m, geom.eps, geom.ell, geom.eta, geom.mc
    nonconc, trace = _euclidean_pair(geom, asymptotic)
    c_m = math.sqrt(mc.N) * mc.K ** ((m + 1) / 2) * math.sqrt(nonconc)
    c_prime = math.sqrt(mc.N) * mc.K ** ((m + 2) / 4) * math.sqrt(trace)
    harm = math.sqrt(ell + eps) * c_prime
    bullet = math.sqrt(2.0 / ell) * c_prime
    perp = math.sqrt(2.0 * math.sqrt(m - 1) * mc.K ** ((m + 2) / 2) * (eps / ell + 1.0)) * c_m
    antisym_sq = (mc.N * mc.K ** (m / 2) / m) * (eta**m / eps ** (m - 2)) * max(
        ell / eps, 4.0 * constants.log2_bracket(eta / eps, m)
    )
    return DeltaBundle(
        delta_ball=c_m,
        delta_harm=harm,
        delta_handle=ell / math.pi + harm,
        delta_harm_bullet=bullet,
        delta_harm_perp=perp,
        delta_harm_prime=max(bullet, perp),
        delta_antisym=math.sqrt(antisym_sq),
        method="asymptotic" if asymptotic else "exact",
    )


@dataclass(frozen=True)
class DeltaOrders:
    """Exponents ``p`` with ``delta = O(eps^p)`` when ``eta = eps^alpha r0`` and ``ell = eps^lambda``."""

    delta_ball: object
    delta_harm: object
    delta_handle: object
    delta_harm_bullet: object
    delta_harm_perp: object
    delta_harm_prime: object
    delta_antisym: object

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in DELTA_NAMES}


def _exact(x):
    if isinstance(x, Rational):
        return Fraction(x)
    return float(x)


def delta_orders(m: int, alpha, lam) -> DeltaOrders:
    """Power of ``eps`` governing each rate constant; exact when ``alpha`` and ``lam`` are rational.

    Logarithmic factors in dimension 2 are not part of the exponent.
    """
    constants.log2_bracket(1.0, m)
    alpha, lam = _exact(alpha), _exact(lam)
    if not 0 <= alpha < 1:
        raise DomainError(f"alpha must lie in [0, 1), got {alpha}")
    if not lam > 0:
        raise DomainError(f"lambda must be > 0, got {lam}")
    two = Fraction(2) if isinstance(alpha, Fraction) and isinstance(lam, Fraction) else 2.0
    x = min(m * (1 - alpha), two)
    harm = (min(lam - 1, 0) + x) / 2
    bullet = (-lam - 1 + x) / 2
    perp = (min(1 - lam, 0) + x) / 2
    return DeltaOrders(
        delta_ball=x / 2,
        delta_harm=harm,
        delta_handle=min(lam, harm),
        delta_harm_bullet=bullet,
        delta_harm_perp=perp,
        delta_harm_prime=min(bullet, perp),
        delta_antisym=(m * alpha - (m - 2) + min(lam - 1, 0)) / 2,
    )
