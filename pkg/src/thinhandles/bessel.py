"""Modified Bessel functions I_nu and K_nu for the radial Laplace problem.

The production evaluators delegate to the exponentially scaled AMOS
routines in :mod:`scipy.special` and add the domain contract used by the
rest of the package: arguments are checked, the supported window
``0 < x <= 50`` and ``0 <= nu <= 10`` is enforced with a structured
:class:`RangeError`, and the ratio bundle is formed from scaled values so
that no intermediate overflows.

Two independent oracles live here as well. :func:`i_series` sums the
ascending power series and :func:`k_integral` integrates
``exp(-x cosh t) cosh(nu t)`` over the half line. Tests compare the
production path against both.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy import integrate, special

from ._errors import DomainError, NumericalError, RangeError

X_MAX = 50.0
NU_MAX = 10.0

__all__ = [
    "X_MAX",
    "NU_MAX",
    "RatioBundle",
    "order_from_dimension",
    "bessel_i",
    "bessel_k",
    "bessel_ratio_bundle",
    "i_series",
    "k_integral",
]


class RatioBundle(NamedTuple):
    """The three ratios ``I_nu/K_nu``, ``I_nu/K_{nu+1}`` and ``K_nu/K_{nu+1}``."""

    IK: float
    IK_plus: float
    KK_plus: float


def order_from_dimension(m: int) -> float:
    """Return ``(m - 2) / 2``, the order attached to dimension ``m``."""
    if int(m) != m or m < 2:
        raise DomainError(f"dimension must be an integer >= 2, got {m!r}")
    return (int(m) - 2) / 2.0


def _check_nu(nu):
    nu = float(nu)
    if not math.isfinite(nu) or nu < 0:
        raise DomainError(f"order must be finite and >= 0, got {nu!r}")
    if nu > NU_MAX:
        raise RangeError(
            f"order {nu} outside supported range [0, {NU_MAX}]",
            parameter="nu", value=nu, limit=NU_MAX,
        )
    return nu


def _check_x(x, *, allow_zero):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("argument must be finite")
    if allow_zero:
        if np.any(arr < 0):
            raise DomainError(f"argument must be >= 0, got {x!r}")
    elif np.any(arr <= 0):
        raise DomainError(f"argument must be > 0, got {x!r}")
    if np.any(arr > X_MAX):
        raise RangeError(
            f"argument beyond supported range (0, {X_MAX}]",
            parameter="x", value=float(np.max(arr)), limit=X_MAX,
        )
    return arr


def _scalar_or_array(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def bessel_i(nu: float, x) -> float | np.ndarray:
    """Modified Bessel function of the first kind ``I_nu(x)`` for ``x >= 0``."""
    nu = _check_nu(nu)
    arr = _check_x(x, allow_zero=True)
    out = special.ive(nu, arr) * np.exp(arr)
    return _scalar_or_array(out, x)


def bessel_k(nu: float, x) -> float | np.ndarray:
    """Modified Bessel function of the second kind ``K_nu(x)`` for ``x > 0``."""
    nu = _check_nu(nu)
    arr = _check_x(x, allow_zero=False)
    out = special.kve(nu, arr) * np.exp(-arr)
    if np.any(~np.isfinite(out)):
        raise RangeError("K_nu overflowed; argument too small for this order",
                         parameter="x", value=float(np.min(arr)))
    return _scalar_or_array(out, x)


def bessel_ratio_bundle(nu: float, x: float) -> RatioBundle:
    """Return ``(I_nu/K_nu, I_nu/K_{nu+1}, K_nu/K_{nu+1})`` at ``x > 0``."""
    nu = _check_nu(nu)
    x = float(_check_x(x, allow_zero=False))
    i_s = special.ive(nu, x)
    k0_s = special.kve(nu, x)
    k1_s = special.kve(nu + 1.0, x)
    if not (np.isfinite(k0_s) and np.isfinite(k1_s)) or k1_s == 0.0:
        raise RangeError("K overflow in ratio bundle", parameter="x", value=x)
    growth = math.exp(2.0 * x)
    return RatioBundle(i_s / k0_s * growth, i_s / k1_s * growth, k0_s / k1_s)


# ---------------------------------------------------------------- oracles


def i_series(nu: float, x: float, *, rtol: float = 1e-17, max_terms: int = 10_000) -> float:
    """``I_nu(x)`` from its ascending power series (positive terms, no cancellation)."""
    nu = float(nu)
    x = float(x)
    if x < 0 or nu < 0:
        raise DomainError("series oracle needs nu >= 0 and x >= 0")
    if x == 0.0:
        return 1.0 if nu == 0.0 else 0.0
    half = 0.5 * x
    term = math.exp(nu * math.log(half) - math.lgamma(nu + 1.0))
    total = term
    q = half * half
    for k in range(max_terms):
        term *= q / ((k + 1.0) * (nu + k + 1.0))
        total += term
        if term < rtol * total and k > q:
            return total
    raise NumericalError("power series did not converge", achieved=term / total)


def k_integral(nu: float, x: float, *, rtol: float = 1e-13) -> float:
    """``K_nu(x)`` from ``int_0^inf exp(-x cosh t) cosh(nu t) dt``."""
    nu = float(nu)
    x = float(x)
    if x <= 0 or nu < 0:
        raise DomainError("integral oracle needs nu >= 0 and x > 0")

    # work with K_nu(x) e^x; integrand exp(-x (cosh t - 1) + nu t) (1 + e^{-2 nu t}) / 2
    def integrand(t):
        return 0.5 * math.exp(-x * (math.cosh(t) - 1.0) + nu * t) * (1.0 + math.exp(-2.0 * nu * t))

    # the exponent peaks near t* = asinh(nu / x); cut where it is 60 below the peak
    t_peak = math.asinh(nu / x) if nu > 0 else 0.0

    def log_f(t):
        return -x * (math.cosh(t) - 1.0) + nu * t

    top = log_f(t_peak)
    t_hi = max(t_peak, 1.0)
    while log_f(t_hi) > top - 60.0:
        t_hi *= 1.5
    pieces = sorted({0.0, t_peak, t_hi})
    total = 0.0
    err = 0.0
    for a, b in zip(pieces[:-1], pieces[1:]):
        if b <= a:
            continue
        val, e = integrate.quad(integrand, a, b, epsabs=0.0, epsrel=rtol, limit=400)
        total += val
        err += e
    if err > 1e3 * rtol * abs(total):
        raise NumericalError("K integral oracle did not converge", achieved=err / total)
    return total * math.exp(-x)
