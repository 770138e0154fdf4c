"""Optimal trace and non-concentration constants on Euclidean balls.

All trace constants below are returned *squared*: ``trace_const_full``
is the smallest ``C`` with ``||u||^2_{sphere of radius r} <= C ||u||^2_{H^1}``
on a ball of radius ``eta``, and ``nonconc_const`` is the matching squared
constant for the solid ball of radius ``eps``. The closed forms use the
modified Bessel functions of order ``nu = (m - 2) / 2``; :func:`ode_oracle`
solves the radial equation directly and serves as an independent check.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import integrate

from . import bessel
from ._errors import DomainError, NumericalError

ETA_M = 0.5
"""Radius below which the asymptotic expansions are considered valid."""

LOG2_MINUS_EULER = math.log(2.0) - np.euler_gamma
"""``log 2 - gamma``; lies in ``(0.115, 0.116)``."""

QUAD_EPSREL = 1e-10
QUAD_EPSABS = 1e-12

__all__ = [
    "ETA_M",
    "LOG2_MINUS_EULER",
    "ConstantResult",
    "ManifoldConstants",
    "MufReport",
    "log2_bracket",
    "trace_const_annulus",
    "trace_const_ball",
    "trace_const_full",
    "trace_const_full_ratio_form",
    "trace_leading_correction",
    "trace_remainder_scale",
    "trace_const_asymptotic",
    "nonconc_const",
    "nonconc_leading_correction",
    "nonconc_remainder_scale",
    "nonconc_asymptotic",
    "manifold_nonconc",
    "manifold_trace",
    "dtn_sphere_eigenvalue",
    "verify_muf",
    "ode_oracle",
    "oracle_trace_constants",
]


@dataclass(frozen=True)
class ConstantResult:
    value: float
    leading_term: float
    remainder: float
    method: Literal["bessel_formula", "quadrature", "asymptotic"]
    remainder_scale: float = float("nan")
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ManifoldConstants:
    """Geometry constants of the base manifold, supplied by the user.

    ``C_ext`` and ``C_nbhd`` default to 1, the values used for flat models.
    """

    N: int = 1
    K: float = 1.0
    r0: float = 1.0
    r1: float = 0.5
    kappa0: float = 0.0
    C_ext: float = 1.0
    C_nbhd: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"N must be a positive integer, got {self.N!r}")
        if not self.K >= 1:
            raise DomainError(f"K must be >= 1, got {self.K!r}")
        if not 0 < self.r1 < self.r0 <= 1:
            raise DomainError(f"need 0 < r1 < r0 <= 1, got r1={self.r1!r}, r0={self.r0!r}")
        if not math.isfinite(self.kappa0):
            raise DomainError("kappa0 must be finite")
        if not self.C_ext >= 1:
            raise DomainError(f"C_ext must be >= 1, got {self.C_ext!r}")
        if not self.C_nbhd > 0:
            raise DomainError(f"C_nbhd must be > 0, got {self.C_nbhd!r}")

    @property
    def C_ellreg(self) -> float:
        return 2.0 + max(0.0, -self.kappa0)


@dataclass(frozen=True)
class MufReport:
    m: int
    k_max: int
    slack: tuple[float, ...]
    equality: bool


def _check_dim(m):
    return bessel.order_from_dimension(m)


def _check_pair(r, eta):
    r = float(r)
    eta = float(eta)
    if not (math.isfinite(r) and math.isfinite(eta)):
        raise DomainError("radii must be finite")
    if not 0 < r < eta:
        raise DomainError(f"need 0 < r < eta, got r={r!r}, eta={eta!r}")
    return r, eta


def log2_bracket(x: float, m: int) -> float:
    """``log x`` in dimension 2 and the neutral factor 1 otherwise."""
    if not x > 0:
        raise DomainError(f"bracket argument must be > 0, got {x!r}")
    _check_dim(m)
    return math.log(x) if m == 2 else 1.0


# ------------------------------------------------------------ exact forms


def trace_const_annulus(m: int, r: float, eta: float) -> float:
    """Squared trace constant of the sphere ``|x| = r`` inside the shell ``r < |x| < eta``."""
    nu = _check_dim(m)
    r, eta = _check_pair(r, eta)
    i0r, i1r = bessel.bessel_i(nu, r), bessel.bessel_i(nu + 1, r)
    k0r, k1r = bessel.bessel_k(nu, r), bessel.bessel_k(nu + 1, r)
    i1e, k1e = bessel.bessel_i(nu + 1, eta), bessel.bessel_k(nu + 1, eta)
    num = i0r * k1e + k0r * i1e
    a, b = k1r * i1e, i1r * k1e
    den = a - b
    if not den > 64 * np.finfo(float).eps * a:
        raise NumericalError(
            f"denominator lost all digits (r={r}, eta={eta}); shell too thin",
            achieved=abs(den / a) if a else float("inf"),
        )
    return num / den


def trace_const_ball(m: int, r: float) -> float:
    """Squared trace constant of the sphere ``|x| = r`` inside the ball it bounds."""
    nu = _check_dim(m)
    r = float(r)
    if not r > 0:
        raise DomainError(f"radius must be > 0, got {r!r}")
    return bessel.bessel_i(nu, r) / bessel.bessel_i(nu + 1, r)


def trace_const_full(m: int, r: float, eta: float) -> float:
    """Squared trace constant of the sphere ``|x| = r`` inside the ball of radius ``eta``."""
    return 1.0 / (1.0 / trace_const_annulus(m, r, eta) + 1.0 / trace_const_ball(m, r))


def trace_const_full_ratio_form(m: int, r: float, eta: float) -> float:
    """Same quantity as :func:`trace_const_full`, written with Bessel ratios only.

    ``(IK+_nu(r) / IK_{nu+1}(eta) + KK+_nu(r)) / (1 + IK_{nu+1}(r) / IK_nu(r))``
    """
    nu = _check_dim(m)
    r, eta = _check_pair(r, eta)
    at_r = bessel.bessel_ratio_bundle(nu, r)
    ik_next_r = bessel.bessel_ratio_bundle(nu + 1, r).IK
    ik_next_eta = bessel.bessel_ratio_bundle(nu + 1, eta).IK
    return (at_r.IK_plus / ik_next_eta + at_r.KK_plus) / (1.0 + ik_next_r / at_r.IK)


# ------------------------------------------------------------ asymptotics


def trace_leading_correction(m: int, r: float) -> float:
    """Radius-only part of the leading trace term: ``r/(m-2)``, or ``(log 2 - gamma - log r) r`` if ``m = 2``."""
    _check_dim(m)
    if m == 2:
        return (LOG2_MINUS_EULER - math.log(r)) * r
    return r / (m - 2)


def trace_remainder_scale(m: int, r: float, eta: float) -> float:
    """Size of the admissible remainder: ``r^(m-1)/eta^m * eta^2 [-log eta]_2 + r^2``."""
    return r ** (m - 1) / eta**m * eta**2 * log2_bracket(1.0 / eta, m) + r**2


def _check_asymptotic(m, r, eta, eta_m):
    _check_dim(m)
    r, eta = _check_pair(r, eta)
    if not eta < eta_m:
        raise DomainError(f"asymptotic expansion needs eta < eta_m = {eta_m}, got eta={eta}")
    return r, eta


def trace_const_asymptotic(m: int, r: float, eta: float, *, eta_m: float = ETA_M) -> ConstantResult:
    r, eta = _check_asymptotic(m, r, eta, eta_m)
    value = trace_const_full(m, r, eta)
    lead = m * r ** (m - 1) / eta**m + trace_leading_correction(m, r)
    return ConstantResult(
        value=value,
        leading_term=lead,
        remainder=value - lead,
        method="asymptotic",
        remainder_scale=trace_remainder_scale(m, r, eta),
        metadata={"eta_m": eta_m, "eta_m_is_choice": True},
    )


def nonconc_leading_correction(m: int, eps: float) -> float:
    """``eps^2 / (2(m-2))``, or ``(eps^2/2)(2 + log 2 - gamma - log eps)`` if ``m = 2``."""
    _check_dim(m)
    if m == 2:
        return 0.5 * eps**2 * (2.0 + LOG2_MINUS_EULER - math.log(eps))
    return eps**2 / (2.0 * (m - 2))


def nonconc_remainder_scale(m: int, eps: float, eta: float) -> float:
    return eps**m / eta**m * eta**2 * log2_bracket(1.0 / eta, m) + eps**3 / 3.0


def nonconc_const(m: int, eps: float, eta: float) -> float:
    """Squared non-concentration constant of ``B_eps`` in ``B_eta``.

    Integrates the squared trace constant of the spheres ``|x| = r`` over ``0 < r < eps``.
    """
    _check_dim(m)
    eps, eta = _check_pair(eps, eta)
    scale = trace_const_full(m, eps, eta) * eps
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(
                lambda r: trace_const_full(m, r, eta), 0.0, eps,
                epsabs=min(QUAD_EPSABS, 1e-3 * QUAD_EPSREL * scale),
                epsrel=QUAD_EPSREL, limit=200,
            )
        except integrate.IntegrationWarning as exc:
            raise NumericalError(f"quadrature did not converge: {exc}") from exc
    if err > 10 * QUAD_EPSREL * abs(val) + QUAD_EPSABS:
        raise NumericalError("quadrature tolerance not met", achieved=err / abs(val))
    return val


def nonconc_asymptotic(m: int, eps: float, eta: float, *, eta_m: float = ETA_M) -> ConstantResult:
    eps, eta = _check_asymptotic(m, eps, eta, eta_m)
    value = nonconc_const(m, eps, eta)
    lead = eps**m / eta**m + nonconc_leading_correction(m, eps)
    return ConstantResult(
        value=value,
        leading_term=lead,
        remainder=value - lead,
        method="asymptotic",
        remainder_scale=nonconc_remainder_scale(m, eps, eta),
        metadata={"eta_m": eta_m, "eta_m_is_choice": True},
    )


# ------------------------------------------------------- manifold versions


def _check_manifold(eps, eta, mc):
    # eta = r0 is allowed: it is the alpha = 0 end of the scale eta = eps^alpha r0
    if not eta <= mc.r0:
        raise DomainError(f"need eta <= r0, got eta={eta}, r0={mc.r0}")


def manifold_nonconc(m: int, eps: float, eta: float, mc: ManifoldConstants) -> float:
    """``N^(1/2) K^((m+1)/2)`` times the square root of :func:`nonconc_const`."""
    _check_manifold(eps, eta, mc)
    return math.sqrt(mc.N) * mc.K ** ((m + 1) / 2) * math.sqrt(nonconc_const(m, eps, eta))


def manifold_trace(m: int, eps: float, eta: float, mc: ManifoldConstants) -> float:
    """``N^(1/2) K^((m+2)/4)`` times the square root of :func:`trace_const_full`."""
    _check_manifold(eps, eta, mc)
    return math.sqrt(mc.N) * mc.K ** ((m + 2) / 4) * math.sqrt(trace_const_full(m, eps, eta))


# ------------------------------------------------------ sphere DtN spectrum


def dtn_sphere_eigenvalue(m: int, k: int) -> float:
    """``sqrt(k(k+m-2) + nu^2) - nu``: eigenvalue of mode ``k`` of the exterior DtN map on the unit sphere."""
    nu = _check_dim(m)
    if int(k) != k or k < 0:
        raise DomainError(f"mode index must be an integer >= 0, got {k!r}")
    k = int(k)
    lap = k * (k + m - 2)
    # rationalised form avoids cancellation for large k
    return lap / (math.sqrt(lap + nu * nu) + nu) if lap else 0.0


def verify_muf(m: int, k_max: int, *, tol: float = 1e-12) -> MufReport:
    """Check ``k(k+m-2) <= (m-1) lambda_k^2`` for ``k <= k_max``; return the per-mode slack."""
    _check_dim(m)
    slack = []
    for k in range(int(k_max) + 1):
        lap = k * (k + m - 2)
        lam = dtn_sphere_eigenvalue(m, k)
        s = (m - 1) * lam * lam - lap
        if s < -tol * max(1.0, lap):
            raise AssertionError(f"mode k={k} violates the bound in dimension m={m}: slack {s}")
        slack.append(s)
    equality = all(abs(s) <= tol * max(1.0, k * (k + m - 2)) for k, s in enumerate(slack))
    if m == 2 and not equality:
        raise AssertionError("dimension 2 must give equality for every mode")
    return MufReport(m=int(m), k_max=int(k_max), slack=tuple(slack), equality=equality)


# ------------------------------------------------------------ ODE oracle


def _regular_start(m, mu, s0):
    """Log-derivative ``s g'/g`` of the regular solution at ``s0`` from its power series."""
    nu = (m - 2) / 2.0
    root = math.sqrt(nu * nu + mu)
    p = root - nu
    a = 1.0
    num = p
    den = 1.0
    q = s0 * s0
    for k in range(1, 200):
        a *= q / (4.0 * k * (k + root))
        num += (p + 2 * k) * a
        den += a
        if a < 1e-18 * den:
            break
    return num / den


def ode_oracle(
    m: int,
    mu: float,
    r: float,
    eta: float | None = None,
    bc: Literal["annulus", "ball"] = "annulus",
    *,
    rtol: float = 1e-10,
) -> tuple[float, float]:
    """Solve ``-s^(1-m) (s^(m-1) f')' + (mu/s^2 + 1) f = 0`` radially and return ``(f(r), f'(r))``.

    ``bc="annulus"``: ``f(r) = 1`` and ``f'(eta) = 0`` on ``[r, eta]``; the slope is negative.
    ``bc="ball"``: the solution regular at the origin, normalised by ``f(r) = 1``; the slope is positive.

    The equation is integrated as a Riccati equation for ``v = s f'/f`` in the
    variable ``t = log s``, ``dv/dt = mu + s^2 - (m-2) v - v^2``.
    """
    _check_dim(m)
    mu = float(mu)
    if not mu >= 0:
        raise DomainError(f"mu must be >= 0, got {mu!r}")

    def rhs(t, v):
        return [mu + math.exp(2.0 * t) - (m - 2) * v[0] - v[0] * v[0]]

    if bc == "annulus":
        if eta is None:
            raise DomainError("annulus boundary condition needs eta")
        r, eta = _check_pair(r, eta)
        t0, t1, v0 = math.log(eta), math.log(r), 0.0
    elif bc == "ball":
        r = float(r)
        if not r > 0:
            raise DomainError(f"radius must be > 0, got {r!r}")
        s0 = r / 100.0
        t0, t1, v0 = math.log(s0), math.log(r), _regular_start(m, mu, s0)
    else:
        raise DomainError(f"unknown boundary condition {bc!r}")

    sol = integrate.solve_ivp(rhs, (t0, t1), [v0], method="DOP853", rtol=rtol,
                                    atol=rtol * 1e-3 * min(1.0, r * r))
    if not sol.success:
        raise NumericalError(f"radial shooting failed: {sol.message}")
    v_end = float(sol.y[0, -1])
    if not math.isfinite(v_end):
        raise NumericalError("radial shooting diverged")
    return 1.0, v_end / r


def oracle_trace_constants(m: int, r: float, eta: float, *, rtol: float = 1e-10) -> tuple[float, float, float]:
    """``(annulus, ball, full)`` squared trace constants from the radial ODE alone."""
    _, slope_out = ode_oracle(m, 0.0, r, eta, "annulus", rtol=rtol)
    _, slope_in = ode_oracle(m, 0.0, r, None, "ball", rtol=rtol)
    annulus, ball = -1.0 / slope_out, 1.0 / slope_in
    return annulus, ball, 1.0 / (1.0 / annulus + 1.0 / ball)
