"""Parameter regimes: which convergence result applies at ``(m, alpha, lambda)``.

The cover distance scales as ``eta = eps^alpha r0`` (or ``|log eps|^-alpha r0``
on the logarithmic scale in dimension 2) and the handle length as
``ell = eps^lambda``. All conditions are evaluated with Python's
arithmetic on whatever number type is supplied, so :class:`fractions.Fraction`
inputs give exact answers on boundary lines.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational

from . import constants
from ._errors import DomainError, ValidationError
from .handles import DeltaBundle, HandleGeometry, delta_bundle, delta_orders

DEFAULT_ALPHA4 = Fraction(49, 100)

__all__ = [
    "Theorem",
    "Scale",
    "ParamPoint",
    "Verdict",
    "RegimeReport",
    "Polygon",
    "InapplicableError",
    "DEFAULT_ALPHA4",
    "alpha_m",
    "alpha_star",
    "classify_fading1",
    "classify_fading2",
    "classify_adhering",
    "classify_adhering_two_copies",
    "classify",
    "region_vertices",
    "region_polygon",
    "rasterize",
    "error_estimate",
    "ErrorEstimate",
]


class Theorem(str, enum.Enum):
    FADING_I = "FadingI"
    FADING_II = "FadingII"
    ADHERING_GENERAL = "AdheringGeneral"
    ADHERING_TWO_COPIES = "AdheringTwoCopies"


# fewer geometric hypotheses first; used to break ties between equal exponents
_TIE_ORDER = (
    Theorem.ADHERING_TWO_COPIES,
    Theorem.ADHERING_GENERAL,
    Theorem.FADING_II,
    Theorem.FADING_I,
)


class Scale(str, enum.Enum):
    POWER = "power"
    LOG = "log"


class InapplicableError(DomainError):
    """The requested result does not cover the given parameters."""


def _number(x, name):
    if isinstance(x, Rational):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValidationError(name, f"not a number: {x!r}") from exc
    x = float(x)
    if not math.isfinite(x):
        raise ValidationError(name, "must be finite")
    return x


def _check_m(m):
    if isinstance(m, bool) or int(m) != m or m < 2:
        raise ValidationError("m", f"dimension must be an integer >= 2, got {m!r}")
    return int(m)


@dataclass(frozen=True)
class ParamPoint:
    m: int
    alpha: object
    lam: object
    scale: Scale = Scale.POWER
    alpha4: object = DEFAULT_ALPHA4

    def __post_init__(self):
        object.__setattr__(self, "m", _check_m(self.m))
        a = _number(self.alpha, "alpha")
        lam = _number(self.lam, "lambda")
        if not 0 <= a < 1:
            raise ValidationError("alpha", f"must lie in [0, 1), got {a}")
        if not lam > 0:
            raise ValidationError("lambda", f"must be > 0, got {lam}")
        scale = Scale(self.scale)
        if scale is Scale.LOG and self.m != 2:
            raise ValidationError("scale", "the logarithmic scale exists only for m = 2")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "alpha4", _alpha4(self.alpha4))


def _alpha4(choice):
    c = DEFAULT_ALPHA4 if choice is None else _number(choice, "alpha4")
    if not 0 < c < Fraction(1, 2):
        raise ValidationError("alpha4", f"must lie in (0, 1/2), got {c}")
    return c


def alpha_m(m: int, alpha4_choice=None):
    """Threshold for the first fading result; in dimension 4 it is a free choice in ``(0, 1/2)``."""
    m = _check_m(m)
    if m == 3:
        return Fraction(1, 3)
    if m == 4:
        return _alpha4(alpha4_choice)
    return Fraction(1, 2)


def alpha_star(m: int, alpha4_choice=None):
    a = alpha_m(m, alpha4_choice)
    return a * a / (2 - a)


# ---------------------------------------------------------------- verdicts


@dataclass(frozen=True)
class Verdict:
    theorem: Theorem
    applicable: bool
    exponent: object = None
    conditions: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)


def _fading1_exponent(m, a, lam, am, convention):
    denom = 4 if convention == "corollary" else 2
    return min(lam, (am - a) / (denom * (1 - am)), (am + a) / 2)


def classify_fading1(p: ParamPoint, *, convention: str = "corollary") -> Verdict:
    """First fading result. ``convention`` picks the denominator ``4(1-alpha_m)`` ("corollary") or ``2(1-alpha_m)`` ("proof")."""
    if convention not in ("corollary", "proof"):
        raise ValidationError("convention", f"expected 'corollary' or 'proof', got {convention!r}")
    am = alpha_m(p.m, p.alpha4)
    notes = {"alpha_m": am}
    if p.m == 4:
        notes["alpha4_free_parameter"] = am
    if p.m == 2:
        # alpha = 0 gives eta = r0 on both scales; any alpha > 0 on the power scale breaks zeta/eta -> 0
        in_range = p.alpha < am if p.scale is Scale.LOG else p.alpha == 0
        conditions = {"alpha_in_range": in_range, "log_scale": p.scale is Scale.LOG}
        rate = {
            "kind": "log",
            "log_eps_power": -(Fraction(1, 2) + p.alpha) / 2,
            "loglog_eps_power": Fraction(1, 2),
        }
        notes["rate"] = rate
        return Verdict(Theorem.FADING_I, in_range, 0 if in_range else None, conditions, notes)
    conditions = {"alpha_below_alpha_m": p.alpha < am}
    ok = conditions["alpha_below_alpha_m"]
    exp_c = _fading1_exponent(p.m, p.alpha, p.lam, am, "corollary")
    exp_p = _fading1_exponent(p.m, p.alpha, p.lam, am, "proof")
    notes["exponent_corollary"] = exp_c
    notes["exponent_proof"] = exp_p
    notes["convention"] = convention
    chosen = exp_c if convention == "corollary" else exp_p
    return Verdict(Theorem.FADING_I, ok, chosen if ok else None, conditions, notes)


def classify_fading2(p: ParamPoint) -> Verdict:
    m, a, lam = p.m, p.alpha, p.lam
    low = Fraction(m - 2, m)
    conditions = {
        "power_scale": p.scale is Scale.POWER,
        "lambda_positive": lam > 0,
        "branch_small_alpha": 0 <= a <= low and lam < 1,
        "branch_large_alpha": low <= a < 1 and lam < (m - 1) - m * a,
    }
    ok = (conditions["power_scale"] and conditions["lambda_positive"]
          and (conditions["branch_small_alpha"] or conditions["branch_large_alpha"]))
    exponent = min(lam, ((m - 1) - m * a - lam) / 2, (1 - lam) / 2) if ok else None
    return Verdict(Theorem.FADING_II, ok, exponent, conditions)


def _adhering_conditions(m, a, lam, two_copies):
    if two_copies:
        threshold, short_line = Fraction(m - 2, m), (m - 1) - m * a
    else:
        threshold, short_line = Fraction(m - 2, m - 1), (m - 1) * (1 - a)
    return {
        "alpha_range": 0 <= a < 1,
        "lambda_positive": lam > 0,
        "above_lower_line": lam > m * a - (m - 1),
        "long_branch": (not lam >= 1) or a >= threshold,
        "short_branch": (not lam <= 1) or lam > short_line,
        "below_upper_line": lam < (m + 1) - m * a,
    }


def _adhering_rate(p, two_copies):
    o = delta_orders(p.m, p.alpha, p.lam)
    terms = [o.delta_ball, o.delta_antisym, o.delta_handle, o.delta_harm_perp]
    if not two_copies:
        # tubular width proportional to eta: the antisym/sqrt(width) and sqrt(width) terms
        terms += [o.delta_harm, o.delta_antisym - p.alpha / 2, p.alpha / 2]
    return min(terms)


_LIMIT = "identified operator: continuity across the glued parts, weighted Kirchhoff flux balance"


def classify_adhering(p: ParamPoint) -> Verdict:
    """General adhering result; the limit identifies the two glued regions."""
    m = p.m
    ok_scale = p.scale is Scale.POWER
    conds = _adhering_conditions(m, p.alpha, p.lam, False)
    conds["power_scale"] = ok_scale
    ok = all(conds.values())
    exponent = _adhering_rate(p, False) if ok else None
    return Verdict(Theorem.ADHERING_GENERAL, ok, exponent, conds, {"limit": _LIMIT})


def classify_adhering_two_copies(p: ParamPoint) -> Verdict:
    """Adhering result when the manifold is two isometric copies."""
    m = p.m
    conds = _adhering_conditions(m, p.alpha, p.lam, True)
    conds["power_scale"] = p.scale is Scale.POWER
    ok = all(conds.values())
    exponent = _adhering_rate(p, True) if ok else None
    return Verdict(Theorem.ADHERING_TWO_COPIES, ok, exponent, conds, {"limit": _LIMIT})


@dataclass(frozen=True)
class RegimeReport:
    point: ParamPoint
    applicable: frozenset
    exponent_per_theorem: dict
    best: tuple | None
    uncovered: bool
    verdicts: dict
    notes: dict = field(default_factory=dict)


def _on_coupled_segment(p):
    # boundary C-E-F where the limit couples the two parts; not covered here
    m, a, lam = p.m, p.alpha, p.lam
    low = Fraction(m - 2, m)
    if a == low and lam >= 1:
        return True
    return low <= a <= Fraction(m - 1, m) and lam <= 1 and lam == (m - 1) - m * a


def classify(p: ParamPoint, *, convention: str = "corollary") -> RegimeReport:
    """Run every classifier and pick the fastest applicable rate."""
    verdicts = {
        Theorem.FADING_I: classify_fading1(p, convention=convention),
        Theorem.FADING_II: classify_fading2(p),
        Theorem.ADHERING_GENERAL: classify_adhering(p),
        Theorem.ADHERING_TWO_COPIES: classify_adhering_two_copies(p),
    }
    applicable = frozenset(t for t, v in verdicts.items() if v.applicable)
    exps = {t: verdicts[t].exponent for t in applicable}
    best = None
    if applicable:
        top = max(exps.values())
        tied = [t for t in _TIE_ORDER if t in applicable and exps[t] == top]
        best = (tied[0], top)
    notes = {"alpha_m": alpha_m(p.m, p.alpha4)}
    if p.m == 4:
        notes["alpha4_free_parameter"] = p.alpha4
    if best is not None and len([t for t in applicable if exps[t] == best[1]]) > 1:
        notes["tied"] = sorted(t.value for t in applicable if exps[t] == best[1])
    if not applicable and _on_coupled_segment(p):
        notes["annotation"] = "boundary segment with coupled limit operator; outside this toolkit"
    return RegimeReport(p, applicable, exps, best, not applicable, verdicts, notes)


# ---------------------------------------------------------------- figures

FIGURES = ("fading", "adhering", "delta_perp")


def region_vertices(m: int, figure: str, alpha4_choice=None) -> dict:
    """Named exact ``(alpha, lambda)`` points of a parameter-plane figure.

    ``figure`` is "fading" (comparison of the two fading results),
    "adhering" (adhering regions and the classical comparison points) or
    "delta_perp" (region where the orthogonal harmonic constant vanishes).
    Unbounded points carry ``math.inf`` as lambda.
    """
    m = _check_m(m)
    F = Fraction
    am = alpha_m(m, alpha4_choice)
    ast = alpha_star(m, alpha4_choice)
    lo, mid = F(m - 2, m), F(m - 1, m)
    if figure == "fading":
        return {
            "C": (mid, F(0)),
            "C'": (am, F(0)),
            "Ĉ": (lo, F(1, 3)),
            "D": (F(0), F(0)),
            "D'": (F(0), F(1)),
            "D-": (F(0), am / 2),
            "D̂": (F(0), F(1, 3)),
            "D+": (F(0), 1 - am / 2),
            "E": (lo, F(1)),
            "E'": (am, F(1)),
            "H": (ast, am / (2 - am)),
            "H+": (ast, (2 - 3 * am) / (2 - am)),
        }
    if figure == "adhering":
        return {
            "A": (F(1), math.inf),
            "B": (F(1), F(1)),
            "C": (mid, F(0)),
            "C̃": (F(2 * (m - 1), 2 * m - 1), F(m - 1, 2 * m - 1)),
            "D": (F(0), F(0)),
            "E": (lo, F(1)),
            "Ẽ": (F(m - 2, m - 1), F(1)),
            "F": (lo, math.inf),
            "F'": (lo, F(3)),
            "F̃": (F(m - 2, m - 1), F(2 * m - 1, m - 1)),
        }
    if figure == "delta_perp":
        return {
            "B": (F(1), F(1)),
            "C": (mid, F(0)),
            "D": (F(0), F(0)),
            "F'": (lo, F(3)),
            "G'": (F(0), F(3)),
        }
    raise DomainError(f"unknown figure {figure!r}; expected one of {FIGURES}")


@dataclass(frozen=True)
class Polygon:
    """Convex polygon with per-edge and per-vertex closure flags.

    Edge ``i`` joins ``vertices[i]`` and ``vertices[i+1]`` (cyclically).
    """

    name: str
    vertices: tuple
    closed_edges: tuple
    closed_vertices: tuple
    labels: tuple = ()

    def contains(self, a, lam) -> bool:
        vs = self.vertices
        n = len(vs)
        sign = None
        on_edge = None
        for i in range(n):
            (x0, y0), (x1, y1) = vs[i], vs[(i + 1) % n]
            cross = (x1 - x0) * (lam - y0) - (y1 - y0) * (a - x0)
            if cross == 0:
                if min(x0, x1) <= a <= max(x0, x1) and min(y0, y1) <= lam <= max(y0, y1):
                    on_edge = i
                    break
                return False
            s = cross > 0
            if sign is None:
                sign = s
            elif s != sign:
                return False
        if on_edge is None:
            return True
        for j, v in enumerate(vs):
            if (a, lam) == v:
                return self.closed_vertices[j]
        return self.closed_edges[on_edge]


def region_polygon(m: int, region: str) -> Polygon:
    """Applicability region of an adhering or second fading result as a :class:`Polygon`.

    ``region`` is "adhering" (B-F̃-Ẽ-C̃), "two_copies" (C-B-F'-E) or
    "fading2" (D-D'-E-C).
    """
    pts = region_vertices(m, "adhering")
    if region == "adhering":
        labels = ("B", "F̃", "Ẽ", "C̃")
        closed = (False, True, False, False)
    elif region == "two_copies":
        labels = ("C", "B", "F'", "E")
        closed = (False, False, True, False)
    elif region == "fading2":
        labels = ("D", "D'", "E", "C")
        pts = dict(pts, **{"D'": (Fraction(0), Fraction(1))})
        closed = (True, False, False, False)
    else:
        raise DomainError(f"unknown region {region!r}")
    vertices = [pts[k] for k in labels]
    # drop repeated corners (dimension 2 collapses D' onto E)
    keep = [i for i in range(len(vertices)) if vertices[i] != vertices[i - 1]]
    vertices = tuple(vertices[i] for i in keep)
    labels = tuple(labels[i] for i in keep)
    edge_flags = tuple(closed[i] for i in keep)
    vflags = []
    for i in range(len(vertices)):
        # a corner counts only when both incident edges are closed
        vflags.append(edge_flags[i] and edge_flags[i - 1])
    if region == "fading2":
        vflags[0] = False
        if m == 2:
            vflags = [False] * len(vertices)
    return Polygon(region, vertices, edge_flags, tuple(vflags), labels)


def rasterize(m: int, region: str, *, resolution: int = 200, lam_max=4) -> dict:
    """Compare a classifier with its polygon on the grid ``alpha = i/res``, ``lambda = j/res``.

    Returns the cell count and the list of mismatching ``(alpha, lambda)`` points.
    """
    classifier = {
        "adhering": classify_adhering,
        "two_copies": classify_adhering_two_copies,
        "fading2": classify_fading2,
    }[region]
    poly = region_polygon(m, region)
    mismatches = []
    cells = 0
    inside = 0
    for i in range(resolution):
        a = Fraction(i, resolution)
        for j in range(1, int(lam_max * resolution) + 1):
            lam = Fraction(j, resolution)
            cells += 1
            got = classifier(ParamPoint(m, a, lam)).applicable
            want = poly.contains(a, lam)
            inside += want
            if got != want:
                mismatches.append((a, lam))
    return {"cells": cells, "inside": inside, "mismatches": mismatches}


# ---------------------------------------------------------------- error totals


@dataclass(frozen=True)
class ErrorEstimate:
    theorem: Theorem
    total: float
    terms: dict
    dominant: str
    inputs: dict = field(default_factory=dict)


def _implied_point(theorem, geom, alpha4):
    le = math.log(geom.eps)
    lam = math.log(geom.ell) / le
    if theorem is Theorem.FADING_I and geom.m == 2:
        alpha = -math.log(geom.eta / geom.mc.r0) / math.log(-le)
        scale = Scale.LOG
    else:
        alpha = math.log(geom.eta / geom.mc.r0) / le
        scale = Scale.POWER
    alpha = max(0.0, round(alpha, 12))
    return ParamPoint(geom.m, alpha, round(lam, 12), scale, alpha4)


def _finish(theorem, terms, inputs):
    dominant = max(terms, key=terms.get)
    return ErrorEstimate(theorem, float(terms[dominant]), terms, dominant, inputs)


def error_estimate(theorem, geom: HandleGeometry, *, tilde_eps=None, alpha4_choice=None,
                   convention: str = "corollary", bundle: DeltaBundle | None = None,
                   check: bool = True) -> ErrorEstimate:
    """Evaluate the explicit total error of one result for a concrete geometry.

    The ``total`` is the largest entry of ``terms`` (the sums for the first
    fading result are recorded term by term, total is their sum).
    ``tilde_eps`` is the tubular width for the general adhering result and
    defaults to ``eta/3``. With ``check`` the implied ``(alpha, lambda)``
    must lie in the result's applicability region.
    """
    theorem = Theorem(theorem)
    if check:
        p = _implied_point(theorem, geom, alpha4_choice)
        verdict = {
            Theorem.FADING_I: lambda q: classify_fading1(q, convention=convention),
            Theorem.FADING_II: classify_fading2,
            Theorem.ADHERING_GENERAL: classify_adhering,
            Theorem.ADHERING_TWO_COPIES: classify_adhering_two_copies,
        }[theorem](p)
        if not verdict.applicable:
            raise InapplicableError(
                f"{theorem.value} does not apply at implied alpha={p.alpha}, lambda={p.lam}"
            )
    mc = geom.mc
    m, eps, eta, ell = geom.m, geom.eps, geom.eta, geom.ell
    inputs = {"m": m, "eps": eps, "eta": eta, "ell": ell}

    if theorem is Theorem.FADING_I:
        am = float(alpha_m(m, alpha4_choice))
        zeta = eps**am if m >= 3 else abs(math.log(eps)) ** (-am)
        omega = zeta / eta
        gamma = 1.0 / ((4.0 if convention == "corollary" else 2.0) * (1.0 - am))
        inner = math.sqrt(omega) * eta
        terms = {
            "length": ell,
            "omega_power": omega**gamma,
            "cutoff": inner * math.sqrt(constants.log2_bracket(1.0 / inner, m)) if inner < 1 else inner,
        }
        inputs |= {"omega": omega, "zeta": zeta, "gamma": gamma, "convention": convention}
        est = _finish(theorem, terms, inputs)
        return ErrorEstimate(theorem, math.fsum(terms.values()), terms, est.dominant, inputs)

    b = bundle if bundle is not None else delta_bundle(geom)
    c_m = b.delta_ball
    if theorem is Theorem.FADING_II:
        terms = {
            "handle": mc.C_ellreg * b.delta_handle,
            "harm_prime_plus_ext": mc.C_ellreg * (b.delta_harm_prime + mc.C_ext * c_m),
        }
        return _finish(theorem, terms, inputs)

    if theorem is Theorem.ADHERING_GENERAL:
        te = eta / 3.0 if tilde_eps is None else float(tilde_eps)
        if not te > 0:
            raise ValidationError("tilde_eps", "must be > 0")
        inputs["tilde_eps"] = te
        tube = math.sqrt(2.0) * mc.C_nbhd * math.sqrt(2.0 * b.delta_antisym**2 / te + te)
    else:
        tube = math.sqrt(2.0) * mc.C_nbhd * b.delta_antisym
    terms = {
        "ball": c_m,
        "antisym_plus_handle": b.delta_antisym + b.delta_handle,
        "harm": b.delta_harm,
        "antisym_plus_ext": b.delta_antisym + mc.C_ext * c_m,
        "tube_perp_ext": mc.C_ellreg * (tube + b.delta_harm_perp + mc.C_ext * c_m),
    }
    return _finish(theorem, terms, inputs)
