import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, strategies as st

from thinhandles import ValidationError
from thinhandles.constants import ManifoldConstants
from thinhandles.handles import HandleGeometry, delta_bundle
from thinhandles.regimes import (
    FIGURES,
    InapplicableError,
    ParamPoint,
    Scale,
    Theorem,
    alpha_m,
    alpha_star,
    classify,
    classify_adhering,
    classify_adhering_two_copies,
    classify_fading1,
    classify_fading2,
    error_estimate,
    rasterize,
    region_polygon,
    region_vertices,
)
from thinhandles.spectra import fit_loglog_slope

alphas = st.fractions(0, F(199, 200), max_denominator=400)
lams = st.fractions(F(1, 400), 5, max_denominator=400)


def P(m, a, lam, **kw):
    return ParamPoint(m, a, lam, **kw)


def test_alpha_m_and_star():
    assert alpha_m(3) == F(1, 3)
    assert alpha_m(7) == F(1, 2)
    assert alpha_m(2) == F(1, 2)
    assert alpha_m(4) == F(49, 100)
    assert alpha_m(4, F(49, 100)) == F(49, 100)
    assert alpha_m(4, "0.3") == F(3, 10)
    assert alpha_star(3) == F(1, 15)
    assert alpha_star(5) == F(1, 6) and alpha_star(9) == F(1, 6)
    assert alpha_star(4, F(49, 100)) == F(49, 100) ** 2 / F(151, 100)
    with pytest.raises(ValidationError):
        alpha_m(4, F(1, 2))


def test_param_point_validation():
    p = P(3, "4/5", 1)
    assert p.alpha == F(4, 5) and isinstance(p.lam, F)
    for bad in [dict(m=1), dict(alpha=1), dict(alpha=-0.1), dict(lam=0), dict(alpha="x")]:
        args = dict(m=3, alpha=0, lam=1) | bad
        with pytest.raises(ValidationError) as info:
            ParamPoint(args["m"], args["alpha"], args["lam"])
        assert info.value.field in ("m", "alpha", "lambda")
    with pytest.raises(ValidationError):
        P(3, 0, 1, scale="log")
    assert P(2, F(1, 4), 1, scale="log").scale is Scale.LOG


def test_fading1_examples():
    v = classify_fading1(P(3, 0, 2))
    assert v.applicable and v.exponent == F(1, 8)
    assert not classify_fading1(P(3, F(1, 3), 1)).applicable
    assert classify_fading1(P(5, F(3, 10), 1)).exponent == F(1, 10)


def test_fading1_both_conventions_reported():
    v = classify_fading1(P(3, 0, 2))
    assert v.notes["exponent_corollary"] == F(1, 8)
    assert v.notes["exponent_proof"] == F(1, 6)
    assert classify_fading1(P(3, 0, 2), convention="proof").exponent == F(1, 6)
    with pytest.raises(ValidationError):
        classify_fading1(P(3, 0, 2), convention="other")


def test_fading1_dimension_two():
    v = classify_fading1(P(2, F(1, 4), 1, scale="log"))
    assert v.applicable
    assert v.notes["rate"]["kind"] == "log"
    assert v.notes["rate"]["log_eps_power"] == -F(3, 8)
    assert not classify_fading1(P(2, F(1, 2), 1, scale="log")).applicable
    assert classify_fading1(P(2, 0, 1)).applicable
    assert not classify_fading1(P(2, F(1, 10), 1)).applicable


def test_fading1_dimension_four_flags_free_parameter():
    v = classify_fading1(P(4, F(1, 10), 1, alpha4=F(2, 5)))
    assert v.notes["alpha4_free_parameter"] == F(2, 5)
    assert classify(P(4, F(1, 10), 1)).notes["alpha4_free_parameter"] == F(49, 100)


def test_fading2_examples():
    v = classify_fading2(P(3, 0, F(1, 2)))
    assert v.applicable and v.exponent == F(1, 4)
    assert not classify_fading2(P(3, 0, 1)).applicable
    v = classify_fading2(P(4, F(3, 5), F(1, 2)))
    assert v.applicable and v.exponent == F(1, 20)


def test_adhering_examples():
    assert classify_adhering(P(3, F(4, 5), 1)).applicable
    assert not classify_adhering(P(3, F(3, 10), 1)).applicable
    assert classify_adhering_two_copies(P(3, F(2, 5), 1)).applicable
    assert classify_adhering_two_copies(P(2, F(1, 10), F(9, 10))).applicable
    assert not classify_adhering(P(3, F(2, 5), 1)).applicable
    assert "Kirchhoff" in classify_adhering(P(3, F(4, 5), 1)).notes["limit"]


def test_strict_boundaries_exact():
    # lambda = m alpha - (m-1) is excluded; one step above is included
    m, a = 3, F(9, 10)
    line = m * a - (m - 1)
    assert not classify_adhering_two_copies(P(m, a, line)).applicable
    assert classify_adhering_two_copies(P(m, a, line + F(1, 10**9))).applicable
    # upper line lambda < (m+1) - m alpha
    up = (m + 1) - m * F(1, 2)
    assert not classify_adhering(P(m, F(1, 2), up)).applicable
    assert classify_adhering(P(m, F(1, 2), up - F(1, 10**9))).applicable
    # alpha >= (m-2)/(m-1) at lambda >= 1 is non-strict
    assert classify_adhering(P(m, F(1, 2), F(3, 2))).applicable


@given(m=st.integers(2, 6), a=alphas, lam=lams)
def test_nesting_general_inside_two_copies(m, a, lam):
    p = P(m, a, lam)
    if classify_adhering(p).applicable:
        assert classify_adhering_two_copies(p).applicable


@pytest.mark.parametrize("m", range(2, 7))
def test_nesting_on_rational_grid(m):
    for i in range(0, 60):
        for j in range(1, 200):
            p = P(m, F(i, 60), F(j, 50))
            if classify_adhering(p).applicable:
                assert classify_adhering_two_copies(p).applicable


@given(m=st.integers(2, 6), a=alphas, lam=lams)
def test_classify_report_invariants(m, a, lam):
    rep = classify(P(m, a, lam))
    assert rep.uncovered == (not rep.applicable)
    if rep.applicable:
        assert rep.best[1] == max(rep.exponent_per_theorem.values())
        assert rep.best[0] in rep.applicable
    for t in rep.applicable:
        assert isinstance(rep.exponent_per_theorem[t], (F, int))


def test_classify_uncovered_and_coupled_segment():
    rep = classify(P(5, F(55, 100), 1))
    assert rep.uncovered and rep.best is None
    assert not classify(P(3, F(1, 3), 2)).uncovered  # closed edge of the two-copies region
    seg = classify(P(3, F(1, 2), F(1, 2)))  # on lambda = (m-1) - m alpha
    assert seg.uncovered
    assert "coupled" in seg.notes["annotation"]


def test_classify_tie_break_prefers_fewer_hypotheses():
    found = False
    for i in range(1, 100):
        for j in range(1, 300):
            rep = classify(P(3, F(i, 100), F(j, 100)))
            if "tied" in rep.notes:
                found = True
                order = [Theorem.ADHERING_TWO_COPIES, Theorem.ADHERING_GENERAL,
                         Theorem.FADING_II, Theorem.FADING_I]
                tied = [t for t in order if t.value in rep.notes["tied"]]
                assert rep.best[0] is tied[0]
    assert found


def test_region_vertices_examples():
    fading = region_vertices(3, "fading")
    assert fading["H"] == (F(1, 15), F(1, 5))
    assert region_vertices(5, "fading")["E"] == (F(3, 5), F(1))
    assert region_vertices(4, "adhering")["Ẽ"] == (F(2, 3), F(1))
    adh = region_vertices(3, "adhering")
    assert adh["B"] == (1, 1)
    assert adh["C̃"] == (F(4, 5), F(2, 5))
    assert adh["Ẽ"] == (F(1, 2), F(1))
    assert adh["F̃"] == (F(1, 2), F(5, 2))
    assert math.isinf(adh["A"][1])
    for fig in FIGURES:
        assert region_vertices(3, fig)
    with pytest.raises(Exception):
        region_vertices(3, "nonsense")


@pytest.mark.parametrize("m", range(2, 7))
def test_corner_points_lie_on_boundary_lines(m):
    v = region_vertices(m, "adhering")
    a, lam = v["C̃"]
    assert lam == m * a - (m - 1) and lam == (m - 1) * (1 - a)
    a, lam = v["F̃"]
    assert lam == (m + 1) - m * a and a == F(m - 2, m - 1)


@pytest.mark.parametrize("m", range(2, 7))
@pytest.mark.parametrize("region", ["adhering", "two_copies", "fading2"])
def test_raster_matches_polygon_coarse(m, region):
    out = rasterize(m, region, resolution=40)
    assert out["mismatches"] == []
    assert out["inside"] > 0 or (region == "fading2" and m == 2)


def test_polygon_closure_flags():
    poly = region_polygon(3, "adhering")
    assert poly.labels == ("B", "F̃", "Ẽ", "C̃")
    assert poly.closed_edges == (False, True, False, False)
    assert poly.contains(F(1, 2), F(2))          # on the closed edge
    assert not poly.contains(F(4, 5), F(2, 5))   # corner
    assert poly.contains(F(4, 5), F(1))


def geom(m, eps, alpha, lam, **kw):
    return HandleGeometry(m, eps, eps**lam, eps**alpha, ManifoldConstants(**kw))


def test_error_estimate_fading2_handle_dominant():
    g = geom(3, 1e-6, 0.0, 0.1)
    est = error_estimate("FadingII", g)
    b = delta_bundle(g)
    assert est.dominant == "handle"
    assert est.total == pytest.approx(2 * b.delta_handle, rel=1e-14)


def test_error_estimate_ellreg_from_curvature():
    g = geom(3, 1e-6, 0.0, 0.1, kappa0=-1)
    assert error_estimate("FadingII", g).total == pytest.approx(3 * delta_bundle(g).delta_handle)


def test_error_estimate_adhering_default_width():
    g = geom(3, 1e-6, 0.8, 1.0)
    est = error_estimate("AdheringGeneral", g)
    b = delta_bundle(g)
    te = g.eta / 3
    tube = math.sqrt(2) * math.sqrt(2 * b.delta_antisym**2 / te + te)
    assert est.inputs["tilde_eps"] == pytest.approx(te)
    assert est.terms["tube_perp_ext"] == pytest.approx(
        2 * (tube + b.delta_harm_perp + b.delta_ball), rel=1e-12)
    assert est.total == max(est.terms.values())
    two = error_estimate("AdheringTwoCopies", g)
    assert two.terms["tube_perp_ext"] < est.terms["tube_perp_ext"]


def test_error_estimate_fading1_terms():
    g = geom(3, 1e-6, 0.0, 1.0)
    est = error_estimate("FadingI", g)
    assert est.total == pytest.approx(sum(est.terms.values()))
    assert est.inputs["gamma"] == pytest.approx(1 / (4 * (1 - 1 / 3)))
    proof = error_estimate("FadingI", g, convention="proof")
    assert proof.inputs["gamma"] == pytest.approx(1 / (2 * (1 - 1 / 3)))
    assert proof.terms["omega_power"] < est.terms["omega_power"]


@pytest.mark.parametrize("theorem,alpha,lam", [
    ("FadingII", 0.0, 0.5), ("AdheringGeneral", 0.8, 1.0),
    ("AdheringTwoCopies", 0.8, 1.0), ("FadingI", 0.0, 1.0)])
def test_error_estimate_vanishes(theorem, alpha, lam):
    totals = [error_estimate(theorem, geom(3, e, alpha, lam)).total for e in (1e-4, 1e-7, 1e-10)]
    assert totals[2] < totals[1] < totals[0]


def test_error_estimate_inapplicable():
    with pytest.raises(InapplicableError):
        error_estimate("FadingII", geom(3, 1e-6, 0.0, 1.0))
    with pytest.raises(InapplicableError):
        error_estimate("AdheringGeneral", geom(3, 1e-6, 0.3, 1.0))
    # check=False evaluates the formula regardless
    assert error_estimate("FadingII", geom(3, 1e-6, 0.0, 1.0), check=False).total > 0


@pytest.mark.parametrize("m,alpha,lam", [
    (3, F(0), F(1, 2)), (4, F(3, 5), F(1, 2)), (3, F(1, 5), F(1, 3)), (5, F(1, 2), F(1, 4)), (2, F(0), F(1, 2))])
def test_fading2_rate_matches_error_slope(m, alpha, lam):
    eps = np.geomspace(1e-6, 1e-8, 5)
    totals = [error_estimate("FadingII", geom(m, e, float(alpha), float(lam))).total for e in eps]
    slope, _ = fit_loglog_slope(eps, totals)
    assert abs(slope - float(classify_fading2(P(m, alpha, lam)).exponent)) <= 0.05
