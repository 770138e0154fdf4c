import math

import numpy as np
from numpy import euler_gamma as EULER_GAMMA
import pytest
from hypothesis import assume, given, strategies as st

from thinhandles import DomainError, NumericalError
from thinhandles.bessel import bessel_i
from thinhandles.constants import (

    LOG2_MINUS_EULER,
    ManifoldConstants,
    dtn_sphere_eigenvalue,
    log2_bracket,
    manifold_nonconc,
    manifold_trace,
    nonconc_asymptotic,
    nonconc_const,
    nonconc_leading_correction,
    ode_oracle,
    oracle_trace_constants,
    trace_const_annulus,
    trace_const_asymptotic,
    trace_const_ball,
    trace_const_full,
    trace_const_full_ratio_form,
    trace_leading_correction,
    verify_muf,
)

dims = st.integers(min_value=2, max_value=8)


@st.composite
def pairs(draw, eta_max=0.9):
    eta = draw(st.floats(min_value=0.02, max_value=eta_max))
    r = draw(st.floats(min_value=1e-4, max_value=0.95)) * eta
    return r, eta


def test_log2_bracket():
    assert log2_bracket(10, 3) == 1
    assert log2_bracket(math.e, 2) == pytest.approx(1)
    assert log2_bracket(100, 2) == pytest.approx(4.60517, abs=1e-5)
    with pytest.raises(DomainError):
        log2_bracket(0, 2)


def test_log2_minus_euler_digits():
    assert 0.115 < LOG2_MINUS_EULER < 0.116
    assert LOG2_MINUS_EULER == pytest.approx(math.log(2) - EULER_GAMMA, rel=1e-15)


@pytest.mark.parametrize("m,r,eta", [(3, 0.1, 0.5), (2, 0.05, 0.4)])
def test_annulus_examples_against_ode(m, r, eta):
    _, slope = ode_oracle(m, 0.0, r, eta, "annulus")
    assert trace_const_annulus(m, r, eta) == pytest.approx(-1 / slope, rel=1e-8)


def test_annulus_blows_up_near_outer_radius():
    values = [trace_const_annulus(3, 0.5 * (1 - t), 0.5) for t in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert all(b > 5 * a for a, b in zip(values, values[1:]))
    assert values[-1] > 1e3


def test_annulus_thin_shell_reports_loss_of_digits():
    with pytest.raises(NumericalError):
        trace_const_annulus(3, 0.5 * (1 - 1e-15), 0.5)


def test_ball_examples():
    elementary = math.sinh(1) / (math.cosh(1) - math.sinh(1))
    assert trace_const_ball(3, 1.0) == pytest.approx(elementary, rel=1e-12)
    # quoted 3.1944 is 1.3e-4 below sinh(1) e = 3.194528
    assert trace_const_ball(3, 1.0) == pytest.approx(3.1944, abs=2e-4)
    _, slope = ode_oracle(3, 0.0, 1.0, None, "ball")
    assert slope == pytest.approx(1 / elementary, rel=1e-8)
    assert 0.01 * trace_const_ball(3, 0.01) == pytest.approx(3, rel=0.01)
    assert trace_const_ball(2, 0.5) == pytest.approx(bessel_i(0, 0.5) / bessel_i(1, 0.5), rel=1e-15)
    with pytest.raises(DomainError):
        trace_const_ball(3, 0.0)


@pytest.mark.parametrize("m", [2, 3, 4, 6])
def test_ball_small_radius_limit(m):
    assert 1e-4 * trace_const_ball(m, 1e-4) == pytest.approx(m, rel=1e-6)


@pytest.mark.parametrize("m,r,eta", [(3, 0.05, 0.3), (5, 0.02, 0.2)])
def test_full_examples(m, r, eta):
    full = trace_const_full(m, r, eta)
    assert full == pytest.approx(trace_const_full_ratio_form(m, r, eta), rel=1e-10)
    assert full == pytest.approx(oracle_trace_constants(m, r, eta)[2], rel=1e-8)


def test_frozen_values():
    # regression values produced by this implementation and confirmed by the radial ODE oracle
    assert trace_const_full(3, 0.05, 0.3) == pytest.approx(0.31292619452767, rel=1e-11)
    assert trace_const_annulus(3, 0.05, 0.3) == pytest.approx(0.31456652290813, rel=1e-11)
    assert trace_const_ball(3, 0.05) == pytest.approx(60.00999928568, rel=1e-11)


@given(m=dims, rp=pairs())
def test_full_below_both_parts_and_reciprocal_sum(m, rp):
    r, eta = rp
    a, b, f = trace_const_annulus(m, r, eta), trace_const_ball(m, r), trace_const_full(m, r, eta)
    assert 0 < f < min(a, b)
    assert 1 / f == pytest.approx(1 / a + 1 / b, rel=1e-12)


@given(m=dims, rp=pairs())
def test_ratio_form_agrees(m, rp):
    r, eta = rp
    assert trace_const_full(m, r, eta) == pytest.approx(trace_const_full_ratio_form(m, r, eta), rel=1e-10)


@given(m=st.integers(min_value=2, max_value=6), rp=pairs(eta_max=0.8))
def test_oracle_equivalence(m, rp):
    r, eta = rp
    exact = (trace_const_annulus(m, r, eta), trace_const_ball(m, r), trace_const_full(m, r, eta))
    oracle = oracle_trace_constants(m, r, eta)
    for e, o in zip(exact, oracle):
        assert o == pytest.approx(e, rel=1e-6)


@given(m=dims, eta=st.floats(min_value=0.05, max_value=0.9))
def test_full_monotone_in_radius(m, eta):
    radii = np.linspace(1e-3, 0.95, 40) * eta
    vals = [trace_const_full(m, r, eta) for r in radii]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_ode_monotone_in_transversal_parameter():
    slopes = [-ode_oracle(3, mu, 0.1, 0.5, "annulus")[1] for mu in (0, 1, 2, 6, 12)]
    assert all(b >= a for a, b in zip(slopes, slopes[1:]))


def test_ode_oracle_errors():
    with pytest.raises(DomainError):
        ode_oracle(3, -1.0, 0.1, 0.5)
    with pytest.raises(DomainError):
        ode_oracle(3, 0.0, 0.1, None, "annulus")
    with pytest.raises(DomainError):
        ode_oracle(3, 0.0, 0.1, 0.5, "sphere")


def test_trace_asymptotic_leading_terms():
    assert trace_leading_correction(3, 0.07) == 0.07
    assert trace_leading_correction(2, 0.1) == pytest.approx(0.1 * (LOG2_MINUS_EULER + math.log(10)), rel=1e-15)
    res = trace_const_asymptotic(4, 1e-3, 0.3)
    assert res.method == "asymptotic"
    assert res.value == pytest.approx(res.leading_term + res.remainder, rel=1e-15)
    assert res.leading_term == pytest.approx(4 * 1e-9 / 0.3**4 + 1e-3 / 2, rel=1e-15)
    with pytest.raises(DomainError):
        trace_const_asymptotic(3, 0.1, 0.6)


def test_nonconc_leading_terms():
    assert nonconc_leading_correction(3, 0.1) == pytest.approx(0.01 / 2)
    assert nonconc_leading_correction(4, 0.1) == pytest.approx(0.01 / 4)
    eps = 0.01
    assert nonconc_leading_correction(2, eps) == pytest.approx(
        eps**2 / 2 * (2 + math.log(2) - EULER_GAMMA - math.log(eps)), rel=1e-14)
    res = nonconc_asymptotic(3, 0.05, 0.3)
    assert res.leading_term == pytest.approx(0.05**3 / 0.3**3 + 0.05**2 / 2, rel=1e-14)
    assert abs(res.remainder) < 0.05 * res.value


@pytest.mark.parametrize("m", [2, 3, 4, 5])
@pytest.mark.parametrize("kind", ["trace", "nonconc"])
def test_remainder_ratio_bounded(m, kind):
    fn = trace_const_asymptotic if kind == "trace" else nonconc_asymptotic
    for eta in (0.3, 0.1):
        ratios = [abs(fn(m, r, eta).remainder) / fn(m, r, eta).remainder_scale
                  for r in (1e-2, 1e-3, 1e-4, 1e-5)]
        assert max(ratios) <= 2 * ratios[0]


def test_nonconc_small_and_monotone():
    assert nonconc_const(3, 1e-8, 0.3) < 1e-15
    vals = [nonconc_const(3, e, 0.3) for e in (0.01, 0.02, 0.05, 0.1, 0.2)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


@given(m=dims, eps=st.floats(min_value=1e-5, max_value=1e-2), eta=st.floats(min_value=0.05, max_value=0.5))
def test_nonconc_leading_term_dominance(m, eps, eta):
    assert nonconc_const(m, eps, eta) >= eps**m / eta**m * (1 - 1e-9)


def test_nonconc_integrates_full():
    from scipy import integrate
    ref, _ = integrate.quad(lambda r: trace_const_full(3, r, 0.3), 0, 0.05, epsrel=1e-13)
    assert nonconc_const(3, 0.05, 0.3) == pytest.approx(ref, rel=1e-9)


def test_manifold_prefactors():
    flat = ManifoldConstants()
    eucl_n = math.sqrt(nonconc_const(3, 0.01, 0.2))
    eucl_t = math.sqrt(trace_const_full(2, 0.01, 0.2))
    assert manifold_nonconc(3, 0.01, 0.2, flat) == pytest.approx(eucl_n)
    assert manifold_nonconc(3, 0.01, 0.2, ManifoldConstants(N=3)) == pytest.approx(math.sqrt(3) * eucl_n)
    assert manifold_nonconc(3, 0.01, 0.2, ManifoldConstants(K=2)) == pytest.approx(4 * eucl_n)
    assert manifold_trace(2, 0.01, 0.2, flat) == pytest.approx(eucl_t)
    assert manifold_trace(2, 0.01, 0.2, ManifoldConstants(N=4)) == pytest.approx(2 * eucl_t)
    assert manifold_trace(2, 0.01, 0.2, ManifoldConstants(K=1.5)) == pytest.approx(1.5 * eucl_t)
    with pytest.raises(DomainError):
        manifold_trace(2, 0.01, 0.6, ManifoldConstants(r0=0.5, r1=0.25))


def test_manifold_constants_validation():
    assert ManifoldConstants(kappa0=-3).C_ellreg == 5
    assert ManifoldConstants(kappa0=3).C_ellreg == 2
    for bad in (dict(N=0), dict(N=1.5), dict(K=0.5), dict(r1=1.0), dict(r0=1.5),
                dict(C_ext=0.5), dict(C_nbhd=0), dict(kappa0=float("inf"))):
        with pytest.raises(DomainError):
            ManifoldConstants(**bad)


def test_dtn_examples():
    for m in range(2, 9):
        assert dtn_sphere_eigenvalue(m, 0) == 0
        assert dtn_sphere_eigenvalue(m, 1) == pytest.approx(1, rel=1e-15)
    assert dtn_sphere_eigenvalue(2, 5) == 5
    # m=5, k=2: k(k+m-2) = 10, so the eigenvalue is sqrt(10 + 9/4) - 3/2 = 2
    assert dtn_sphere_eigenvalue(5, 2) == pytest.approx(2, rel=1e-15)
    with pytest.raises(DomainError):
        dtn_sphere_eigenvalue(3, -1)


@given(m=dims, k=st.integers(min_value=0, max_value=10_000))
def test_dtn_closed_form(m, k):
    nu = (m - 2) / 2
    naive = math.sqrt(k * (k + m - 2) + nu * nu) - nu
    assert dtn_sphere_eigenvalue(m, k) == pytest.approx(naive, rel=1e-10, abs=1e-12)


def test_muf():
    rep = verify_muf(2, 50)
    assert rep.equality and max(abs(s) for s in rep.slack) <= 1e-12
    rep3 = verify_muf(3, 50)
    assert rep3.slack[1] == pytest.approx(0, abs=1e-12)
    rep5 = verify_muf(5, 2)
    assert rep5.slack[2] == pytest.approx(4 * 2**2 - 10, rel=1e-12)
    for m in range(3, 11):
        assert min(verify_muf(m, 50).slack) >= -1e-12
