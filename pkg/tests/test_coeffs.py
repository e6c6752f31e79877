import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bergkern import coeffs as cf
from bergkern import geometry as geo
from bergkern import jets
from bergkern.errors import JetOrderTooLow, NotNormalForm, StratumMismatch

PI = math.pi


def radial(lam, c, d):
    return geo.chart_expression(f"{lam}*abs2(z1) + {c}*abs2(z1)^2 + {d}*abs2(z1)^3")


def test_b0_examples():
    rep = geo.curvature_report(geo.cp1_fs(), [0.4j])
    assert cf.b0_coeff(rep, 0) == (pytest.approx(1 / (2 * PI)), ())
    rep = geo.curvature_report(geo.fock([1.0, -3.0]), [0j, 0j], require_positive=False)
    b0, neg = cf.b0_coeff(rep, 1)
    assert b0 == pytest.approx(12 / (2 * PI) ** 2) and neg == (0,)
    with pytest.raises(StratumMismatch):
        cf.b0_coeff(geo.curvature_report(geo.fock([1.0]), [0j]), 1)


@pytest.mark.parametrize("z", [0j, 0.7 + 0.2j, -1.5j])
def test_cp1_coefficients(z):
    rep = geo.curvature_report(geo.cp1_fs(), [z])
    assert cf.b1_coeff(rep) == pytest.approx(1 / (2 * PI), abs=1e-10)
    assert abs(cf.b2_coeff(rep)) < 1e-10
    km = cf.b_km_coeffs(rep)
    assert km[1] == pytest.approx(-1 / (2 * PI))


@pytest.mark.parametrize("lam", [0.5, 1.0, 3.0])
def test_fock_coefficients(lam):
    rep = geo.curvature_report(geo.fock([lam]), [0.3j])
    assert cf.b1_coeff(rep) == 0 and cf.b2_coeff(rep) == 0
    assert cf.b_km_coeffs(rep) == (pytest.approx(2 * lam / (2 * PI)), 0, 0)


def test_kahler_specialization():
    g = geo.chart_expression("abs2(z1) + 0.2*abs2(z1)^2", theta="2*(1 + 0.8*abs2(z1))")
    rep = geo.curvature_report(g, [0.3 + 0.2j])
    pre = rep.det_rdot / (2 * PI)
    assert cf.b1_coeff(rep) == pytest.approx(pre * rep.r / (8 * PI), rel=1e-9)


@given(st.floats(-0.8, 0.8), st.floats(-0.8, 0.8))
def test_twisted_relation(x, y):
    rep = geo.curvature_report(geo.cp1_fs(eps=0.05), [complex(x, y)])
    pre = rep.det_rdot / (2 * PI)
    assert cf.b1_coeff(rep) - cf.b_km_coeffs(rep)[1] == pytest.approx(pre * rep.r_hat / (4 * PI), rel=1e-9, abs=1e-12)


def test_local_morse_rhs():
    rep = geo.curvature_report(geo.cp1_fs(), [0j])
    lead, refined = cf.local_morse_rhs(rep, 10, 0)
    assert lead == pytest.approx(10 / (2 * PI))
    assert refined == pytest.approx(11 / (2 * PI))
    flat = geo.curvature_report(geo.chart_expression("0"), [0j], require_positive=False)
    assert cf.local_morse_rhs(flat, 5, 0)[0] == 0 and cf.local_morse_rhs(flat, 5, 1)[0] == 0
    mixed = geo.curvature_report(geo.fock([1.0, -3.0]), [0j, 0j], require_positive=False)
    assert cf.local_morse_rhs(mixed, 4, 0)[0] == 0


def test_coefficient_set_record():
    cs = cf.coefficient_set(geo.cp1_fs(), [0.2])
    rec = cs.as_record()
    assert rec["point"] == [[0.2, 0.0]] and rec["method"] == "closed_form"
    assert cs.b1 == pytest.approx(1 / (2 * PI))


def test_stationary_phase_fock_is_zero():
    pj, vt, lam = cf.normal_form_jets(geo.fock([1.0]), 8)
    assert cf.b1_via_stationary_phase(pj, vt, lam) == pytest.approx(0, abs=1e-14)
    b1j = cf.b1_jet(geo.fock([1.0]), [0j])
    assert cf.b2_via_stationary_phase(pj, vt, lam, b1j) == pytest.approx(0, abs=1e-14)


def test_stationary_phase_cp1():
    sp = cf.stationary_phase_set(geo.cp1_fs())
    assert sp.b1 == pytest.approx(1 / (2 * PI), abs=1e-12)
    assert abs(sp.b2) < 1e-12


MODELS = [(1.0, 0.3, 0.0), (0.5, -0.1, 0.2), (2.0, 0.5, -0.3), (1.5, 0.2, 0.1), (0.8, -0.05, 0.07)]


@pytest.mark.parametrize("lam,c,d", MODELS)
def test_cross_path_agreement(lam, c, d):
    g = radial(lam, c, d)
    rep = geo.curvature_report(g, [0j])
    sp = cf.stationary_phase_set(g)
    assert sp.b1 == pytest.approx(cf.b1_coeff(rep), abs=1e-10)
    assert sp.b2 == pytest.approx(cf.b2_coeff(rep), abs=1e-9)


@settings(max_examples=10)
@given(st.floats(0.3, 3), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_cross_path_random_radial(lam, c, d):
    g = radial(lam, c, d)
    rep = geo.curvature_report(g, [0j])
    sp = cf.stationary_phase_set(g)
    scale = max(1.0, abs(cf.b2_coeff(rep)))
    assert abs(sp.b1 - cf.b1_coeff(rep)) < 1e-8 * scale
    assert abs(sp.b2 - cf.b2_coeff(rep)) < 1e-8 * scale


def test_jet_order_too_low():
    g = radial(1.0, 0.3, 0.0)
    pj, vt, lam = cf.normal_form_jets(g, 8)
    with pytest.raises(JetOrderTooLow):
        cf.b1_via_stationary_phase(pj.truncate(3), vt, lam)
    with pytest.raises(JetOrderTooLow):
        cf.b2_via_stationary_phase(pj.truncate(6), vt, lam, cf.b1_jet(g, [0j]))


def test_not_normal_form():
    g = geo.chart_expression("abs2(z1) + 0.1*(z1^2*conj(z1) + z1*conj(z1)^2)")
    pj, vt, lam = cf.normal_form_jets(g, 8)
    with pytest.raises(NotNormalForm):
        cf.b1_via_stationary_phase(pj, vt, lam)


def test_b0_jet_value():
    g = geo.cp1_fs()
    pj, vt, _ = cf.normal_form_jets(g, 6)
    assert complex(cf.b0_jet(pj, vt).value).real == pytest.approx(1 / (2 * PI))


@settings(max_examples=15)
@given(st.floats(-0.8, 0.8), st.floats(-0.8, 0.8), st.floats(0.5, 3.0))
def test_coefficients_invariant_under_pullback(x, y, c):
    # z -> c z scales Phi and Theta alike, so Rdot and every b_j are pulled back unchanged
    g = geo.cp1_fs(eps=0.05)
    z = complex(x, y)
    a = cf.coefficient_set(g, [z])
    b = cf.coefficient_set(geo.pullback(g, c), [z / c])
    assert b.b0 == pytest.approx(a.b0, rel=1e-10)
    assert b.b1 == pytest.approx(a.b1, rel=1e-8, abs=1e-12)
    assert b.b2 == pytest.approx(a.b2, rel=1e-7, abs=1e-10)


@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_b0_matches_report(x, y):
    g = geo.chart_expression("abs2(z1) + abs2(z2)^2 + 0.2*abs2(z1)*abs2(z2)", n=2)
    z = [complex(x, y), 0.5 + 0.1j]
    rep = geo.curvature_report(g, z)
    cs = cf.coefficient_set(g, z)
    assert cs.b0 == pytest.approx(abs(np.prod(rep.eigenvalues)) / (2 * PI) ** 2, rel=1e-12)


def test_kahler_reduction_tight():
    g = geo.chart_expression("abs2(z1) + 0.2*abs2(z1)^2 - 0.05*abs2(z1)^3",
                             theta="2*(1 + 0.8*abs2(z1) - 0.45*abs2(z1)^2)")
    for z in (0.1j, 0.4 + 0.2j):
        rep = geo.curvature_report(g, [z])
        assert abs(cf.b1_coeff(rep) - rep.det_rdot / (2 * PI) * rep.r / (8 * PI)) < 1e-10
