import math

import pytest

from bergkern import geometry as geo
from bergkern import morse as mo
from bergkern.errors import MissingDims, UnsupportedFamily


def test_cp1_integrals():
    rep = mo.morse_report(geo.cp1_fs())
    assert rep.q_integrals[0] == pytest.approx(1.0, abs=1e-9)
    assert rep.q_integrals[1] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("eps,sigma", [(1.0, 1.0), (0.6, 0.7), (2.0, 1.5)])
def test_mixed_sign_euler_integral(eps, sigma):
    rep = mo.morse_report(geo.cp1_fs(eps=eps, sigma=sigma))
    i0, i1 = rep.q_integrals
    assert i0 - i1 == pytest.approx(1.0, abs=1e-8)
    if i1 > 0:
        assert i0 > 1.0
    assert abs(rep.rr_defect) < 1e-8


def test_negative_bundle_integrals():
    rep = mo.morse_report(geo.cp1_fs(sign=-1))
    assert rep.q_integrals == (pytest.approx(0.0, abs=1e-12), pytest.approx(1.0, abs=1e-9))


def test_torus_perturbed_matches_closed_form():
    a, b = math.pi / 2, 0.3 * math.pi ** 2
    th0 = math.acos(a / b)
    i0 = (2 / math.pi) * (a * (2 * math.pi - 2 * th0) + 2 * b * math.sin(th0)) / (2 * math.pi)
    ints = [mo.morse_integral(geo.torus(1, 1.0, 0.3), q) for q in (0, 1)]
    assert ints[0].value == pytest.approx(i0, abs=1e-5)
    assert ints[0].value - ints[1].value == pytest.approx(1.0, abs=1e-5)


def test_requires_compact_family():
    with pytest.raises(UnsupportedFamily):
        mo.morse_integral(geo.fock([1.0]), 0)


def test_exact_dims():
    assert mo.exact_dims(geo.cp1_fs(), 5) == {0: 6, 1: 0}
    assert mo.exact_dims(geo.cp1_fs(sign=-1), 5) == {0: 0, 1: 4}
    assert mo.exact_dims(geo.torus(2), 3) == {0: 6, 1: 0}
    with pytest.raises(MissingDims):
        mo.exact_dims(geo.chart_expression("abs2(z1)"), 3)


def test_strong_morse_cp1():
    chk = mo.strong_morse_check(geo.cp1_fs(), 0, 20)
    assert chk.dim == 21 and chk.leading == pytest.approx(20.0)
    assert chk.weak_margin == pytest.approx(-1.0) and chk.holds
    chk1 = mo.strong_morse_check(geo.cp1_fs(), 1, 20)
    assert chk1.dim == 0 and chk1.holds


@pytest.mark.parametrize("k", [10, 40, 160])
def test_mixed_sign_margin_tends_to_one(k):
    g = geo.cp1_fs(eps=1.0, sigma=1.0)
    chk = mo.strong_morse_check(g, 0, k)
    assert chk.holds
    assert chk.lower_margin == pytest.approx(1.0, abs=1e-6)


def test_missing_dims():
    with pytest.raises(MissingDims):
        mo.strong_morse_check(geo.cp1_fs(), 1, 5, dims={1: 0})


def test_vanishing_check_negative_bundle():
    neg, rows = mo.vanishing_check(geo.cp1_fs(sign=-1), 1, [10, 40])
    assert neg == 1
    assert [r.dim for r in rows] == [9, 39]
    assert rows[0].leading == pytest.approx(10.0)
    _, rows0 = mo.vanishing_check(geo.cp1_fs(sign=-1), 0, [1, 10, 40])
    assert all(r.dim == 0 for r in rows0)


def test_signature_not_constant():
    with pytest.raises(UnsupportedFamily):
        mo.signature_index(geo.cp1_fs(eps=1.0, sigma=1.0))
