import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bergkern import exact as ex
from bergkern import geometry as geo
from bergkern.errors import FitDegenerate, UnsupportedFamily

PI = math.pi


def test_fock_gram_is_gaussian_moments():
    k = 4
    basis = ex.section_basis(geo.fock([1.0]), k, radius=1.0)
    g = ex.gram_matrix(basis)
    assert g.diagonal
    # G_mm = int |z|^{2m} e^{-2k|z|^2} 2 dx dy = 2 pi m! / (2k)^{m+1}, compared in logs
    ms = [int(e[0]) for e in basis.exponents]
    expect = np.array([math.log(2 * PI) + math.lgamma(m + 1) - (m + 1) * math.log(2 * k) for m in ms])
    assert np.allclose(2 * g.log_scale, expect, rtol=0, atol=1e-11)


def test_fock_basis_tail():
    basis = ex.section_basis(geo.fock([1.0]), 8, radius=2.0, tol=1e-12)
    assert basis.tail_bound < 1e-12


def test_cp1_basis_is_exact():
    basis = ex.section_basis(geo.cp1_fs(), 7)
    assert basis.exponents == tuple((m,) for m in range(8)) and basis.tail_bound == 0
    g = np.diag(ex.gram_matrix(ex.section_basis(geo.cp1_fs(), 1)).matrix())
    assert g[0] == pytest.approx(g[1], rel=1e-12)


def test_tensor_gram_is_hermitian():
    basis = ex.section_basis(geo.torus(1, 1.0, 0.2), 3)
    g = ex.gram_matrix(basis)
    assert np.array_equal(g.equilibrated, g.equilibrated.conj().T)
    assert np.all(np.real(np.diag(g.chol)) > 0)


@pytest.mark.parametrize("k", [1, 8, 16])
def test_fock_kernel(k):
    basis = ex.section_basis(geo.fock([1.0]), k, radius=2.0)
    vals = ex.bergman_kernel_function(basis, np.array([[0j], [0.5 + 0.5j], [2.0]]))
    assert np.allclose(vals, k / PI, rtol=1e-10)


@pytest.mark.parametrize("k", [0, 10, 40])
def test_cp1_kernel(k):
    basis = ex.section_basis(geo.cp1_fs(), k)
    vals = ex.bergman_kernel_function(basis, np.array([[0j], [0.8 - 0.3j], [3.0]]))
    assert np.allclose(vals, (k + 1) / (2 * PI), rtol=1e-10)


def test_closed_form_examples():
    assert ex.closed_form_kernel(geo.fock([1.0, 3.0]), 5) == pytest.approx((5 / PI) ** 2 * 3)
    assert ex.closed_form_kernel(geo.cp1_fs(), 0) == pytest.approx(1 / (2 * PI))
    assert ex.closed_form_kernel(geo.fock([1.0]), 1, [1.7]) == pytest.approx(1 / PI)
    with pytest.raises(UnsupportedFamily):
        ex.closed_form_kernel(geo.torus(), 3)


def test_fock_two_dimensional():
    ev = ex.evaluate_kernel(geo.fock([1.0, 3.0]), 5, [[0.1, 0.2j]])
    assert ev.values[0] == pytest.approx((5 / PI) ** 2 * 3, rel=1e-10)


def test_nonradial_chart_weight():
    g = geo.chart_expression("abs2(z1) + 0.1*(z1^2 + conj(z1)^2)", radius=3.0)
    ev = ex.evaluate_kernel(g, 4, [[0j], [0.3 + 0.2j]], radius=1.0)
    assert np.allclose(ev.values, 4 / PI, rtol=1e-8)


def test_offdiag_fock():
    basis = ex.section_basis(geo.fock([1.0]), 4, radius=1.0)
    m = ex.offdiag_modulus(basis, [0.3], [0j])
    assert m == pytest.approx(4 / PI * math.exp(-4 * 0.09), rel=1e-12)


@given(st.floats(-0.6, 0.6), st.floats(-0.6, 0.6))
def test_offdiag_diagonal_consistency(x, y):
    basis = ex.section_basis(geo.cp1_fs(), 6)
    z = [complex(x, y)]
    assert ex.offdiag_modulus(basis, z, z) == pytest.approx(ex.bergman_kernel_function(basis, z), rel=1e-12)


def test_cp1_offdiag_gaussian_decay():
    k = 20
    basis = ex.section_basis(geo.cp1_fs(), k)
    d = np.linspace(0.1, 0.5, 9)
    z = 0.1 + 0j
    w = z + d
    ratio = np.array([ex.offdiag_modulus(basis, [z], [wi]) / ex.bergman_kernel_function(basis, [z]) for wi in w])
    c = np.polyfit(d ** 2, -np.log(ratio) / k, 1)[0]
    assert c > 0
    assert ratio[-1] <= math.exp(-k * c * 0.25 * 0.5)


@given(st.floats(0.3, 3.0), st.floats(0.0, 6.28))
def test_gauge_invariance(mod, arg):
    # multiplying every section by one constant leaves the kernel unchanged
    s = mod * np.exp(1j * arg)
    a = ex.evaluate_kernel(geo.cp1_fs(eps=0.05), 6, [[0.2j]], scale=1.0).values[0]
    b = ex.evaluate_kernel(geo.cp1_fs(eps=0.05), 6, [[0.2j]], scale=s).values[0]
    assert b == pytest.approx(a, rel=1e-10)


@settings(max_examples=8)
@given(st.integers(1, 4), st.floats(0.0, 0.3))
def test_torus_kernel_integrates_to_dimension(k, eps):
    model = geo.torus(1, 1.0, eps)
    m = 48
    x = (np.arange(m) + 0.5) / m
    z = (x[:, None] + 1j * x[None, :]).reshape(-1, 1)
    vals = ex.evaluate_kernel(model, k, z).values
    total = 2.0 * float(np.mean(vals))       # dv = 2 dx dy, unit fundamental cell
    assert total == pytest.approx(k, rel=1e-8)


def test_kernel_is_nonnegative():
    vals = ex.evaluate_kernel(geo.torus(1, 1.0, 0.3), 3, np.linspace(0, 1, 7)[:, None] + 0.3j).values
    assert np.all(vals >= 0)


def test_thread_count_does_not_change_bits():
    model = geo.torus(1, 1.0, 0.2)
    a = ex.evaluate_kernel(model, 8, [[0.3 + 0.4j]], ex.QuadratureSpec(threads=1))
    b = ex.evaluate_kernel(model, 8, [[0.3 + 0.4j]], ex.QuadratureSpec(threads=4))
    assert np.array_equal(a.gram.equilibrated, b.gram.equilibrated)
    assert a.values[0] == b.values[0]


def test_eikonal_residual():
    f = geo.fock([1.0, 2.0])
    assert ex.eikonal_residual(f, [0.1, -0.2j], [0, 0]) < 1e-14
    assert ex.eikonal_residual(f, [0.3, 0.1j], [0.3, 0.1j]) < 1e-14
    g = geo.fock([1.0])
    assert ex.eikonal_residual(g, [0.4], [0.0], delta=0.1) > 1e-4
    with pytest.raises(UnsupportedFamily):
        ex.eikonal_residual(geo.cp1_fs(), [0.1], [0.0])


@given(st.complex_numbers(max_magnitude=1, allow_nan=False), st.complex_numbers(max_magnitude=1, allow_nan=False))
def test_eikonal_identity_indefinite(z, w):
    assert ex.eikonal_residual(geo.fock([1.0, -3.0]), [z, w], [w, z]) < 1e-12


def test_fock_expansion_fit():
    fit = ex.expansion_fit(geo.fock([1.0]), [4, 6, 8, 12, 16], [0j], (1 / PI, 0.0, 0.0))
    assert np.allclose(fit.fitted_b, (1 / PI, 0, 0), atol=1e-9)
    assert np.allclose(fit.residuals, 0, atol=1e-10)
    with pytest.raises(FitDegenerate):
        ex.expansion_fit(geo.fock([1.0]), [4, 8], [0j], (1 / PI, 0, 0))


def test_degeneracy_control():
    rows = ex.degeneracy_scan(geo.fock([1.0]), [4, 8, 16], [[0j]])
    assert all(r.density == pytest.approx(1 / PI, rel=1e-10) for r in rows)
    assert max(r.density for r in rows) - min(r.density for r in rows) < 1e-14


@pytest.mark.parametrize("model,k", [(geo.torus(1, 1.0, 0.3), 6), (geo.torus(2, 1.5, 0.1), 3),
                                     (geo.chart_expression("abs2(z1) + 0.1*(z1^2 + conj(z1)^2)", radius=3.0), 4)])
def test_refinement_within_error_estimate(model, k):
    z = [[0.3 + 0.2j]]
    base = ex.evaluate_kernel(model, k, z, radius=1.0)
    order = base.quadrature_meta["order"]
    fine = ex.evaluate_kernel(model, k, z, ex.QuadratureSpec(order=order), radius=1.0)
    assert abs(fine.values[0] - base.values[0]) <= max(10 * base.gram.error_estimate, 1e-12) * base.values[0]
