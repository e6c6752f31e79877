import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bergkern import heat as ht
from bergkern.errors import EmptyRegimeWarning

PI = math.pi
eig = st.floats(-5, 5, allow_subnormal=False)


def test_zero_eigenvalue_convention():
    assert ht.density([0.0], 2.0) == 1 / (2 * PI) * 0.5


def test_large_time_limit_value():
    assert ht.density([2.0], 50.0) == pytest.approx(2 / (2 * PI), abs=1e-6)
    assert ht.large_time_limit([2.0]) == pytest.approx(2 / (2 * PI))
    assert ht.large_time_limit([2.0, -1.0], 0) == 0.0


def test_subset_sum_enumeration():
    a, t = (1.0, -1.0), 1.0
    fin = lambda x: x * math.exp(-t * x) / (1 - math.exp(-t * x))  # noqa: E731
    fout = lambda x: x / (1 - math.exp(-t * x))  # noqa: E731
    brute = (fin(a[0]) * fout(a[1]) + fout(a[0]) * fin(a[1])) / (2 * PI) ** 2
    assert ht.density(a, t, q=1) == pytest.approx(brute, rel=1e-14)


def test_small_time_behaviour():
    # t a -> 0: every factor approaches 1/t
    t = 1e-6
    assert ht.density([1.0, -2.0], t, 1) * (2 * PI * t) ** 2 == pytest.approx(2.0, rel=1e-4)


def test_constant_C():
    c = ht.heat_constant_C()
    assert c == pytest.approx(math.e / (math.e - 1), abs=1e-6)
    assert c > 1
    x = np.linspace(-1, 1, 10 ** 6 + 1)
    x = x[x != 0]
    assert np.all(np.abs(x / -np.expm1(x)) <= c + 1e-12)
    assert np.all(np.abs(x * np.exp(x) / -np.expm1(x)) <= c + 1e-12)
    y = np.concatenate([np.linspace(-40, -1, 10 ** 5), np.linspace(1, 40, 10 ** 5)])
    assert np.all(np.abs(1 / -np.expm1(y)) <= c + 1e-12)
    assert np.all(np.abs(np.exp(y) / -np.expm1(y)) <= c + 1e-12)


def test_degeneracy_bound_examples():
    c = ht.heat_constant_C()
    assert ht.degeneracy_bound([0.01], 10.0) == pytest.approx(c / 10)
    with pytest.warns(EmptyRegimeWarning):
        assert ht.degeneracy_bound([3.0], 10.0) == pytest.approx(3 * c)
    with pytest.raises(ValueError):
        ht.degeneracy_bound([1.0], 0.5)


def test_query_validation():
    with pytest.raises(ValueError):
        ht.HeatDensityQuery((1.0,), 0.0)
    with pytest.raises(ValueError):
        ht.HeatDensityQuery((1.0,), 1.0, q=2)
    with pytest.raises(ValueError):
        ht.HeatDensityQuery((1.0,), 1.0, k=0)


@given(st.lists(eig, min_size=1, max_size=4), st.floats(0.05, 30), st.data())
def test_permutation_symmetry(a, t, data):
    q = data.draw(st.integers(0, len(a)))
    perm = data.draw(st.permutations(a))
    assert ht.density(perm, t, q) == pytest.approx(ht.density(a, t, q), rel=1e-12)


@given(st.lists(eig, min_size=1, max_size=3), st.floats(0.05, 30), st.data())
def test_degree_reflection(a, t, data):
    # reversing every eigenvalue sign swaps the roles of q and n - q
    q = data.draw(st.integers(0, len(a)))
    assert ht.density([-x for x in a], t, len(a) - q) == pytest.approx(ht.density(a, t, q), rel=1e-12)


@given(st.lists(eig, min_size=1, max_size=3), st.floats(1.6, 40), st.data())
def test_density_below_bound(a, t, data):
    q = data.draw(st.integers(0, len(a)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyRegimeWarning)
        bound = ht.degeneracy_bound(a, t, q)
    assert ht.density(a, t, q) <= bound * (1 + 1e-9)


@given(st.lists(st.floats(0.1, 5), min_size=1, max_size=3), st.integers(1, 50))
def test_k_scaling(a, k):
    assert ht.density(a, 2.0, 0, k) == pytest.approx(k ** len(a) * ht.density(a, 2.0, 0), rel=1e-13)


def test_heat_table_rows():
    rows = ht.heat_table([ht.HeatDensityQuery((1.0,), 2.0), ht.HeatDensityQuery((1.0,), 0.5)])
    assert rows[0][4] >= rows[0][3] and math.isnan(rows[1][4])


@given(st.lists(st.floats(-5, 5).filter(lambda a: abs(a) > 1e-3), min_size=1, max_size=3), st.data())
def test_small_time_limit(a, data):
    n = len(a)
    q = data.draw(st.integers(0, n))
    t = 1e-6
    expect = math.comb(n, q) / (2 * PI) ** n
    assert t ** n * ht.density(a, t, q) == pytest.approx(expect, rel=1e-4)


@given(st.lists(st.floats(0.2, 5), min_size=1, max_size=3), st.data())
def test_large_time_limit_matches_b0(a, data):
    # at t = 100 the density equals (2 pi)^{-n} |prod a| on the matching stratum and vanishes elsewhere
    n = len(a)
    signs = data.draw(st.lists(st.sampled_from([1, -1]), min_size=n, max_size=n))
    a = [s * x for s, x in zip(signs, a)]
    neg = sum(1 for x in a if x < 0)
    for q in range(n + 1):
        val = ht.density(a, 100.0, q)
        if q == neg:
            assert val == pytest.approx(ht.large_time_limit(a, q), rel=1e-6)
        else:
            assert val < 1e-6


def test_large_time_limit_equals_coefficient_b0():
    from bergkern import coeffs as cf
    from bergkern import geometry as geo
    rep = geo.curvature_report(geo.fock([1.0, -3.0]), [0j, 0j], require_positive=False)
    b0, _ = cf.b0_coeff(rep, 1)
    assert ht.large_time_limit(rep.eigenvalues, 1) == pytest.approx(b0, rel=1e-14)
