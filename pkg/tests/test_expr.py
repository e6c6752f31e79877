import numpy as np
import pytest
from hypothesis import given, strategies as st

from bergkern import expr, jets
from bergkern.errors import ManifestError
from bergkern.jets import WirtingerJet


def test_evaluates_on_arrays():
    e = expr.parse("abs2(z1) + 0.5*abs2(z1)^2", 1)
    z = np.array([0.3 + 0.4j])
    assert e([z]) == pytest.approx(0.25 + 0.5 * 0.0625)


def test_evaluates_on_jets():
    e = expr.parse("log(1 + z1*conj(z1)) / 2", 1)
    j = e([WirtingerJet.variable(0, np.zeros(1), 4)])
    assert j.coeff((2,), (2,)) == pytest.approx(-0.25)


def test_two_variables_with_underscore():
    e = expr.parse("abs2(z_1) + 3*abs2(z_2)", 2)
    assert e([np.array(1.0 + 0j), np.array(1j)]) == pytest.approx(4.0)


def test_radial_detection():
    assert expr.parse("exp(-abs2(z1)) + abs2(z1)^3", 1).is_radial
    assert not expr.parse("abs2(z1) + 0.1*(z1^2 + conj(z1)^2)", 1).is_radial


@pytest.mark.parametrize("src", ["abs2(z1) + * 2", "foo(z1)", "z3", "(abs2(z1)", "abs2(z1) $"])
def test_syntax_errors_carry_column(src):
    with pytest.raises(ManifestError) as info:
        expr.parse(src, 1)
    assert info.value.column is not None and info.value.column >= 1


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.1, 4))
def test_matches_python_evaluation(x, y, c):
    e = expr.parse(f"{c}*abs2(z1) - exp(-abs2(z1))", 1)
    z = x + 1j * y
    assert complex(e([np.array(z)])) == pytest.approx(c * abs(z) ** 2 - np.exp(-abs(z) ** 2), abs=1e-12)
