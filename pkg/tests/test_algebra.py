import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from newtonflow.algebra import (
    Polynomial,
    RationalFunction,
    classify_point,
    partial_fractions,
    poly_divmod,
    poly_roots,
    rational_from_expr,
)
from newtonflow.expr import parse


def test_divmod_reconstructs():
    a = Polynomial([1, 2, 3, 4, 5])
    b = Polynomial([1j, 0, 2])
    q, r = poly_divmod(a, b)
    assert r.degree < b.degree
    assert (q * b + r).allclose(a)


def test_roots_with_multiplicity():
    p = Polynomial.from_roots([1, 1, 1, 2j, 2j, -3])
    roots = poly_roots(p)
    assert [m for _, m in roots] == [1, 2, 3]
    for (r, _), expected in zip(roots, [-3, 2j, 1]):
        assert abs(r - expected) < 1e-9


def test_zero_root_is_exact():
    assert poly_roots(Polynomial([0, 0, 1])) == [(0j, 2)]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(-2, 2), st.floats(-2, 2), st.integers(1, 3)), min_size=1, max_size=5))
def test_roots_reconstruct_polynomial(spec):
    roots = [complex(x, y) for x, y, _ in spec]
    # keep distinct roots well separated so multiplicities are meaningful
    if any(abs(a - b) < 0.1 for i, a in enumerate(roots) for b in roots[i + 1 :]):
        return
    full = [complex(x, y) for x, y, m in spec for _ in range(m)]
    p = Polynomial.from_roots(full)
    found = poly_roots(p)
    assert sum(m for _, m in found) == len(full)
    rebuilt = Polynomial.from_roots([r for r, m in found for _ in range(m)])
    assert rebuilt.allclose(p, 1e-7)


def test_rational_cancels_common_factors():
    r = RationalFunction(Polynomial.from_roots([1, 2]), Polynomial.from_roots([1, 3]))
    assert r.numerator.degree == 1 and r.denominator.degree == 1
    assert abs(r(5) - 3 / 2) < 1e-12
    assert r.denominator.lead == 1


def test_partial_fractions_of_rational_example():
    # 1/f for f = z(2z-i)^2/(2z+i)^2 is 1/z + 2i/(z-i/2)^2 with no residue at i/2
    f = rational_from_expr(parse("z*(2*z-i)^2/(2*z+i)^2"))
    pf = partial_fractions(f.reciprocal())
    assert pf.polynomial_part.is_zero()
    terms = {round(t.pole.imag, 6): t.coefficients for t in pf.terms}
    assert abs(terms[0.0][0] - 1) < 1e-12
    assert abs(terms[0.5][0]) < 1e-12 and abs(terms[0.5][1] - 2j) < 1e-12


def test_partial_fractions_reproduce_function(rng):
    f = rational_from_expr(parse("(z^5+2*z-1)/((z-1)^2*(z+i)*(z-3)^3)"))
    pf = partial_fractions(f)
    for z in rng.normal(size=20) + 1j * rng.normal(size=20):
        assert abs(pf(z) - f(z)) < 1e-9 * (1 + abs(f(z)))


@pytest.mark.parametrize(
    "text,z0,mode,expected",
    [
        ("z^3", 0, "function", "zero(3)"),
        ("1/(z-1)^2", 1, "function", "pole(2)"),
        ("z", 1, "function", "regular"),
        ("1", None, "field", "zero(2)"),  # f = 1 is a double zero at infinity
        ("z^3", None, "field", "pole(1)"),
        ("z^3", None, "function", "pole(3)"),
        ("z^2", None, "field", "regular"),
    ],
)
def test_classify_point(text, z0, mode, expected):
    assert str(classify_point(rational_from_expr(parse(text)), z0, mode)) == expected


def test_non_rational_rejected():
    from newtonflow.algebra import NotRationalError

    with pytest.raises(NotRationalError):
        rational_from_expr(parse("exp(z)"))
