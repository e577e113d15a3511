import cmath
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from newtonflow.algebra import Polynomial, RationalFunction, rational_from_expr
from newtonflow.expr import evaluate, is_infinite, parse
from newtonflow.newton import (
    BasePointError,
    FieldSpec,
    NoPsiError,
    build_psi,
    field_from_phi,
    field_from_psi,
    newton_map_product_form,
    perp_field,
    rho,
    single_valuedness,
    theta,
)

from conftest import random_points, rational_spec


def rational(text):
    return rational_from_expr(parse(text))


def wrapped(x):
    return (x + math.pi) % (2 * math.pi) - math.pi


# -- build_psi ----------------------------------------------------------------

def test_pole_of_order_two_gives_cubic():
    z0 = 0.7 - 0.2j
    psi = build_psi(rational("1/z^2"), z0)
    assert psi.log_terms == () and psi.principal_terms == ()
    for z in (1 + 1j, -2 + 0.5j, 0.3j):
        assert abs(psi(z) - (z**3 / 3 - z0**3 / 3)) < 1e-13


@pytest.mark.parametrize("lam", [2.0, 0.5 + 1j, -3j])
def test_linear_field_gives_logarithm(lam):
    psi = build_psi(RationalFunction(Polynomial([0, 1 / lam]), Polynomial([1])), 1.0)
    (b, res), = psi.log_terms
    assert abs(b) < 1e-12 and abs(res - lam) < 1e-12
    z = 0.4 + 0.9j
    assert abs(psi(z) - lam * cmath.log(z)) < 1e-12


def test_rational_example_psi_is_log_and_inverse():
    psi = build_psi(rational("-z^2*(z-1)/(z^2-z+1)"))
    # Psi = -1/z - log(z-1) + const
    probe = [0.5 + 0.5j, 2 + 1j, -1 - 1j]
    diffs = [psi(z) - (-1 / z - cmath.log(z - 1)) for z in probe]
    assert max(abs(d - diffs[0]) for d in diffs) < 1e-12


def test_base_point_at_zero_rejected():
    with pytest.raises(BasePointError, match="base point is a zero"):
        build_psi(rational("z*(z-1)"), 1.0)


def test_base_point_at_pole_allowed():
    psi = build_psi(rational("1/z^2"), 0)
    assert psi(0.5) == pytest.approx(0.5**3 / 3)


def test_residues_are_simple_pole_coefficients():
    f = rational("z*(2*z-i)^2/(2*z+i)^2")
    psi = build_psi(f)
    lam = dict(psi.log_terms)
    assert len(lam) == 1 and abs(lam[0j] - 1) < 1e-10


# -- first integrals ------------------------------------------------------------

def test_rho_theta_of_identity_newton_map():
    spec = field_from_phi(parse("z"))
    assert rho(spec, 1j) == pytest.approx(math.pi / 2)
    assert theta(spec, 1j) == pytest.approx(0.0, abs=1e-15)


def test_rho_theta_of_unit_field():
    spec = rational_spec("1", 0)
    assert rho(spec, 3 + 2j) == pytest.approx(-2.0)
    assert theta(spec, 3 + 2j) == pytest.approx(3.0)


def test_rho_of_exponential_field():
    spec = FieldSpec.from_expression(parse("exp(z)"), 1j * math.pi / 2)
    # Psi = -exp(-z) + exp(-z0); at z = 0 that is -1 - i
    assert rho(spec, 0) == pytest.approx(1.0, abs=1e-14)


def test_theta_of_rational_example():
    spec = field_from_phi(parse("exp(1/z)*(z-1)"))
    assert theta(spec, 2) == pytest.approx(-0.5, abs=1e-14)


def test_singular_points_give_nan():
    spec = rational_spec("z^2/(z-1)", 0.5j)
    assert math.isnan(rho(spec, 0))
    assert math.isnan(theta(spec, 0))


# -- fields from Psi and Phi ------------------------------------------------------

def test_sine_newton_map_gives_minus_tangent(rng):
    spec = field_from_phi(parse("sin(z)"))
    for z in random_points(rng, 50, avoid=[k * math.pi / 2 for k in range(-2, 3)]):
        assert abs(spec.f(z) + cmath.tan(z)) <= 1e-12 * max(1, abs(cmath.tan(z)))


def test_double_exponential_newton_map_gives_exponential(rng):
    spec = field_from_phi(parse("exp(exp(-z))"))
    for z in random_points(rng, 50):
        assert abs(spec.f(z) - cmath.exp(z)) <= 1e-12 * abs(cmath.exp(z))


def test_identity_psi_gives_unit_field(rng):
    spec = field_from_psi(parse("z"))
    for z in random_points(rng, 10):
        assert spec.f(z) == pytest.approx(1.0)


def test_from_expression_without_closed_form():
    with pytest.raises(NoPsiError, match="--psi or --phi"):
        FieldSpec.from_expression(parse("tan(z)"))


def test_essential_benchmark_field_has_psi(rng):
    spec = FieldSpec.from_expression(parse("-z^2*exp(1/z)"), 0.1 - 0.066j)
    h = 1e-6
    for z in random_points(rng, 20, avoid=[0], margin=0.3):
        dpsi = (spec.psi(z + h) - spec.psi(z - h)) / (2 * h)
        assert abs(dpsi * spec.f(z) - 1) < 1e-7


# -- perp ------------------------------------------------------------------------

def test_perp_of_unit_field():
    spec = perp_field(rational_spec("1", 0))
    assert spec.f(0.3) == pytest.approx(1j)
    assert spec.psi(1 + 1j) == pytest.approx(-1j * (1 + 1j))


def test_perp_of_tangent_field(rng):
    spec = perp_field(field_from_phi(parse("sin(z)")))
    for z in random_points(rng, 20, avoid=[0, math.pi / 2, -math.pi / 2]):
        assert abs(spec.f(z) + 1j * cmath.tan(z)) <= 1e-12 * max(1, abs(cmath.tan(z)))


def test_perp_twice_negates(rng):
    base = rational_spec("z^2-1", 0.2j)
    twice = perp_field(perp_field(base))
    for z in random_points(rng, 20):
        assert abs(twice.f(z) + base.f(z)) < 1e-14 * max(1, abs(base.f(z)))
        assert abs(twice.psi(z) + base.psi(z)) < 1e-12 * max(1, abs(base.psi(z)))


# -- single-valuedness -----------------------------------------------------------

def test_single_valued_for_pole():
    sv = single_valuedness(build_psi(rational("1/z^2")))
    assert sv.psi_single and sv.phi_single


def test_simple_zero_has_period_two_pi_i():
    sv = single_valuedness(build_psi(rational("z")))
    assert not sv.psi_single and sv.phi_single
    assert abs(sv.common_period - 2j * math.pi) < 1e-12


def test_irrational_residue_ratio_is_multivalued():
    r2 = math.sqrt(2)
    f = rational(f"-1/({r2}+1)*z*(z-1)/(z-{r2}/({r2}+1))")
    assert sorted(abs(x) for x in build_psi(f).residues) == pytest.approx([1.0, r2])
    sv = single_valuedness(build_psi(f))
    assert not sv.psi_single and not sv.phi_single


def test_commensurable_residues_share_period():
    # residues 1/2 and -3/2: Phi single valued with period pi*i
    psi = build_psi(rational("1/(1/(2*z) - 3/(2*(z-1)))"))
    sv = single_valuedness(psi)
    assert sv.phi_single and abs(abs(sv.common_period) - math.pi) < 1e-9


# -- product form -----------------------------------------------------------------

def test_product_form_first_rational_example(rng):
    f = rational("z*(2*z-i)^2/(2*z+i)^2")
    pf = newton_map_product_form(build_psi(f))
    for z in random_points(rng, 30, avoid=[0, 0.5j, -0.5j]):
        ratio = pf(z) / (cmath.exp(4j / (2 * z - 1j)) / z)
        assert abs(ratio - 1) < 1e-10


def test_product_form_second_rational_example(rng):
    pf = newton_map_product_form(build_psi(rational("-z^2*(z-1)/(z^2-z+1)")))
    for z in random_points(rng, 30, avoid=[0, 1]):
        assert abs(pf(z) / (cmath.exp(1 / z) * (z - 1)) - 1) < 1e-10


def test_product_form_unit_field():
    pf = newton_map_product_form(build_psi(rational("1")))
    assert abs(pf(0.3 + 0.4j) - cmath.exp(-(0.3 + 0.4j))) < 1e-15


def test_product_form_round_trips_through_parser(rng):
    psi = build_psi(rational("(z^2+1)/(z^3-2*z+2)"), 0.25)
    pf = newton_map_product_form(psi)
    again = parse(str(pf))
    for z in random_points(rng, 100, avoid=[1j, -1j]):
        a, b = evaluate(again, z), cmath.exp(-psi(z))
        assert abs(a - b) <= 1e-8 * abs(b)


# -- identities ---------------------------------------------------------------------

@st.composite
def rational_fields(draw):
    """Rational fields with separated zeros and poles of small order."""
    pts = draw(st.lists(st.tuples(st.integers(-3, 3), st.integers(-3, 3)), min_size=1, max_size=4, unique=True))
    orders = draw(st.lists(st.integers(-2, 3).filter(bool), min_size=len(pts), max_size=len(pts)))
    num = [complex(a, b) / 2 for (a, b), k in zip(pts, orders) for _ in range(max(k, 0))]
    den = [complex(a, b) / 2 for (a, b), k in zip(pts, orders) for _ in range(max(-k, 0))]
    lead = draw(st.sampled_from([1.0, -2.0, 0.5j]))
    return RationalFunction(Polynomial.from_roots(num) * lead, Polynomial.from_roots(den)), num + den


def cancellation(psi, f, z):
    """Sum of |terms| of the expansion of Psi' over |Psi'|, which bounds rounding amplification."""
    total = abs(psi.polynomial_part.derivative()(z))
    total += sum(abs(lam / (z - b)) for b, lam in psi.log_terms)
    for b, coeffs in psi.principal_terms:
        total += sum(abs(k * c / (z - b) ** (k + 1)) for k, c in enumerate(coeffs, 1))
    return max(1.0, total * abs(f(z)))


@settings(max_examples=40, deadline=None)
@given(rational_fields(), st.integers(0, 2**32 - 1))
def test_flow_box_identity(field_and_sing, seed):
    f, sing = field_and_sing
    spec = FieldSpec.from_rational(f, 0.13 + 0.27j)
    rng = np.random.default_rng(seed)
    for z in random_points(rng, 20, avoid=sing, margin=0.1):
        d = spec.closed_psi.derivative(z)
        assert abs(d * f(z) - 1) < 1e-8 * cancellation(spec.closed_psi, f, z)


@settings(max_examples=40, deadline=None)
@given(rational_fields(), st.integers(0, 2**32 - 1))
def test_newton_identity_and_route_consistency(field_and_sing, seed):
    f, sing = field_and_sing
    spec = FieldSpec.from_rational(f, 0.13 + 0.27j)
    pf = newton_map_product_form(spec.closed_psi)
    phi_spec = field_from_phi(pf.expr)
    rng = np.random.default_rng(seed)
    for z in random_points(rng, 20, avoid=sing, margin=0.1):
        fz = f(z)
        psi = spec.psi(z)
        phi = spec.phi(z)
        # the Phi route needs Phi itself to be representable in float64
        assume(abs(fz) < 1e6 and not is_infinite(phi) and 1e-250 < abs(phi) < 1e250)
        assert abs(phi_spec.f(z) - fz) <= 1e-8 * abs(fz) * cancellation(spec.closed_psi, f, z)
        assert abs(wrapped(cmath.phase(phi) - spec.rho(z))) < 1e-9
        assert abs(-math.log(abs(phi)) - psi.real) < 1e-9 * max(1, abs(psi.real))


@pytest.mark.parametrize("s", [2, 3, 4])
def test_zero_of_order_s_gives_psi_pole_of_order_s_minus_1(s):
    psi = build_psi(rational(f"z^{s}"), 1.0)
    (b, coeffs), = psi.principal_terms
    assert abs(b) < 1e-12 and len(coeffs) == s - 1


@pytest.mark.parametrize("kappa", [1, 2, 3])
def test_pole_of_order_kappa_gives_psi_zero_of_order_kappa_plus_1(kappa):
    psi = build_psi(rational(f"1/z^{kappa}"), 0)
    c = psi.polynomial_part.coeffs
    assert np.all(np.abs(c[: kappa + 1]) < 1e-15) and abs(c[kappa + 1]) > 0
    assert abs(psi.constant) < 1e-15
