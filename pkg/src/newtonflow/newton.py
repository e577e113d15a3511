"""Distinguished parameter, Newton map and first integrals of a vector field.

For ``X = f(z) d/dz`` the distinguished parameter ``Psi`` satisfies
``Psi' = 1/f`` and the Newton map is ``Phi = exp(-Psi)``, so that
``f = -Phi/Phi'``.  The first integrals are ``rho = -Im Psi = arg Phi``
(constant on trajectories) and ``theta = Re Psi = -log|Phi|`` (grows at unit
rate along the flow).
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Callable, Optional

import numpy as np

from . import expr as ex
from . import kernels
from .algebra import (
    NotRationalError,
    Polynomial,
    RationalFunction,
    partial_fractions,
    rational_from_expr,
)
from .expr import POINT_AT_INFINITY, ExprNode, evaluate, evaluate_array, is_infinite

__all__ = [
    "ClosedFormPsi",
    "FieldSpec",
    "ProductForm",
    "SingleValuedness",
    "BasePointError",
    "NoPsiError",
    "build_psi",
    "rho",
    "theta",
    "field_from_psi",
    "field_from_phi",
    "perp_field",
    "single_valuedness",
    "newton_map_product_form",
    "psi_for_exp_field",
]

RESIDUE_TOL = 1e-10
INTEGER_TOL = 1e-8


class BasePointError(ValueError):
    pass


class NoPsiError(ValueError):
    """The field has no closed-form distinguished parameter available."""


# ----------------------------------------------------------------------------
# closed-form Psi of a rational field
# ----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ClosedFormPsi:
    """``Psi(z) = P(z) + sum lam*log(z-b) + sum_k c[k]*(z-b)**(-k) + constant``.

    Logarithms use the principal branch.  ``constant`` makes ``Psi(base_point)``
    vanish when a base point was given.
    """

    polynomial_part: Polynomial
    log_terms: tuple[tuple[complex, complex], ...]
    principal_terms: tuple[tuple[complex, tuple[complex, ...]], ...]
    base_point: Optional[complex] = None
    constant: complex = 0j
    _packed: tuple = field(init=False, repr=False)

    def __post_init__(self):
        ptr = [0]
        coef: list[complex] = []
        for _, c in self.principal_terms:
            coef.extend(c)
            ptr.append(len(coef))
        packed = (
            np.asarray(self.polynomial_part.coeffs, dtype=np.complex128),
            np.array([b for b, _ in self.log_terms], dtype=np.complex128),
            np.array([lam for _, lam in self.log_terms], dtype=np.complex128),
            np.array([b for b, _ in self.principal_terms], dtype=np.complex128),
            np.array(ptr, dtype=np.int64),
            np.array(coef, dtype=np.complex128),
        )
        object.__setattr__(self, "_packed", packed)

    def _raw(self, z: complex) -> complex:
        acc = self.polynomial_part(z)
        for b, lam in self.log_terms:
            acc += lam * cmath.log(z - b)
        for b, c in self.principal_terms:
            w = 1.0 / (z - b)
            inner = 0j
            for ck in reversed(c):
                inner = (inner + ck) * w
            acc += inner
        return acc

    def evaluate(self, z) -> complex:
        try:
            w = self._raw(complex(z)) + self.constant
        except (ZeroDivisionError, ValueError, OverflowError):
            return POINT_AT_INFINITY
        return w if cmath.isfinite(w) else POINT_AT_INFINITY

    __call__ = evaluate

    def evaluate_array(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.complex128)
        w = kernels.psi_closed_form(z, *self._packed, self.constant)
        w = np.array(w, dtype=np.complex128).reshape(z.shape)
        w[~np.isfinite(w)] = POINT_AT_INFINITY
        return w

    def derivative(self, z) -> complex:
        """``Psi'(z)`` term by term; equals ``1/f``."""
        z = complex(z)
        try:
            acc = self.polynomial_part.derivative()(z)
            for b, lam in self.log_terms:
                acc += lam / (z - b)
            for b, c in self.principal_terms:
                w = 1.0 / (z - b)
                acc -= sum((k + 1) * ck * w ** (k + 2) for k, ck in enumerate(c))
        except ZeroDivisionError:
            return POINT_AT_INFINITY
        return acc

    def increment(self, z_from, z_to) -> complex:
        """``Psi(z_to) - Psi(z_from)`` along a short segment, free of branch jumps."""
        a, b_ = complex(z_from), complex(z_to)
        try:
            acc = self.polynomial_part(b_) - self.polynomial_part(a)
            for b, lam in self.log_terms:
                acc += lam * cmath.log((b_ - b) / (a - b))
            for b, c in self.principal_terms:
                wa, wb = 1.0 / (a - b), 1.0 / (b_ - b)
                acc += sum(ck * (wb ** (k + 1) - wa ** (k + 1)) for k, ck in enumerate(c))
        except (ZeroDivisionError, ValueError, OverflowError):
            return POINT_AT_INFINITY
        return acc if cmath.isfinite(acc) else POINT_AT_INFINITY

    def phi(self, z) -> complex:
        """Principal-branch ``exp(-Psi)``."""
        w = self.evaluate(z)
        if is_infinite(w):
            return POINT_AT_INFINITY
        try:
            return cmath.exp(-w)
        except OverflowError:
            return POINT_AT_INFINITY

    @property
    def residues(self) -> list[complex]:
        return [lam for _, lam in self.log_terms]


def build_psi(f: RationalFunction, z0: Optional[complex] = None) -> ClosedFormPsi:
    """Integrate ``1/f`` in closed form: Euclid quotient plus partial fractions.

    With ``z0`` given, the result is normalized to ``Psi(z0) = 0``.  ``z0`` may
    be a regular point or a pole of ``f`` but not a zero.
    """
    if f.numerator.is_zero():
        raise ValueError("the zero field has no distinguished parameter")
    if z0 is not None:
        z0 = complex(z0)
        if any(abs(r - z0) <= 1e-9 * (1 + abs(z0)) for r, _ in f.zeros):
            raise BasePointError(f"base point is a zero of the field: {z0}")
    pf = partial_fractions(f.reciprocal())
    scale = max([1.0] + [abs(c) for t in pf.terms for c in t.coefficients])
    log_terms, principal = [], []
    for t in pf.terms:
        lam = t.coefficients[0]
        if abs(lam) > 1e-12 * scale:
            log_terms.append((t.pole, lam))
        higher = t.coefficients[1:]
        if higher:
            # integral of A_k (z-b)^(-k) is A_k/(1-k) (z-b)^(1-k)
            principal.append((t.pole, tuple(a / (1 - (k + 2)) for k, a in enumerate(higher))))
    psi = ClosedFormPsi(pf.polynomial_part.antiderivative(), tuple(log_terms), tuple(principal))
    if z0 is None:
        return psi
    c = -psi.evaluate(z0)
    if is_infinite(c):
        raise BasePointError(f"Psi is infinite at the base point {z0}")
    return ClosedFormPsi(psi.polynomial_part, psi.log_terms, psi.principal_terms, z0, c)


# ----------------------------------------------------------------------------
# expression fields with an exp-type antiderivative
# ----------------------------------------------------------------------------

def _factors(e: ExprNode, sign: int, out: list):
    if e.kind == "mul":
        for c in e.children:
            _factors(c, sign, out)
    elif e.kind == "div":
        _factors(e.children[0], sign, out)
        _factors(e.children[1], -sign, out)
    elif e.kind == "neg":
        out.append((ex.const(-1), 1))
        _factors(e.children[0], sign, out)
    else:
        out.append((e, sign))


def psi_for_exp_field(f: ExprNode, probes: int = 7) -> Optional[ExprNode]:
    """Closed-form ``Psi`` for ``f = c*exp(g)*r`` when ``g'*r`` is constant.

    Then ``1/f = exp(-g)/(c*r)`` integrates to ``-exp(-g)/(c*k)`` with
    ``k = g'*r``.  Returns ``None`` when the pattern does not apply.
    """
    facs: list = []
    _factors(f, 1, facs)
    g = ex.const(0)
    rest = ex.const(1)
    for node, s in facs:
        if node.kind == "exp":
            g = ex.add(g, node.children[0]) if s > 0 else ex.sub(g, node.children[0])
        else:
            rest = ex.mul(rest, node) if s > 0 else ex.div(rest, node)
    if g.kind == "const":
        return None
    try:
        r = rational_from_expr(rest)
        rational_from_expr(g)
    except (NotRationalError, ZeroDivisionError):
        return None
    dg = ex.differentiate(g)
    rng = np.random.default_rng(7)
    pts = rng.uniform(-2, 2, probes) + 1j * rng.uniform(-2, 2, probes)
    vals = [evaluate(dg, p) * r(p) for p in pts]
    if any(is_infinite(v) or not cmath.isfinite(v) for v in vals):
        return None
    k = vals[0]
    if k == 0 or any(abs(v - k) > 1e-10 * abs(k) for v in vals):
        return None
    return ex.div(ex.neg(ex.func("exp", ex.neg(g))), ex.const(k))


# ----------------------------------------------------------------------------
# field specifications
# ----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FieldSpec:
    """A vector field ``f(z) d/dz`` together with whatever of Psi/Phi is known.

    ``form`` is one of ``rational``, ``expression``, ``from_psi``, ``from_phi``
    or ``elliptic``.  ``scale`` multiplies the base field (``i`` for the
    orthogonal field); Psi is divided by it accordingly.
    """

    form: str
    source: object
    f_expr: Optional[ExprNode] = None
    rational: Optional[RationalFunction] = None
    closed_psi: Optional[ClosedFormPsi] = None
    psi_expr: Optional[ExprNode] = None
    phi_expr: Optional[ExprNode] = None
    phi_fn: Optional[Callable] = None
    psi_offset: complex = 0j
    scale: complex = 1 + 0j

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_rational(cls, f: RationalFunction, z0: Optional[complex] = None) -> "FieldSpec":
        return cls("rational", f, rational=f, closed_psi=build_psi(f, z0))

    @classmethod
    def from_expression(cls, f: ExprNode, z0: Optional[complex] = None) -> "FieldSpec":
        """Field given by an expression; rational ones get a closed-form Psi."""
        try:
            r = rational_from_expr(f)
        except NotRationalError:
            r = None
        if r is not None:
            return cls.from_rational(r, z0)
        psi = psi_for_exp_field(f)
        if psi is None:
            raise NoPsiError(
                "no closed-form distinguished parameter for this field; supply --psi or --phi"
            )
        offset = 0j
        if z0 is not None:
            offset = evaluate(psi, z0)
            if is_infinite(offset):
                raise BasePointError(f"Psi is infinite at the base point {z0}")
        return cls("expression", f, f_expr=f, psi_expr=psi, psi_offset=offset)

    @classmethod
    def elliptic_wp(cls, lattice) -> "FieldSpec":
        """The field ``-wp/wp'``, whose Newton map is ``wp`` itself."""
        wp = ex.func("wp", ex.var(), lattice)
        f = ex.neg(ex.div(wp, ex.func("wp_prime", ex.var(), lattice)))
        return cls("elliptic", lattice, f_expr=f, phi_expr=wp)

    @classmethod
    def from_newton_map(cls, nmap) -> "FieldSpec":
        """Field of an :class:`~newtonflow.elliptic.EllipticNewtonMap`."""
        return cls("elliptic", nmap, phi_fn=nmap)

    # -- the field ---------------------------------------------------------

    def f(self, z) -> complex:
        z = complex(z)
        if self.rational is not None:
            w = self.rational(z)
        elif self.f_expr is not None:
            w = evaluate(self.f_expr, z)
        else:
            w = self.phi_fn.f(z)
        if is_infinite(w):
            return POINT_AT_INFINITY
        return self.scale * w

    def f_array(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.complex128)
        if self.rational is not None:
            w = self.rational(z)
        elif self.f_expr is not None:
            w = evaluate_array(self.f_expr, z)
        else:
            w = self.phi_fn.f(z)
        w = np.array(w, dtype=np.complex128)
        bad = ~np.isfinite(w)
        with np.errstate(all="ignore"):
            w = self.scale * w
        w[bad] = POINT_AT_INFINITY
        return w

    @property
    def has_psi(self) -> bool:
        return self.closed_psi is not None or self.psi_expr is not None

    @property
    def has_phi(self) -> bool:
        return self.phi_expr is not None or self.phi_fn is not None

    # -- base objects (before scaling) ---------------------------------------

    def _base_phi(self, z):
        if self.phi_expr is not None:
            return evaluate(self.phi_expr, z)
        return self.phi_fn(z)

    def _base_phi_array(self, z):
        if self.phi_expr is not None:
            return evaluate_array(self.phi_expr, z)
        w = np.array(self.phi_fn(z), dtype=np.complex128)
        w[~np.isfinite(w)] = POINT_AT_INFINITY
        return w

    def _base_psi(self, z):
        if self.closed_psi is not None:
            return self.closed_psi.evaluate(z)
        if self.psi_expr is not None:
            w = evaluate(self.psi_expr, z)
            return w if is_infinite(w) else w - self.psi_offset
        p = self._base_phi(z)
        if is_infinite(p) or p == 0:
            return POINT_AT_INFINITY
        return -cmath.log(p)

    def _base_psi_array(self, z):
        if self.closed_psi is not None:
            return self.closed_psi.evaluate_array(z)
        if self.psi_expr is not None:
            return evaluate_array(self.psi_expr, z) - self.psi_offset
        p = self._base_phi_array(z)
        with np.errstate(all="ignore"):
            w = -np.log(p)
        w[~np.isfinite(p) | (p == 0)] = POINT_AT_INFINITY
        return w

    # -- Psi and Phi ---------------------------------------------------------

    def psi(self, z) -> complex:
        w = self._base_psi(complex(z))
        return w if is_infinite(w) else w / self.scale

    def psi_array(self, z) -> np.ndarray:
        w = self._base_psi_array(np.asarray(z, dtype=np.complex128))
        with np.errstate(all="ignore"):
            return np.where(np.isfinite(w), w / self.scale, w)

    def phi(self, z) -> complex:
        if self.scale == 1 and self.has_phi:
            w = self._base_phi(complex(z))
            return POINT_AT_INFINITY if is_infinite(w) else w
        w = self.psi(z)
        if is_infinite(w):
            return POINT_AT_INFINITY
        try:
            return cmath.exp(-w)
        except OverflowError:
            return POINT_AT_INFINITY

    def increment(self, z_from, z_to) -> complex:
        """``Psi(z_to) - Psi(z_from)`` for nearby points, without branch jumps."""
        if self.closed_psi is not None:
            w = self.closed_psi.increment(z_from, z_to)
        elif self.psi_expr is not None:
            a, b = evaluate(self.psi_expr, z_from), evaluate(self.psi_expr, z_to)
            w = POINT_AT_INFINITY if is_infinite(a) or is_infinite(b) else b - a
        else:
            a, b = self._base_phi(z_from), self._base_phi(z_to)
            if is_infinite(a) or is_infinite(b) or a == 0 or b == 0:
                return POINT_AT_INFINITY
            w = -cmath.log(b / a)
        return w if is_infinite(w) else w / self.scale

    # -- first integrals -----------------------------------------------------

    def _phi_route(self) -> bool:
        return self.scale == 1 and not self.has_psi

    def rho(self, z) -> float:
        """``arg Phi`` (principal) for Phi-only fields, else ``-Im Psi``."""
        if self._phi_route():
            w = self._base_phi(complex(z))
            return math.nan if is_infinite(w) or w == 0 else cmath.phase(w)
        w = self.psi(z)
        return math.nan if is_infinite(w) else -w.imag

    def theta(self, z) -> float:
        if self._phi_route():
            w = self._base_phi(complex(z))
            return math.nan if is_infinite(w) or w == 0 else -math.log(abs(w))
        w = self.psi(z)
        return math.nan if is_infinite(w) else w.real

    def rho_array(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.complex128)
        if self._phi_route():
            w = self._base_phi_array(z)
            out = np.angle(w)
            out[~np.isfinite(w) | (w == 0)] = math.nan
            return out
        w = self.psi_array(z)
        out = -w.imag
        out[~np.isfinite(w)] = math.nan
        return out

    def theta_array(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.complex128)
        if self._phi_route():
            w = self._base_phi_array(z)
            with np.errstate(all="ignore"):
                out = -np.log(np.abs(w))
            out[~np.isfinite(w) | (w == 0)] = math.nan
            return out
        w = self.psi_array(z)
        out = w.real.copy()
        out[~np.isfinite(w)] = math.nan
        return out

    def perp(self) -> "FieldSpec":
        return perp_field(self)


def rho(spec: FieldSpec, z) -> float:
    return spec.rho(z)


def theta(spec: FieldSpec, z) -> float:
    return spec.theta(z)


def field_from_psi(psi: ExprNode) -> FieldSpec:
    """Field ``1/Psi'`` with the given Psi attached."""
    f = ex.div(ex.const(1), ex.differentiate(psi))
    return FieldSpec("from_psi", psi, f_expr=f, psi_expr=psi)


def field_from_phi(phi: ExprNode) -> FieldSpec:
    """Newton field ``-Phi/Phi'`` with the given Phi attached."""
    f = ex.neg(ex.div(phi, ex.differentiate(phi)))
    return FieldSpec("from_phi", phi, f_expr=f, phi_expr=phi)


def perp_field(spec: FieldSpec) -> FieldSpec:
    """Orthogonal field ``i*f``; its Psi is ``-i*Psi``."""
    return FieldSpec(
        spec.form,
        spec.source,
        f_expr=spec.f_expr,
        rational=spec.rational,
        closed_psi=spec.closed_psi,
        psi_expr=spec.psi_expr,
        phi_expr=spec.phi_expr,
        phi_fn=spec.phi_fn,
        psi_offset=spec.psi_offset,
        scale=spec.scale * 1j,
    )


# ----------------------------------------------------------------------------
# single-valuedness and the product form of Phi
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class SingleValuedness:
    psi_single: bool
    phi_single: bool
    common_period: Optional[complex]


def single_valuedness(psi: ClosedFormPsi) -> SingleValuedness:
    """Is Psi (all residues zero) or Phi (residues commensurable) single valued?"""
    lams = [lam for lam in psi.residues if abs(lam) >= RESIDUE_TOL]
    if not lams:
        return SingleValuedness(True, True, None)
    ref = lams[0]
    fracs = []
    for lam in lams:
        r = lam / ref
        fr = Fraction(r.real).limit_denominator(1000)
        if abs(r.imag) > INTEGER_TOL or abs(r.real - float(fr)) > INTEGER_TOL:
            return SingleValuedness(False, False, None)
        fracs.append(fr)
    denom = reduce(math.lcm, (fr.denominator for fr in fracs))
    nums = [int(fr * denom) for fr in fracs]
    g = reduce(math.gcd, (abs(n) for n in nums))
    period = 2j * math.pi * ref * g / denom
    # every 2*pi*i*lambda must be an integer multiple of the period
    for lam in lams:
        k = 2j * math.pi * lam / period
        if abs(k - round(k.real)) > INTEGER_TOL * max(1.0, abs(k)):
            return SingleValuedness(False, False, None)
    return SingleValuedness(False, True, period)


@dataclass(frozen=True)
class ProductForm:
    """``C * exp(P0(z)) * prod (z-b)^A * exp(Pj(1/(z-b)))``."""

    C: complex
    P0: Polynomial
    factors: tuple[tuple[complex, complex, Polynomial], ...]

    @property
    def expr(self) -> ExprNode:
        z = ex.var()
        out = ex.const(self.C)
        p0 = _poly_expr(self.P0, z)
        if p0.kind != "const" or p0.value != 0:
            out = ex.mul(out, ex.func("exp", p0))
        for b, A, Pj in self.factors:
            zb = ex.sub(z, ex.const(b))
            if A != 0:
                out = ex.mul(out, ex.power(zb, A))
            if not Pj.is_zero():
                out = ex.mul(out, ex.func("exp", _poly_expr(Pj, ex.div(ex.const(1), zb))))
        return out

    def __str__(self) -> str:
        return ex.to_text(self.expr)

    def __call__(self, z):
        return evaluate(self.expr, z)


def _poly_expr(p: Polynomial, x: ExprNode) -> ExprNode:
    out = ex.const(0)
    for k, c in enumerate(p.coeffs):
        if c != 0:
            out = ex.add(out, ex.mul(ex.const(complex(c)), ex.power(x, k)))
    return out


def newton_map_product_form(psi: ClosedFormPsi) -> ProductForm:
    """``exp(-Psi)`` written as a product of elementary factors."""
    poles = {b for b, _ in psi.log_terms} | {b for b, _ in psi.principal_terms}
    lam = dict(psi.log_terms)
    pp = dict(psi.principal_terms)
    factors = []
    for b in sorted(poles, key=lambda c: (c.real, c.imag)):
        Pj = Polynomial([0] + [-c for c in pp.get(b, ())])
        factors.append((b, -lam.get(b, 0j), Pj))
    return ProductForm(cmath.exp(-psi.constant), -psi.polynomial_part, tuple(factors))
