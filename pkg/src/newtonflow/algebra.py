"""Complex polynomials, rational functions and partial fractions.

Coefficients are floating complex numbers stored in ascending degree.  Roots
come from an Aberth-Ehrlich simultaneous iteration; clusters of approximate
roots are merged into multiple roots.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .expr import POINT_AT_INFINITY, ExprNode

__all__ = [
    "Polynomial",
    "RationalFunction",
    "PoleTerm",
    "PartialFractions",
    "PointType",
    "RootFindingError",
    "NotRationalError",
    "poly_divmod",
    "poly_roots",
    "partial_fractions",
    "classify_point",
    "rational_from_expr",
]

# a cluster must sit well inside its gap to the next root estimate
GAP_RATIO = 0.2
CLUSTER_RADIUS = 1e-7
# allowed ratio of cluster spread to its rounding radius
NOISE_FACTOR = 3.0


class RootFindingError(ArithmeticError):
    pass


class NotRationalError(ValueError):
    pass


class Polynomial:
    """Immutable polynomial with complex coefficients, lowest degree first."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs=()):
        c = np.array(coeffs, dtype=np.complex128).ravel()
        nz = np.nonzero(c)[0]
        c = c[: nz[-1] + 1] if nz.size else c[:0]
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __setattr__(self, name, value):
        raise AttributeError("Polynomial is immutable")

    @classmethod
    def from_roots(cls, roots, lead=1.0):
        c = np.array([lead], dtype=np.complex128)
        for r in roots:
            c = np.concatenate([[0], c]) - r * np.concatenate([c, [0]])
        return cls(c)

    @property
    def degree(self) -> int:
        """Degree; -1 for the zero polynomial."""
        return len(self.coeffs) - 1

    @property
    def lead(self) -> complex:
        return complex(self.coeffs[-1]) if len(self.coeffs) else 0j

    def is_zero(self) -> bool:
        return len(self.coeffs) == 0

    def __call__(self, z):
        if np.ndim(z) == 0:
            acc = 0j
            for c in self.coeffs[::-1]:
                acc = acc * z + complex(c)
            return acc
        z = np.asarray(z, dtype=np.complex128)
        acc = np.zeros_like(z)
        for c in self.coeffs[::-1]:
            acc = acc * z + c
        return acc

    def _coerce(self, other):
        if isinstance(other, Polynomial):
            return other
        return Polynomial([other])

    def __add__(self, other):
        other = self._coerce(other)
        n = max(len(self.coeffs), len(other.coeffs))
        a = np.zeros(n, complex)
        a[: len(self.coeffs)] += self.coeffs
        a[: len(other.coeffs)] += other.coeffs
        return Polynomial(a)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(-self.coeffs)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        if self.is_zero() or other.is_zero():
            return Polynomial()
        return Polynomial(np.convolve(self.coeffs, other.coeffs))

    __rmul__ = __mul__

    def __pow__(self, n: int):
        out = Polynomial([1])
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(self.coeffs.tobytes())

    def __repr__(self):
        return f"Polynomial({[complex(c) for c in self.coeffs]})"

    def derivative(self, order: int = 1) -> "Polynomial":
        c = self.coeffs
        for _ in range(order):
            c = c[1:] * np.arange(1, len(c))
        return Polynomial(c)

    def antiderivative(self) -> "Polynomial":
        """Antiderivative vanishing at 0."""
        if self.is_zero():
            return Polynomial()
        return Polynomial(np.concatenate([[0], self.coeffs / np.arange(1, len(self.coeffs) + 1)]))

    def scale(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if len(self.coeffs) else 0.0

    def allclose(self, other: "Polynomial", tol: float = 1e-12) -> bool:
        n = max(len(self.coeffs), len(other.coeffs))
        a = np.zeros(n, complex)
        b = np.zeros(n, complex)
        a[: len(self.coeffs)] = self.coeffs
        b[: len(other.coeffs)] = other.coeffs
        scale = max(1.0, np.max(np.abs(a), initial=0), np.max(np.abs(b), initial=0))
        return bool(np.all(np.abs(a - b) <= tol * scale))


def poly_divmod(a: Polynomial, b: Polynomial) -> tuple[Polynomial, Polynomial]:
    """Euclidean division ``a = q*b + r`` with ``deg r < deg b``."""
    if b.is_zero():
        raise ZeroDivisionError("polynomial division by zero")
    if a.degree < b.degree:
        return Polynomial(), a
    num = a.coeffs.astype(complex).copy()
    nb = b.degree
    q = np.zeros(a.degree - nb + 1, complex)
    lead = b.coeffs[-1]
    for k in range(len(q) - 1, -1, -1):
        q[k] = num[k + nb] / lead
        num[k : k + nb + 1] -= q[k] * b.coeffs
    r = num[:nb]
    # cancellation leaves rounding noise in what should be exact zeros
    tiny = 1e-14 * max(1.0, float(np.max(np.abs(a.coeffs))))
    r = np.where(np.abs(r) <= tiny, 0, r)
    return Polynomial(q), Polynomial(r)


# ----------------------------------------------------------------------------
# roots
# ----------------------------------------------------------------------------

def _aberth(c: np.ndarray, max_iter: int, rng) -> np.ndarray:
    """Simultaneous Aberth-Ehrlich iteration for the monic ascending ``c``."""
    n = len(c) - 1
    p = Polynomial(c)
    dp = p.derivative()
    radius = max(abs(c[0]) ** (1.0 / n), 1e-3)
    angles = 2 * np.pi * np.arange(n) / n + 0.4 + rng.uniform(-0.1, 0.1, n)
    z = radius * np.exp(1j * angles) * (1 + rng.uniform(-0.05, 0.05, n))
    absc = Polynomial(np.abs(c))
    done = np.zeros(n, bool)
    for _ in range(max_iter):
        for i in range(n):
            if done[i]:
                continue
            pz = p(z[i])
            # inside the rounding noise of p: no further progress possible
            if abs(pz) <= 4 * n * 2.2e-16 * absc(abs(z[i])).real:
                done[i] = True
                continue
            ratio = pz / dp(z[i]) if dp(z[i]) != 0 else pz
            diff = z[i] - np.delete(z, i)
            with np.errstate(divide="ignore", invalid="ignore"):
                s = np.sum(1.0 / diff)
            denom = 1 - ratio * s
            w = ratio / denom if denom != 0 and cmath.isfinite(s) else ratio
            z[i] -= w
            if abs(w) <= 1e-15 * abs(z[i]):
                done[i] = True
        if done.all():
            break
    return z


def _residual_ok(p: Polynomial, r: complex, tol: float = 1e-9) -> bool:
    scale = float(np.sum(np.abs(p.coeffs) * abs(r) ** np.arange(len(p.coeffs))))
    return abs(p(r)) <= tol * max(scale, 1e-300)


def _cluster_centre(derivs, pts, m):
    """Centroid of ``pts`` refined as a simple root of the (m-1)-th derivative."""
    centre = complex(np.mean(pts))
    d_lo, d_hi = derivs[m - 1], derivs[m]
    for _ in range(30):
        den = d_hi(centre)
        if den == 0:
            return None
        step = d_lo(centre) / den
        centre -= step
        if abs(step) <= 1e-16 * abs(centre):
            break
    return centre if cmath.isfinite(centre) else None


def _noise_radius(derivs, c, m):
    """Spread of an m-fold root at ``c`` explained by rounding in evaluating the polynomial."""
    q = derivs[0]
    n = len(q.coeffs) - 1
    noise = 4 * n * 2.2e-16 * float(np.sum(np.abs(q.coeffs) * abs(c) ** np.arange(n + 1)))
    dm = abs(derivs[m](c))
    return (math.factorial(m) * noise / dm) ** (1.0 / m) if dm > 0 else np.inf


def poly_roots(p: Polynomial, max_iter: int = 2000, seed: int = 20240601) -> list[tuple[complex, int]]:
    """Roots of ``p`` with multiplicities, sorted by (real, imag).

    A group of m approximate roots is merged into one m-fold root when it is
    isolated from the other estimates and its spread is what rounding error
    can produce around an m-fold root. The merged root is the group centroid
    refined as a simple root of the (m-1)-th derivative.
    """
    if p.degree < 1:
        raise ValueError("poly_roots needs degree >= 1")
    c = p.coeffs / p.lead
    # exact zero roots
    k0 = int(np.argmax(np.abs(c) > 0))
    roots: list[tuple[complex, int]] = [(0j, k0)] if k0 else []
    c = c[k0:]
    n = len(c) - 1
    if n == 0:
        return roots
    if n == 1:
        return sorted(roots + [(complex(-c[0]), 1)], key=_root_key)

    rng = np.random.default_rng(seed)
    q = Polynomial(c)
    z = _aberth(c, max_iter, rng)
    if not np.all(np.isfinite(z)):
        raise RootFindingError(f"root iteration diverged for {p!r}")

    derivs = [q] + [q.derivative(k) for k in range(1, n + 1)]
    assigned = np.zeros(n, bool)
    for i in range(n):
        if assigned[i]:
            continue
        cand = [j for j in np.argsort(np.abs(z - z[i]), kind="stable") if not assigned[j]]
        group, centre = [i], complex(z[i])
        # largest admissible multiplicity first
        for m in range(len(cand), 1, -1):
            c = _cluster_centre(derivs, z[cand[:m]], m)
            if c is None:
                continue
            spread = float(np.max(np.abs(z[cand[:m]] - c)))
            gap = abs(z[cand[m]] - c) if m < len(cand) else np.inf
            if (
                spread <= GAP_RATIO * gap
                and spread <= NOISE_FACTOR * _noise_radius(derivs, c, m)
                and _residual_ok(q, c)
            ):
                group, centre = cand[:m], c
                break
        assigned[group] = True
        m = len(group)
        roots.append((centre if m > 1 else _polish(q, centre), m))

    for r, _ in roots:
        if not _residual_ok(p, r):
            raise RootFindingError(f"root finding did not converge for {p!r}")
    return sorted(roots, key=_root_key)


def _polish(p: Polynomial, r: complex, steps: int = 3) -> complex:
    dp = p.derivative()
    best, best_val = r, abs(p(r))
    for _ in range(steps):
        d = dp(r)
        if d == 0:
            break
        r = r - p(r) / d
        v = abs(p(r))
        if v < best_val:
            best, best_val = r, v
    return best


def _root_key(rm):
    r = rm[0]
    return (round(r.real, 9), round(r.imag, 9))


# ----------------------------------------------------------------------------
# rational functions
# ----------------------------------------------------------------------------

def _match_common(ra, rb):
    """Pair up roots of two lists within the clustering radius."""
    common = []
    ra = [list(x) for x in ra]
    rb = [list(x) for x in rb]
    for a in ra:
        for b in rb:
            if a[1] and b[1] and abs(a[0] - b[0]) <= CLUSTER_RADIUS * (1 + abs(a[0])):
                k = min(a[1], b[1])
                common.append((a[0], k))
                a[1] -= k
                b[1] -= k
    return common, ra, rb


def _expand(roots):
    return [r for r, m in roots for _ in range(m)]


class RationalFunction:
    """``numerator / denominator`` in lowest terms with a monic denominator."""

    __slots__ = ("numerator", "denominator", "__dict__")

    def __init__(self, numerator, denominator=None):
        num = numerator if isinstance(numerator, Polynomial) else Polynomial(np.atleast_1d(numerator))
        if denominator is None:
            den = Polynomial([1])
        else:
            den = denominator if isinstance(denominator, Polynomial) else Polynomial(np.atleast_1d(denominator))
        if den.is_zero():
            raise ZeroDivisionError("denominator is identically zero")
        if not num.is_zero() and num.degree >= 1 and den.degree >= 1:
            rn, rd = poly_roots(num), poly_roots(den)
            common, rn_left, rd_left = _match_common(rn, rd)
            if common:
                num = Polynomial.from_roots(_expand(rn_left), num.lead)
                den = Polynomial.from_roots(_expand(rd_left), den.lead)
        lead = den.lead
        object.__setattr__(self, "numerator", Polynomial(num.coeffs / lead))
        object.__setattr__(self, "denominator", Polynomial(den.coeffs / lead))

    def __setattr__(self, name, value):
        if name in ("numerator", "denominator"):
            raise AttributeError("RationalFunction is immutable")
        object.__setattr__(self, name, value)

    def __repr__(self):
        return f"RationalFunction({self.numerator!r}, {self.denominator!r})"

    @cached_property
    def zeros(self) -> list[tuple[complex, int]]:
        return poly_roots(self.numerator) if self.numerator.degree >= 1 else []

    @cached_property
    def poles(self) -> list[tuple[complex, int]]:
        return poly_roots(self.denominator) if self.denominator.degree >= 1 else []

    def reciprocal(self) -> "RationalFunction":
        return RationalFunction(self.denominator, self.numerator)

    def __call__(self, z):
        if np.ndim(z) == 0:
            d = self.denominator(z)
            if d == 0:
                return POINT_AT_INFINITY
            w = self.numerator(z) / d
            return w if cmath.isfinite(w) else POINT_AT_INFINITY
        with np.errstate(all="ignore"):
            w = self.numerator(z) / self.denominator(z)
        w[~np.isfinite(w)] = POINT_AT_INFINITY
        return w


@dataclass(frozen=True)
class PoleTerm:
    """``sum_k coefficients[k-1] * (z - pole)**(-k)``."""

    pole: complex
    coefficients: tuple[complex, ...]

    def __call__(self, z):
        w = 1.0 / (z - self.pole)
        acc = 0
        for c in reversed(self.coefficients):
            acc = (acc + c) * w
        return acc


@dataclass(frozen=True)
class PartialFractions:
    polynomial_part: Polynomial
    terms: tuple[PoleTerm, ...]

    def __call__(self, z):
        with np.errstate(all="ignore"):
            out = self.polynomial_part(z)
            for t in self.terms:
                out = out + t(z)
        return out

    def residues(self) -> list[complex]:
        return [t.coefficients[0] for t in self.terms]


def partial_fractions(r: RationalFunction) -> PartialFractions:
    """Euclid quotient plus principal parts at every pole of ``r``.

    Coefficients come from one linear solve obtained by clearing denominators.
    """
    quotient, rem = poly_divmod(r.numerator, r.denominator)
    n = r.denominator.degree
    if n < 1 or rem.is_zero():
        return PartialFractions(quotient, ())
    poles = r.poles
    columns, index = [], []
    for j, (b, m) in enumerate(poles):
        others = [(bb, mm) for jj, (bb, mm) in enumerate(poles) if jj != j]
        for k in range(1, m + 1):
            basis = Polynomial.from_roots(_expand(others) + [b] * (m - k))
            col = np.zeros(n, complex)
            col[: len(basis.coeffs)] = basis.coeffs
            columns.append(col)
            index.append((j, k))
    M = np.array(columns).T
    rhs = np.zeros(n, complex)
    rhs[: len(rem.coeffs)] = rem.coeffs
    sol = np.linalg.solve(M, rhs)
    coeffs: dict[int, list[complex]] = {}
    for (j, k), a in zip(index, sol):
        coeffs.setdefault(j, [0j] * poles[j][1])[k - 1] = complex(a)
    terms = tuple(PoleTerm(poles[j][0], tuple(coeffs[j])) for j in range(len(poles)))
    return PartialFractions(quotient, terms)


@dataclass(frozen=True)
class PointType:
    kind: str  # "regular" | "zero" | "pole"
    order: int = 0

    def __str__(self):
        return self.kind if self.kind == "regular" else f"{self.kind}({self.order})"


def _from_order(k: int) -> PointType:
    if k > 0:
        return PointType("zero", k)
    if k < 0:
        return PointType("pole", -k)
    return PointType("regular", 0)


def _multiplicity(roots, z0) -> int:
    return sum(m for r, m in roots if abs(r - z0) <= CLUSTER_RADIUS * (1 + abs(z0)))


def classify_point(f: RationalFunction, z0, mode: str = "function") -> PointType:
    """Zero/pole/regular classification of ``f`` at ``z0`` (``None`` or inf for infinity).

    ``mode="field"`` treats ``f`` as the coefficient of ``f(z) d/dz``; at
    infinity this applies the ``w = 1/z`` pullback, which adds 2 to the order.
    """
    if mode not in ("function", "field"):
        raise ValueError("mode must be 'function' or 'field'")
    if f.numerator.is_zero():
        raise ValueError("identically zero function has no order")
    if z0 is None or (isinstance(z0, (complex, float)) and not cmath.isfinite(z0)):
        k = f.denominator.degree - f.numerator.degree
        if mode == "field":
            k += 2
        return _from_order(k)
    z0 = complex(z0)
    return _from_order(_multiplicity(f.zeros, z0) - _multiplicity(f.poles, z0))


# ----------------------------------------------------------------------------
# expression -> rational function
# ----------------------------------------------------------------------------

def _as_fraction(e: ExprNode):
    k = e.kind
    if k == "const":
        return Polynomial([e.value]), Polynomial([1])
    if k == "z":
        return Polynomial([0, 1]), Polynomial([1])
    if k == "neg":
        n, d = _as_fraction(e.children[0])
        return -n, d
    if k in ("add", "sub", "mul", "div"):
        (an, ad), (bn, bd) = (_as_fraction(c) for c in e.children)
        if k == "add":
            return an * bd + bn * ad, ad * bd
        if k == "sub":
            return an * bd - bn * ad, ad * bd
        if k == "mul":
            return an * bn, ad * bd
        if bn.is_zero():
            raise ZeroDivisionError("division by zero polynomial")
        return an * bd, ad * bn
    if k == "pow":
        p = e.value
        if p.imag != 0 or p.real != int(p.real):
            raise NotRationalError("non-integer power")
        n, d = _as_fraction(e.children[0])
        m = int(p.real)
        return (n**m, d**m) if m >= 0 else (d ** (-m), n ** (-m))
    raise NotRationalError(f"{k} is not a rational operation")


def rational_from_expr(e: ExprNode) -> RationalFunction:
    """Convert a rational expression in z into a :class:`RationalFunction`."""
    num, den = _as_fraction(e)
    return RationalFunction(num, den)
