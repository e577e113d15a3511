"""Weierstrass elliptic functions and elliptic Newton maps.

A :class:`Lattice` is given by two generators (full periods).  Evaluation sums
the lattice one row at a time: each row ``{z + n*w2 + m*w1 : m in Z}`` has a
closed form in ``sin``/``cot`` of ``pi*z/w1``, and the row contributions decay
like ``exp(-2*pi*n*Im(w2/w1))``.  Arguments are first reduced into the cell
around the origin so that the number of rows stays small.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from . import kernels
from .expr import POINT_AT_INFINITY

__all__ = [
    "Lattice",
    "EllipticPrincipalPart",
    "EllipticNewtonMap",
    "NotEllipticError",
    "elliptic_phi",
    "fit_constant",
    "wp_zeros",
    "wp_newton_parts",
]

TAIL = 1e-17
# keep |Im| of sine arguments below this so that sin**3 stays finite
_MAX_IM = 230.0


class NotEllipticError(ValueError):
    pass


def _gauss_reduce(w1: complex, w2: complex) -> tuple[complex, complex]:
    """Basis of the same lattice with ``tau = w2/w1`` in the fundamental domain."""
    for _ in range(200):
        if abs(w2) < abs(w1):
            w1, w2 = w2, w1
        k = round((w2 / w1).real)
        if k == 0:
            break
        w2 = w2 - k * w1
    if (w2 / w1).imag < 0:
        w2 = -w2
    return w1, w2


def _sigma_divisor(n: int, p: int) -> int:
    return sum(d**p for d in range(1, n + 1) if n % d == 0)


def _scalarize(fn):
    """Let an array method accept and return Python scalars too."""

    def wrapper(self, z, *args):
        if np.ndim(z) == 0:
            w = complex(fn(self, np.array([z], dtype=np.complex128), *args)[0])
            return w if cmath.isfinite(w) else POINT_AT_INFINITY
        return fn(self, np.asarray(z, dtype=np.complex128), *args)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@dataclass(frozen=True, eq=False)
class Lattice:
    """Period lattice ``{m*g1 + n*g2gen}``.

    The generator order is fixed so that ``Im(g2gen/g1) > 0`` (``g2gen`` is
    negated otherwise).  ``eta1``/``eta2`` are the increments of zeta along
    ``g1``/``g2gen``; ``g2``/``g3`` are the usual invariants.
    """

    g1: complex
    g2gen: complex
    g2: complex = field(init=False)
    g3: complex = field(init=False)
    eta1: complex = field(init=False)
    eta2: complex = field(init=False)

    def __post_init__(self):
        g1, g2gen = complex(self.g1), complex(self.g2gen)
        if g1 == 0 or g2gen == 0 or abs((g2gen / g1).imag) < 1e-12 * abs(g2gen / g1):
            raise ValueError("lattice generators must be non-zero and R-independent")
        if (g2gen / g1).imag < 0:
            g2gen = -g2gen
        set_ = lambda k, v: object.__setattr__(self, k, v)
        set_("g1", g1)
        set_("g2gen", g2gen)

        w1, w2 = _gauss_reduce(g1, g2gen)
        tau = w2 / w1
        u = math.pi / w1
        im_tau = tau.imag
        need = math.ceil(-math.log(TAIL) / (2 * math.pi * im_tau) + 0.5) + 1
        cap = int(_MAX_IM / (math.pi * im_tau) - 0.5)
        nrows = max(0, min(need, cap))
        n = np.arange(1, nrows + 1)
        with np.errstate(all="ignore"):
            row_sin2 = np.sin(u * n * w2) ** 2
        S = 2 * complex(np.sum(1.0 / row_sin2)) if nrows else 0j
        A = u * u * (1.0 / 3.0 + S)
        set_("_w1", w1)
        set_("_w2", w2)
        set_("_u", u)
        set_("_tau", tau)
        set_("_nrows", nrows)
        set_("_row_sin2", row_sin2)
        set_("_wp_shift", -u * u / 3.0 - u * u * S)
        set_("_quad", A)

        # invariants from Eisenstein series in q = exp(2 pi i tau)
        q = cmath.exp(2j * math.pi * tau)
        e4 = e6 = 1.0 + 0j
        for k in range(1, 200):
            qk = q**k
            if abs(qk) * k**5 < 1e-20:
                break
            e4 += 240 * _sigma_divisor(k, 3) * qk
            e6 -= 504 * _sigma_divisor(k, 5) * qk
        set_("g2", 4 * math.pi**4 / 3 * e4 / w1**4)
        set_("g3", 8 * math.pi**6 / 27 * e6 / w1**6)

        # quasi-periods: eta(w1) in closed form, eta(w2) = 2*zeta(w2/2) evaluated
        eta_w1 = A * w1
        eta_w2 = 2 * complex(kernels.wzeta_sum(np.array([w2 / 2]), u, w2, nrows, A)[0])
        set_("_eta_w1", eta_w1)
        set_("_eta_w2", eta_w2)
        # express the user generators in the reduced basis (integer coordinates)
        a, b = self._coords(np.array([g1]))
        c, d = self._coords(np.array([g2gen]))
        m1, n1, m2, n2 = (int(round(float(v[0]))) for v in (a, b, c, d))
        set_("eta1", m1 * eta_w1 + n1 * eta_w2)
        set_("eta2", m2 * eta_w1 + n2 * eta_w2)

    def __repr__(self):
        return f"Lattice(g1={self.g1!r}, g2gen={self.g2gen!r})"

    # -- geometry ----------------------------------------------------------

    def _coords(self, z: np.ndarray):
        """Real coordinates ``(x, y)`` with ``z = x*w1 + y*w2``."""
        t = z / self._w1
        y = t.imag / self._tau.imag
        x = t.real - y * self._tau.real
        return x, y

    def _reduce(self, z: np.ndarray):
        """``z = zr + m*w1 + n*w2`` with ``zr`` in the cell around 0."""
        x, y = self._coords(z)
        with np.errstate(invalid="ignore"):
            m = np.nan_to_num(np.round(x))
            n = np.nan_to_num(np.round(y))
        zr = z - m * self._w1 - n * self._w2
        return zr, m, n

    def reduce(self, z):
        """Representative of ``z`` in the cell spanned by the generators around 0."""
        zr, _, _ = self._reduce(np.atleast_1d(np.asarray(z, dtype=np.complex128)))
        return complex(zr[0]) if np.ndim(z) == 0 else zr.reshape(np.shape(z))

    @property
    def half_periods(self) -> tuple[complex, complex, complex]:
        return (self.g1 / 2, self.g2gen / 2, (self.g1 + self.g2gen) / 2)

    def is_lattice_point(self, z, tol: float = 1e-12) -> bool:
        zr = self.reduce(complex(z))
        return abs(zr) <= tol * max(abs(self.g1), 1.0)

    # -- Weierstrass functions ---------------------------------------------

    @_scalarize
    def wp(self, z):
        """Weierstrass p-function."""
        zr, _, _ = self._reduce(z)
        return kernels.wp_sum(zr, self._u, self._w2, self._nrows, self._wp_shift)

    @_scalarize
    def wp_prime(self, z):
        """Derivative of the p-function."""
        zr, _, _ = self._reduce(z)
        return kernels.wp_prime_sum(zr, self._u, self._w2, self._nrows)

    @_scalarize
    def wzeta(self, z):
        """Weierstrass zeta: odd, with zeta' = -wp and zeta ~ 1/z at 0."""
        zr, m, n = self._reduce(z)
        base = kernels.wzeta_sum(zr, self._u, self._w2, self._nrows, self._quad)
        return base + m * self._eta_w1 + n * self._eta_w2

    @_scalarize
    def wsigma(self, z):
        """Weierstrass sigma: entire, zeros exactly on the lattice."""
        zr, m, n = self._reduce(z)
        base = kernels.wsigma_prod(zr, self._u, self._row_sin2, self._quad)
        w = m * self._w1 + n * self._w2
        eta = m * self._eta_w1 + n * self._eta_w2
        sign = np.where((m + n + m * n) % 2 == 0, 1.0, -1.0)
        with np.errstate(all="ignore"):
            return base * sign * np.exp(eta * (zr + w / 2))

    @cached_property
    def _wp_derivative_polys(self) -> list[tuple[np.ndarray, np.ndarray]]:
        # wp^(k) = A_k(wp) + wp' * B_k(wp)
        polys = [(np.array([0.0, 1.0]), np.array([0.0])), (np.array([0.0]), np.array([1.0]))]
        return polys

    def _wp_poly(self, k: int):
        polys = self._wp_derivative_polys
        second = np.array([-self.g2 / 2, 0, 6])
        cube = np.array([-self.g3, -self.g2, 0, 4])
        while len(polys) <= k:
            a, b = polys[-1]
            new_a = P.polyadd(P.polymul(second, b), P.polymul(cube, P.polyder(b)))
            new_b = P.polyder(a)
            polys.append((new_a, new_b))
        return polys[k]

    def wp_derivative(self, z, k: int):
        """``k``-th derivative of wp, through polynomials in wp and wp'."""
        if k < 0:
            raise ValueError("derivative order must be >= 0")
        if k == 0:
            return self.wp(z)
        if k == 1:
            return self.wp_prime(z)
        a, b = self._wp_poly(k)
        p = self.wp(z)
        dp = self.wp_prime(z)
        with np.errstate(all="ignore"):
            w = P.polyval(p, a) + dp * P.polyval(p, b)
        if np.ndim(w) == 0:
            w = complex(w)
            return w if cmath.isfinite(w) else POINT_AT_INFINITY
        return w

    def wzeta_derivative(self, z, k: int):
        """``k``-th derivative of zeta (``zeta^(k) = -wp^(k-1)`` for k >= 1)."""
        if k == 0:
            return self.wzeta(z)
        w = self.wp_derivative(z, k - 1)
        if np.ndim(w) == 0 and w == POINT_AT_INFINITY:
            return w
        return -w


# ----------------------------------------------------------------------------
# elliptic Newton maps
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class EllipticPrincipalPart:
    """``sum_j A[j-1] / (z - pole)**j`` at one pole in the cell."""

    pole: complex
    coefficients: tuple[complex, ...]

    def __post_init__(self):
        coeffs = tuple(complex(c) for c in self.coefficients)
        if not coeffs or coeffs[-1] == 0:
            raise ValueError("leading principal-part coefficient must be non-zero")
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "pole", complex(self.pole))


@dataclass(frozen=True)
class EllipticNewtonMap:
    """``Phi`` built from sigma and zeta, with log-derivative ``g = -Phi'/Phi``.

    ``g`` is the elliptic function whose principal parts were supplied and the
    vector field is ``f = -Phi/Phi' = 1/g``.
    """

    lattice: Lattice
    parts: tuple[EllipticPrincipalPart, ...]
    C: complex = 0j
    Cp: complex = 1 + 0j

    def _call(self, fn, z):
        if np.ndim(z) == 0:
            w = complex(fn(np.array([z], dtype=np.complex128))[0])
            return w if cmath.isfinite(w) else POINT_AT_INFINITY
        return fn(np.asarray(z, dtype=np.complex128))

    def _phi(self, z):
        L = self.lattice
        with np.errstate(all="ignore"):
            out = self.Cp * np.exp(-self.C * z)
            for part in self.parts:
                w = z - part.pole
                A = part.coefficients
                out = out * L.wsigma(w) ** (-A[0])
                expo = np.zeros_like(z)
                for j in range(2, len(A) + 1):
                    expo = expo + (-1) ** j * A[j - 1] / math.factorial(j - 1) * L.wzeta_derivative(w, j - 2)
                out = out * np.exp(expo)
        return out

    def _g(self, z):
        L = self.lattice
        with np.errstate(all="ignore"):
            out = np.full(z.shape, self.C, dtype=np.complex128)
            for part in self.parts:
                w = z - part.pole
                A = part.coefficients
                out = out + A[0] * L.wzeta(w)
                for j in range(2, len(A) + 1):
                    out = out - (-1) ** j * A[j - 1] / math.factorial(j - 1) * L.wzeta_derivative(w, j - 1)
        return out

    def phi(self, z):
        return self._call(self._phi, z)

    def g(self, z):
        """``-Phi'/Phi``: the elliptic function with the given principal parts."""
        return self._call(self._g, z)

    def f(self, z):
        """Vector-field coefficient ``-Phi/Phi'``."""

        def field_(zz):
            with np.errstate(all="ignore"):
                return 1.0 / self._g(zz)

        return self._call(field_, z)

    __call__ = phi


def _check_parts(parts) -> tuple[EllipticPrincipalPart, ...]:
    parts = tuple(p if isinstance(p, EllipticPrincipalPart) else EllipticPrincipalPart(*p) for p in parts)
    total = sum(p.coefficients[0] for p in parts)
    scale = max([abs(c) for p in parts for c in p.coefficients], default=1.0)
    if abs(total) > 1e-9 * max(scale, 1.0):
        raise NotEllipticError(f"not an elliptic principal-part system (residue sum {total})")
    return parts


def elliptic_phi(L: Lattice, parts: Sequence[EllipticPrincipalPart], C: complex = 0, Cp: complex = 1) -> EllipticNewtonMap:
    """Newton map ``Phi`` whose log-derivative has the given principal parts."""
    return EllipticNewtonMap(L, _check_parts(parts), complex(C), complex(Cp))


def fit_constant(L: Lattice, parts, g_target: Callable[[complex], complex], z_sample: complex) -> complex:
    """Constant ``C`` making ``-Phi'/Phi`` agree with ``g_target`` at ``z_sample``.

    Two elliptic functions with equal principal parts differ by a constant, so
    one sample point fixes it.
    """
    bare = elliptic_phi(L, parts, 0, 1)
    return complex(g_target(z_sample) - bare.g(z_sample))


def wp_zeros(L: Lattice, tol: float = 1e-13) -> list[tuple[complex, int]]:
    """Zeros of wp in the cell around 0, with multiplicity (two counted)."""
    for h in L.half_periods:
        if abs(L.wp(h)) <= 1e-10 * max(1.0, abs(L.g2) ** 0.5):
            return [(L.reduce(h), 2)]
    seeds = [a * L.g1 + b * L.g2gen for a in (0.15, 0.35, -0.25) for b in (0.2, 0.4, -0.3)]
    found: list[complex] = []
    for z in seeds:
        for _ in range(60):
            dp = L.wp_prime(z)
            if dp == POINT_AT_INFINITY or dp == 0:
                break
            step = L.wp(z) / dp
            z = z - step
            if abs(step) < tol * max(1.0, abs(z)):
                break
        if abs(L.wp(z)) > 1e-8 or L.is_lattice_point(z, 1e-6):
            continue
        z = L.reduce(z)
        if all(not L.is_lattice_point(z - w, 1e-8) for w in found):
            found.append(z)
        if len(found) == 2:
            break
    if len(found) != 2:
        raise ArithmeticError("could not locate the zeros of wp")
    return [(z, 1) for z in found]


def wp_newton_parts(L: Lattice) -> list[EllipticPrincipalPart]:
    """Principal parts of ``-wp'/wp``, the log-derivative for ``Phi = wp``."""
    parts = [EllipticPrincipalPart(0j, (2.0,))]
    for z, m in wp_zeros(L):
        parts.append(EllipticPrincipalPart(z, (-float(m),)))
    return parts
