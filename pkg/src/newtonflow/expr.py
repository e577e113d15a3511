"""Expression front end: parse, print, differentiate and evaluate functions of z.

The grammar is the usual one for complex arithmetic::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' unary)?          # right associative, constant exponent
    atom   := number | number 'i' | 'i' | 'z' | name '(' expr ')' | '(' expr ')'

Constant subtrees are folded while parsing, so ``(1+2i)`` becomes a single
constant leaf.  Weierstrass nodes (``wp``, ``wp_prime``, ``wzeta``,
``wsigma``) need a lattice passed to :func:`parse`.
"""
from __future__ import annotations

import cmath
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable

import numpy as np

__all__ = [
    "ExprNode",
    "ParseError",
    "POINT_AT_INFINITY",
    "FUNCTIONS",
    "parse",
    "to_text",
    "differentiate",
    "evaluate",
    "evaluate_array",
    "is_infinite",
    "const",
    "var",
]

#: Returned whenever an evaluation hits a pole or overflows.
POINT_AT_INFINITY = complex(math.inf, math.inf)

UNARY_FUNCTIONS = ("exp", "log", "sin", "cos", "tan", "sinh", "cosh")
WEIERSTRASS = ("wp", "wp_prime", "wzeta", "wsigma")
FUNCTIONS = UNARY_FUNCTIONS + WEIERSTRASS
BINARY = ("add", "sub", "mul", "div")
_ARITY = {"const": 0, "z": 0, "neg": 1, "pow": 1, **{k: 2 for k in BINARY},
          **{k: 1 for k in FUNCTIONS}}


def is_infinite(w) -> bool:
    """True for the point-at-infinity sentinel (or any non-finite value)."""
    return not cmath.isfinite(w)


class ParseError(ValueError):
    """Syntax or name error, located by byte offset into the source text."""

    def __init__(self, message: str, byte_offset: int, text: str = ""):
        self.message = message
        self.byte_offset = byte_offset
        self.text = text
        super().__init__(f"{message} (at byte {byte_offset})")


@dataclass(frozen=True)
class ExprNode:
    kind: str
    children: tuple["ExprNode", ...] = ()
    value: complex | None = None  # constant leaves and pow exponents
    lattice: Any = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in _ARITY:
            raise ValueError(f"unknown node kind {self.kind!r}")
        if len(self.children) != _ARITY[self.kind]:
            raise ValueError(f"{self.kind} takes {_ARITY[self.kind]} children")
        if self.kind in ("const", "pow") and self.value is None:
            raise ValueError(f"{self.kind} node needs a constant value")
        if self.kind in WEIERSTRASS and self.lattice is None:
            raise ValueError(f"{self.kind} node needs a lattice")

    @cached_property
    def _scalar(self) -> Callable[[complex], complex]:
        return _compile(self)

    def __call__(self, z):
        return evaluate(self, z)

    def __str__(self) -> str:
        return to_text(self)


def const(c) -> ExprNode:
    return ExprNode("const", value=complex(c))


def var() -> ExprNode:
    return ExprNode("z")


ZERO, ONE = const(0), const(1)


# ----------------------------------------------------------------------------
# smart constructors: constant folding and the trivial identities
# ----------------------------------------------------------------------------

def _is_const(e: ExprNode, v=None) -> bool:
    return e.kind == "const" and (v is None or e.value == v)


def add(a, b):
    if _is_const(a) and _is_const(b):
        return const(a.value + b.value)
    if _is_const(a, 0):
        return b
    if _is_const(b, 0):
        return a
    return ExprNode("add", (a, b))


def sub(a, b):
    if _is_const(a) and _is_const(b):
        return const(a.value - b.value)
    if _is_const(b, 0):
        return a
    if _is_const(a, 0):
        return neg(b)
    return ExprNode("sub", (a, b))


def mul(a, b):
    if _is_const(a) and _is_const(b):
        return const(a.value * b.value)
    if _is_const(a, 0) or _is_const(b, 0):
        return ZERO
    if _is_const(a, 1):
        return b
    if _is_const(b, 1):
        return a
    return ExprNode("mul", (a, b))


def div(a, b):
    if _is_const(b, 0):
        raise ZeroDivisionError("division by constant zero")
    if _is_const(a) and _is_const(b):
        return const(a.value / b.value)
    if _is_const(b, 1):
        return a
    if _is_const(a, 0):
        return ZERO
    return ExprNode("div", (a, b))


def neg(a):
    if _is_const(a):
        return const(-a.value)
    if a.kind == "neg":
        return a.children[0]
    return ExprNode("neg", (a,))


def power(a, p: complex):
    p = complex(p)
    if p == 0:
        return ONE
    if p == 1:
        return a
    if _is_const(a):
        return const(_cpow(a.value, p))
    return ExprNode("pow", (a,), value=p)


def func(name: str, a: ExprNode, lattice=None):
    if name in WEIERSTRASS:
        if lattice is None:
            raise ValueError(f"{name} needs a lattice")
        return ExprNode(name, (a,), lattice=lattice)
    if _is_const(a):
        return const(getattr(cmath, name)(a.value))
    return ExprNode(name, (a,))


def _cpow(base: complex, p: complex) -> complex:
    if p.imag == 0 and p.real == int(p.real) and abs(p.real) < 2**31:
        return base ** int(p.real)
    if base == 0:
        if p.real > 0:
            return 0j
        raise ZeroDivisionError("0 raised to a non-positive power")
    return cmath.exp(p * cmath.log(base))


# ----------------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(?P<imag>i(?![A-Za-z0-9_]))?"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),])"
    r")"
)


class _Parser:
    def __init__(self, text: str, lattice):
        self.text = text
        self.lattice = lattice
        self.tokens = self._tokenize(text)
        self.pos = 0

    def _offset(self, char_index: int) -> int:
        return len(self.text[:char_index].encode("utf-8"))

    def error(self, message: str, char_index: int | None = None):
        if char_index is None:
            char_index = self.tokens[self.pos][2]
        raise ParseError(message, self._offset(char_index), self.text)

    def _tokenize(self, text):
        tokens, i = [], 0
        while i < len(text):
            if text[i].isspace():
                i += 1
                continue
            m = _TOKEN.match(text, i)
            if m is None or m.end() == i:
                raise ParseError(f"unexpected character {text[i]!r}",
                                 len(text[:i].encode("utf-8")), text)
            start = m.start(m.lastgroup) if m.lastgroup else i
            if m.group("num") is not None:
                start = m.start("num")
                v = float(m.group("num"))
                tokens.append(("imag" if m.group("imag") else "num", v, start))
            elif m.group("name") is not None:
                tokens.append(("name", m.group("name"), start))
            else:
                tokens.append(("op", m.group("op"), start))
            i = m.end()
        tokens.append(("end", None, len(text)))
        return tokens

    def peek(self):
        return self.tokens[self.pos]

    def accept(self, op):
        kind, val, _ = self.tokens[self.pos]
        if kind == "op" and val == op:
            self.pos += 1
            return True
        return False

    def expect(self, op):
        if not self.accept(op):
            kind, val, _ = self.peek()
            found = "end of input" if kind == "end" else repr(val)
            self.error(f"expected {op!r}, found {found}")

    def parse(self) -> ExprNode:
        if self.peek()[0] == "end":
            self.error("empty expression")
        e = self.expr()
        if self.peek()[0] != "end":
            self.error(f"unexpected token {self.peek()[1]!r}")
        return e

    def expr(self):
        e = self.term()
        while True:
            if self.accept("+"):
                e = add(e, self.term())
            elif self.accept("-"):
                e = sub(e, self.term())
            else:
                return e

    def term(self):
        e = self.unary()
        while True:
            at = self.peek()[2]
            if self.accept("*"):
                e = mul(e, self.unary())
            elif self.accept("/"):
                rhs = self.unary()
                try:
                    e = div(e, rhs)
                except ZeroDivisionError:
                    self.error("division by zero in constant expression", at)
            else:
                return e

    def unary(self):
        if self.accept("-"):
            return neg(self.unary())
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        at = self.peek()[2]
        if self.accept("^"):
            exponent = self.unary()
            if not _is_const(exponent):
                self.error("exponent must be a constant", at)
            try:
                return power(base, exponent.value)
            except (ZeroDivisionError, OverflowError, ValueError) as exc:
                self.error(f"cannot fold constant power: {exc}", at)
        return base

    def atom(self):
        kind, val, at = self.peek()
        if kind == "num":
            self.pos += 1
            return const(val)
        if kind == "imag":
            self.pos += 1
            return const(complex(0.0, val))
        if kind == "name":
            self.pos += 1
            if val == "z":
                return var()
            if val == "i":
                return const(1j)
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                if val in WEIERSTRASS and self.lattice is None:
                    self.error(f"{val} requires a lattice", at)
                try:
                    return func(val, arg, self.lattice)
                except (ValueError, OverflowError, ZeroDivisionError) as exc:
                    self.error(f"cannot fold {val} of a constant: {exc}", at)
            self.error(f"unknown identifier {val!r}", at)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if kind == "end":
            self.error("unexpected end of input")
        self.error(f"unexpected token {val!r}")


def parse(text: str, lattice=None) -> ExprNode:
    """Parse ``text`` into an expression tree.

    Raises :class:`ParseError` carrying the byte offset of the problem.
    """
    if not isinstance(text, str) or not text.strip():
        raise ParseError("empty expression", 0, text if isinstance(text, str) else "")
    return _Parser(text, lattice).parse()


# ----------------------------------------------------------------------------
# printer
# ----------------------------------------------------------------------------

_INFIX = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


def _const_text(c: complex) -> str:
    if not cmath.isfinite(c):
        raise ValueError("cannot print a non-finite constant")
    re_, im = c.real, c.imag
    if im == 0:
        s = repr(re_)
        return f"({s})" if s.startswith("-") else s
    if re_ == 0:
        return f"({im!r}i)"
    sign = "-" if im < 0 else "+"
    return f"({re_!r}{sign}{abs(im)!r}i)"


def to_text(e: ExprNode) -> str:
    """Render ``e`` in the parser's grammar; ``parse(to_text(e)) == e``."""
    k = e.kind
    if k == "const":
        return _const_text(e.value)
    if k == "z":
        return "z"
    if k in _INFIX:
        a, b = e.children
        return f"({to_text(a)}{_INFIX[k]}{to_text(b)})"
    if k == "neg":
        return f"(-{to_text(e.children[0])})"
    if k == "pow":
        return f"({to_text(e.children[0])})^{_const_text(e.value)}"
    return f"{k}({to_text(e.children[0])})"


# ----------------------------------------------------------------------------
# differentiation
# ----------------------------------------------------------------------------

def differentiate(e: ExprNode) -> ExprNode:
    """Symbolic d/dz with light simplification."""
    k = e.kind
    if k == "const":
        return ZERO
    if k == "z":
        return ONE
    if k in ("add", "sub"):
        a, b = e.children
        op = add if k == "add" else sub
        return op(differentiate(a), differentiate(b))
    if k == "mul":
        a, b = e.children
        return add(mul(differentiate(a), b), mul(a, differentiate(b)))
    if k == "div":
        a, b = e.children
        num = sub(mul(differentiate(a), b), mul(a, differentiate(b)))
        return div(num, power(b, 2))
    if k == "neg":
        return neg(differentiate(e.children[0]))

    a = e.children[0]
    da = differentiate(a)
    if k == "pow":
        p = e.value
        return mul(mul(const(p), power(a, p - 1)), da)
    if k == "exp":
        outer = e
    elif k == "log":
        return div(da, a)
    elif k == "sin":
        outer = func("cos", a)
    elif k == "cos":
        outer = neg(func("sin", a))
    elif k == "tan":
        return div(da, power(func("cos", a), 2))
    elif k == "sinh":
        outer = func("cosh", a)
    elif k == "cosh":
        outer = func("sinh", a)
    elif k == "wp":
        outer = func("wp_prime", a, e.lattice)
    elif k == "wp_prime":
        # wp'' = 6 wp^2 - g2/2
        L = e.lattice
        outer = sub(mul(const(6), power(func("wp", a, L), 2)), const(L.g2 / 2))
    elif k == "wzeta":
        outer = neg(func("wp", a, e.lattice))
    elif k == "wsigma":
        outer = mul(e, func("wzeta", a, e.lattice))
    else:  # pragma: no cover - guarded by ExprNode
        raise ValueError(k)
    return mul(outer, da)


# ----------------------------------------------------------------------------
# scalar evaluation: compiled closures over cmath
# ----------------------------------------------------------------------------

def _compile(e: ExprNode) -> Callable[[complex], complex]:
    k = e.kind
    if k == "const":
        v = e.value
        return lambda z: v
    if k == "z":
        return lambda z: z
    if k in BINARY:
        fa, fb = (c._scalar for c in e.children)
        if k == "add":
            return lambda z: fa(z) + fb(z)
        if k == "sub":
            return lambda z: fa(z) - fb(z)
        if k == "mul":
            return lambda z: fa(z) * fb(z)
        return lambda z: fa(z) / fb(z)
    fa = e.children[0]._scalar
    if k == "neg":
        return lambda z: -fa(z)
    if k == "pow":
        p = e.value
        return lambda z: _cpow(fa(z), p)
    if k in UNARY_FUNCTIONS:
        fn = getattr(cmath, k)
        return lambda z: fn(fa(z))
    method = getattr(e.lattice, k)
    return lambda z: method(fa(z))


def evaluate(e: ExprNode, z: complex) -> complex:
    """Value of ``e`` at the point ``z``.

    Poles, overflow and lattice points all give :data:`POINT_AT_INFINITY`.
    """
    try:
        w = e._scalar(complex(z))
    except (ZeroDivisionError, OverflowError, ValueError):
        return POINT_AT_INFINITY
    if not cmath.isfinite(w):
        return POINT_AT_INFINITY
    return w


# ----------------------------------------------------------------------------
# array evaluation: numpy
# ----------------------------------------------------------------------------

def _np_eval(e: ExprNode, z: np.ndarray) -> np.ndarray:
    k = e.kind
    if k == "const":
        return np.full(z.shape, e.value, dtype=np.complex128)
    if k == "z":
        return z
    if k in BINARY:
        a, b = (_np_eval(c, z) for c in e.children)
        if k == "add":
            return a + b
        if k == "sub":
            return a - b
        if k == "mul":
            return a * b
        return a / b
    a = _np_eval(e.children[0], z)
    if k == "neg":
        return -a
    if k == "pow":
        p = e.value
        if p.imag == 0 and p.real == int(p.real) and abs(p.real) < 2**31:
            n = int(p.real)
            return a**n if n >= 0 else 1.0 / a ** (-n)
        return np.exp(p * np.log(a))
    if k in UNARY_FUNCTIONS:
        return getattr(np, k)(a)
    return getattr(e.lattice, k)(a)


def evaluate_array(e: ExprNode, z) -> np.ndarray:
    """Vectorised :func:`evaluate`; non-finite results become the sentinel."""
    z = np.asarray(z, dtype=np.complex128)
    with np.errstate(all="ignore"):
        w = np.array(_np_eval(e, z), dtype=np.complex128, copy=True)
    w[~np.isfinite(w)] = POINT_AT_INFINITY
    return w
