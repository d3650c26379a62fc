"""Canonical sum-of-monomials expressions and their calculus.

Expressions produced by lowering the surface syntax are stored as a mapping
from monomials to float coefficients.  A monomial is a sorted tuple of
``(atom, exponent)`` pairs with :class:`fractions.Fraction` exponents.  Sums
that cannot be expanded (non-integer or negative powers of sums) become
:class:`Group` atoms, so every operation below stays closed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Union

import numpy as np

Number = Union[int, float, Fraction]


# --------------------------------------------------------------------------
# atoms

@dataclass(frozen=True)
class Sym:
    """Named constant parameter."""

    name: str

    def sort_key(self):
        return (1, self.name)

    def text(self) -> str:
        return self.name


@dataclass(frozen=True)
class Coord:
    """Spacetime coordinate x^index."""

    index: int

    def sort_key(self):
        return (2, str(self.index))

    def text(self) -> str:
        return f"x{self.index}"


@dataclass(frozen=True)
class Fld:
    """Field component ``name`` differentiated along covariant ``derivs``.

    ``Fld("phi")`` is the field itself, ``Fld("phi", (0,))`` is d_0 phi and
    ``Fld("phi", (0, 1))`` the mixed second derivative.  Indices are kept
    sorted since partial derivatives commute.
    """

    name: str
    derivs: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "derivs", tuple(sorted(self.derivs)))

    @property
    def order(self) -> int:
        return len(self.derivs)

    def sort_key(self):
        return (3, self.name, self.derivs)

    def text(self) -> str:
        if not self.derivs:
            return self.name
        return "d(" + ",".join([self.name, *map(str, self.derivs)]) + ")"


@dataclass(frozen=True)
class Exp:
    arg: "Expr"

    def sort_key(self):
        return (4, self.arg.text())

    def text(self) -> str:
        return f"exp({self.arg.text()})"


@dataclass(frozen=True)
class Group:
    """An unexpanded sum, raised to the exponent held by its monomial."""

    inner: "Expr"

    def sort_key(self):
        return (5, self.inner.text())

    def text(self) -> str:
        return f"({self.inner.text()})"


Atom = Union[Sym, Coord, Fld, Exp, Group]
Monomial = tuple  # tuple[tuple[Atom, Fraction], ...]


def _mono_key(mono: Monomial):
    return tuple((a.sort_key(), e) for a, e in mono)


def _make_monomial(powers: Mapping[Atom, Fraction]) -> Monomial:
    items = [(a, Fraction(e)) for a, e in powers.items() if e != 0]
    items.sort(key=lambda p: p[0].sort_key())
    return tuple(items)


def _mono_mul(m1: Monomial, m2: Monomial) -> Monomial:
    powers: dict = dict(m1)
    for a, e in m2:
        powers[a] = powers.get(a, 0) + e
    return _make_monomial(powers)


# --------------------------------------------------------------------------
# expressions

@dataclass(frozen=True, eq=False)
class Expr:
    """Immutable sum of monomials with float coefficients."""

    terms: tuple = ()  # tuple[(Monomial, float), ...] sorted by monomial key
    _index: dict = field(default=None, repr=False, compare=False)

    # construction ---------------------------------------------------------
    @staticmethod
    def from_dict(d: Mapping[Monomial, float]) -> "Expr":
        items = [(m, float(c)) for m, c in d.items() if c != 0.0]
        items.sort(key=lambda mc: _mono_key(mc[0]))
        return Expr(tuple(items))

    @staticmethod
    def const(value: Number) -> "Expr":
        return Expr.from_dict({(): float(value)})

    @staticmethod
    def atom(a: Atom, power: Number = 1) -> "Expr":
        return Expr.from_dict({_make_monomial({a: Fraction(power)}): 1.0})

    def as_dict(self) -> dict:
        idx = self._index
        if idx is None:
            idx = dict(self.terms)
            object.__setattr__(self, "_index", idx)
        return idx

    # comparison -----------------------------------------------------------
    def __eq__(self, other):
        if isinstance(other, (int, float)):
            other = Expr.const(other)
        if not isinstance(other, Expr):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(self.terms)

    # arithmetic -----------------------------------------------------------
    def __add__(self, other) -> "Expr":
        other = as_expr(other)
        out = dict(self.as_dict())
        for m, c in other.terms:
            out[m] = out.get(m, 0.0) + c
        return Expr.from_dict(out)

    __radd__ = __add__

    def __neg__(self) -> "Expr":
        return Expr(tuple((m, -c) for m, c in self.terms))

    def __sub__(self, other) -> "Expr":
        return self + (-as_expr(other))

    def __rsub__(self, other) -> "Expr":
        return as_expr(other) - self

    def __mul__(self, other) -> "Expr":
        other = as_expr(other)
        out: dict = {}
        for m1, c1 in self.terms:
            for m2, c2 in other.terms:
                m = _mono_mul(m1, m2)
                out[m] = out.get(m, 0.0) + c1 * c2
        return Expr.from_dict(out)

    __rmul__ = __mul__

    def __pow__(self, exponent: Number) -> "Expr":
        return expr_pow(self, Fraction(exponent))

    # queries ----------------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def constant_value(self) -> float | None:
        """The value if this is a pure number, else None."""
        if not self.terms:
            return 0.0
        if len(self.terms) == 1 and self.terms[0][0] == ():
            return self.terms[0][1]
        return None

    def atoms(self) -> set:
        """All atoms, recursing into exponentials and groups."""
        out: set = set()
        for m, _ in self.terms:
            for a, _ in m:
                out.add(a)
                if isinstance(a, Exp):
                    out |= a.arg.atoms()
                elif isinstance(a, Group):
                    out |= a.inner.atoms()
        return out

    def max_coeff(self) -> float:
        return max((abs(c) for _, c in self.terms), default=0.0)

    def chop(self, rel: float = 1e-13) -> "Expr":
        """Drop coefficients below ``rel`` times the largest one."""
        scale = self.max_coeff()
        return Expr.from_dict({m: c for m, c in self.terms if abs(c) > rel * scale})

    def text(self) -> str:
        return to_text(self)

    def __repr__(self):
        return f"Expr({self.text()!r})"


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, Fraction)):
        return Expr.const(x)
    if isinstance(x, (Sym, Coord, Fld, Exp, Group)):
        return Expr.atom(x)
    raise TypeError(f"cannot convert {type(x).__name__} to Expr")


ZERO = Expr()
ONE = Expr.const(1.0)


def expr_pow(base: Expr, e: Fraction) -> Expr:
    e = Fraction(e)
    if e == 0:
        return ONE
    if e == 1:
        return base
    if base.is_zero():
        if e < 0:
            raise ZeroDivisionError("zero raised to a negative power")
        return ZERO
    if len(base.terms) == 1:
        mono, c = base.terms[0]
        if e.denominator == 1:
            powers = {a: p * e for a, p in mono}
            return Expr.from_dict({_make_monomial(powers): c ** int(e)})
        # fractional powers only distribute over a single positive atom
        if c > 0 and (not mono or (len(mono) == 1 and mono[0][1] == 1)):
            powers = {a: p * e for a, p in mono}
            return Expr.from_dict({_make_monomial(powers): c ** float(e)})
        return Expr.atom(Group(base), e)
    if e.denominator == 1 and e > 0:
        out = ONE
        for _ in range(int(e)):
            out = out * base
        return out
    return Expr.atom(Group(base), e)


def sym(name: str) -> Expr:
    return Expr.atom(Sym(name))


def coord(k: int) -> Expr:
    return Expr.atom(Coord(k))


def fld(name: str, *derivs: int) -> Expr:
    return Expr.atom(Fld(name, tuple(derivs)))


def exp(arg: Expr) -> Expr:
    arg = as_expr(arg)
    c = arg.constant_value()
    if c is not None:
        return Expr.const(np.exp(c))
    return Expr.atom(Exp(arg))


# --------------------------------------------------------------------------
# calculus

def _atom_diff(a: Atom, var: Atom) -> Expr:
    if a == var:
        return ONE
    if isinstance(a, Exp):
        inner = diff(a.arg, var)
        return ZERO if inner.is_zero() else Expr.atom(a) * inner
    if isinstance(a, Group):
        return diff(a.inner, var)
    return ZERO


def diff(expr: Expr, var: Atom) -> Expr:
    """Partial derivative treating every other atom as independent."""
    out = ZERO
    for mono, c in expr.terms:
        for i, (a, e) in enumerate(mono):
            da = _atom_diff(a, var)
            if da.is_zero():
                continue
            rest = dict(mono)
            rest[a] = e - 1
            out = out + Expr.from_dict({_make_monomial(rest): c * float(e)}) * da
    return out


def substitute(expr: Expr, repl: Callable[[Atom], Expr | None]) -> Expr:
    """Replace atoms for which ``repl`` returns an expression."""
    out = ZERO
    for mono, c in expr.terms:
        term = Expr.const(c)
        for a, e in mono:
            r = repl(a)
            if r is None:
                if isinstance(a, Exp):
                    r = exp(substitute(a.arg, repl))
                elif isinstance(a, Group):
                    r = substitute(a.inner, repl)
                else:
                    r = Expr.atom(a)
            term = term * expr_pow(r, e)
        out = out + term
    return out


def substitute_params(expr: Expr, values: Mapping[str, float]) -> Expr:
    def repl(a):
        if isinstance(a, Sym) and a.name in values and values[a.name] is not None:
            return Expr.const(values[a.name])
        return None

    return substitute(expr, repl)


def field_atoms(expr: Expr) -> set:
    return {a for a in expr.atoms() if isinstance(a, Fld)}


def explicit_partial(expr: Expr, mu: int) -> Expr:
    """d/dx^mu of the explicit coordinate dependence only."""
    return diff(expr, Coord(mu))


def total_derivative(expr: Expr, mu: int) -> Expr:
    """D_mu: explicit x-dependence plus chain rule through every field jet atom."""
    out = explicit_partial(expr, mu)
    for a in sorted(field_atoms(expr), key=lambda a: a.sort_key()):
        d = diff(expr, a)
        if not d.is_zero():
            out = out + d * Expr.atom(Fld(a.name, a.derivs + (mu,)))
    return out


def is_identically_zero(expr: Expr, scale: float = 1.0, rel: float = 1e-12) -> bool:
    return expr.max_coeff() <= rel * max(scale, 1e-300)


# --------------------------------------------------------------------------
# evaluation

def evaluate(expr: Expr, lookup: Callable[[Atom], object]):
    """Evaluate with numpy broadcasting; ``lookup`` maps leaf atoms to values."""
    cache: dict = {}

    def value(a):
        if a in cache:
            return cache[a]
        if isinstance(a, Exp):
            v = np.exp(evaluate(a.arg, lookup))
        elif isinstance(a, Group):
            v = evaluate(a.inner, lookup)
        else:
            v = lookup(a)
        cache[a] = v
        return v

    total = 0.0
    for mono, c in expr.terms:
        term = c
        for a, e in mono:
            v = value(a)
            if e.denominator == 1:
                n = int(e)
                if n == 1:
                    term = term * v
                elif n > 0:
                    term = term * v ** n
                else:
                    term = term / v ** (-n)
            else:
                term = term * v ** float(e)
        total = total + term
    return total


# --------------------------------------------------------------------------
# printing (reparsable by the surface parser)

def _exp_text(e: Fraction) -> str:
    if e.denominator == 1:
        return str(e.numerator)
    return f"({e.numerator}/{e.denominator})"


def _num_text(c: float) -> str:
    if c == int(c) and abs(c) < 1e15:
        return str(int(c))
    return repr(c)


def to_text(expr: Expr) -> str:
    if not expr.terms:
        return "0"
    parts = []
    for i, (mono, c) in enumerate(expr.terms):
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        factors = []
        if mag != 1.0 or not mono:
            factors.append(_num_text(mag))
        for a, e in mono:
            t = a.text()
            factors.append(t if e == 1 else f"{t}^{_exp_text(e)}")
        body = "*".join(factors)
        if i == 0:
            parts.append(("-" if sign == "-" else "") + body)
        else:
            parts.append(f" {sign} {body}")
    return "".join(parts)


def collect(exprs: Iterable[Expr]) -> Expr:
    out = ZERO
    for e in exprs:
        out = out + e
    return out
