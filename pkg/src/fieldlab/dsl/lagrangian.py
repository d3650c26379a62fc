"""Parsed Lagrangian densities and the variational calculus on them."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Mapping

from . import algebra as alg
from . import ast as A
from .algebra import Coord, Expr, Fld
from .parser import ParseError, UnboundParameterError, parse_document

DEFAULT_DIM = 4


@dataclass(frozen=True)
class Metric:
    """Mostly-minus Minkowski metric diag(+1, -1, ..., -1)."""

    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("spacetime dimension must be >= 1")

    @property
    def signature(self) -> tuple[int, ...]:
        return (1,) + (-1,) * (self.dim - 1)

    def eta(self, mu: int) -> int:
        return 1 if mu == 0 else -1


@dataclass(frozen=True)
class FieldDecl:
    name: str
    kind: str = "real"  # "real" | "complex"

    @property
    def components(self) -> tuple[str, ...]:
        if self.kind == "complex":
            return (self.name, self.name + "star")
        return (self.name,)


@dataclass(frozen=True, eq=False)
class LagrangianSpec:
    expr: A.Node
    fields: tuple[FieldDecl, ...]
    params: Mapping[str, float | None]
    dim: int
    defs: Mapping[str, A.Node] = field(default_factory=dict)
    source: str = ""

    @property
    def metric(self) -> Metric:
        return Metric(self.dim)

    @property
    def components(self) -> tuple[str, ...]:
        return tuple(c for f in self.fields for c in f.components)

    @property
    def is_complex(self) -> bool:
        return any(f.kind == "complex" for f in self.fields)

    def conjugate(self, comp: str) -> str | None:
        for f in self.fields:
            if f.kind == "complex":
                a, b = f.components
                if comp == a:
                    return b
                if comp == b:
                    return a
        return None

    def with_params(self, **values: float) -> "LagrangianSpec":
        params = dict(self.params)
        params.update(values)
        return LagrangianSpec(self.expr, self.fields, params, self.dim, self.defs, self.source)

    def missing_params(self) -> list[str]:
        return sorted(k for k, v in self.params.items() if v is None)

    # lowered forms, cached per instance
    @cached_property
    def symbolic(self) -> Expr:
        """Index-expanded density with parameters kept symbolic."""
        return lower(self.expr, self)

    @cached_property
    def numeric(self) -> Expr:
        """Index-expanded density with parameter values substituted."""
        missing = self.missing_params()
        if missing:
            raise UnboundParameterError(f"unbound parameter(s): {', '.join(missing)}")
        return alg.substitute_params(self.symbolic, self.params)

    @cached_property
    def varderivs(self) -> "VarDerivs":
        return compute_varderivs(self.numeric, self.components, self.dim)

    def pretty(self) -> str:
        return A.pretty(self.expr)


@dataclass(frozen=True)
class VarDerivs:
    """dL/dphi_a and dL/d(d_mu phi_a) (upper index mu) per component."""

    dL_dphi: dict  # comp -> Expr
    dL_dgrad: dict  # comp -> tuple[Expr, ...] of length D

    def momentum(self, comp: str, mu: int) -> Expr:
        return self.dL_dgrad[comp][mu]


def compute_varderivs(L: Expr, components, dim: int) -> VarDerivs:
    dphi = {c: alg.diff(L, Fld(c)) for c in components}
    dgrad = {c: tuple(alg.diff(L, Fld(c, (mu,))) for mu in range(dim)) for c in components}
    return VarDerivs(dphi, dgrad)


def parse_lagrangian(
    text: str,
    params: Mapping[str, float] | None = None,
    dim: int | None = None,
    strict: bool = False,
) -> LagrangianSpec:
    """Parse ``text`` into a :class:`LagrangianSpec`.

    ``params`` and ``dim`` override directives in the text.  With
    ``strict=True`` every referenced parameter must have a value.
    """
    doc = parse_document(text)
    values: dict = {name: doc.params.get(name) for name in sorted(doc.referenced)}
    for name, v in doc.params.items():
        values.setdefault(name, v)
    if params:
        for name, v in params.items():
            values[name] = float(v)
    if strict:
        missing = sorted(k for k, v in values.items() if v is None)
        if missing:
            raise UnboundParameterError(f"unbound parameter(s): {', '.join(missing)}")
    D = dim if dim is not None else (doc.dim if doc.dim is not None else DEFAULT_DIM)
    fields = tuple(FieldDecl(n, k) for n, k in doc.fields.items())
    spec = LagrangianSpec(doc.expr, fields, values, D, doc.defs, text)
    _check_coords(spec)
    return spec


def _check_coords(spec: LagrangianSpec) -> None:
    def walk(node):
        if isinstance(node, A.CoordRef) and node.index >= spec.dim:
            raise ParseError(f"coordinate x{node.index} out of range for D={spec.dim}")
        if isinstance(node, A.Partial):
            for i in node.indices:
                if isinstance(i.name, int) and i.name >= spec.dim:
                    raise ParseError(f"derivative index {i.name} out of range for D={spec.dim}")
        for child in _children(node):
            walk(child)

    walk(spec.expr)
    for d in spec.defs.values():
        walk(d)


def _children(node):
    if isinstance(node, A.Sum):
        return [t for _, t in node.terms]
    if isinstance(node, A.Product):
        return list(node.factors)
    if isinstance(node, A.Contraction):
        return list(node.body.factors)
    if isinstance(node, A.Power):
        return [node.base]
    if isinstance(node, A.ExpNode):
        return [node.arg]
    return []


# --------------------------------------------------------------------------
# lowering

def lower(node: A.Node, spec: LagrangianSpec, env: Mapping[str, int] | None = None) -> Expr:
    """Expand contractions over the metric into a canonical expression."""
    env = env or {}
    metric = spec.metric
    if isinstance(node, A.Num):
        return Expr.const(node.value)
    if isinstance(node, A.Param):
        return alg.sym(node.name)
    if isinstance(node, A.FieldRef):
        return alg.fld(node.name)
    if isinstance(node, A.CoordRef):
        return alg.coord(node.index)
    if isinstance(node, A.DefRef):
        return lower(spec.defs[node.name], spec)
    if isinstance(node, A.Partial):
        comps = [env[i.name] if isinstance(i.name, str) else i.name for i in node.indices]
        sign = 1
        for i, k in zip(node.indices, comps):
            if i.up:
                sign *= metric.eta(k)
        if isinstance(node.target, A.FieldRef):
            return Expr.const(sign) * alg.fld(node.target.name, *comps)
        out = lower(spec.defs[node.target.name], spec)
        for k in comps:
            out = alg.explicit_partial(out, k)
        return Expr.const(sign) * out
    if isinstance(node, A.Sum):
        out = alg.ZERO
        for s, t in node.terms:
            term = lower(t, spec, env)
            out = out + term if s > 0 else out - term
        return out
    if isinstance(node, A.Product):
        out = alg.ONE
        for f in node.factors:
            out = out * lower(f, spec, env)
        return out
    if isinstance(node, A.Contraction):
        out = alg.ZERO
        for values in itertools.product(range(spec.dim), repeat=len(node.indices)):
            sub = dict(env)
            sub.update(zip(node.indices, values))
            out = out + lower(node.body, spec, sub)
        return out
    if isinstance(node, A.Power):
        return alg.expr_pow(lower(node.base, spec, env), Fraction(node.exponent))
    if isinstance(node, A.ExpNode):
        return alg.exp(lower(node.arg, spec, env))
    raise TypeError(f"unknown node {node!r}")


# --------------------------------------------------------------------------
# operations

def _component(spec: LagrangianSpec, field_id: str) -> str:
    if field_id not in spec.components:
        raise KeyError(f"{field_id!r} is not a field component of this theory")
    return field_id


def variational_derivative(spec: LagrangianSpec, field_id: str, symbolic: bool = True) -> Expr:
    """dL/dphi for one field component (parameters symbolic unless asked)."""
    comp = _component(spec, field_id)
    L = spec.symbolic if symbolic else spec.numeric
    return alg.diff(L, Fld(comp))


def momentum_derivative(spec: LagrangianSpec, field_id: str, mu: int, variance: str = "up", symbolic: bool = True) -> Expr:
    """dL/d(d_mu phi) (``variance="up"``) or dL/d(d^mu phi) (``"down"``)."""
    comp = _component(spec, field_id)
    if not 0 <= mu < spec.dim:
        raise IndexError(f"index {mu} out of range for D={spec.dim}")
    L = spec.symbolic if symbolic else spec.numeric
    p = alg.diff(L, Fld(comp, (mu,)))
    if variance == "down":
        p = Expr.const(spec.metric.eta(mu)) * p
    elif variance != "up":
        raise ValueError("variance must be 'up' or 'down'")
    return p


def check_spacetime_independence(spec: LagrangianSpec) -> bool:
    """True iff no coordinate appears anywhere in the density."""
    return not any(isinstance(a, Coord) for a in spec.symbolic.atoms())


def lower_node(node: A.Node, dim: int = DEFAULT_DIM, defs: Mapping[str, A.Node] | None = None) -> Expr:
    """Lower a free-standing surface node (no spec at hand)."""
    shell = LagrangianSpec(A.Num(0.0), (), {}, dim, dict(defs or {}))
    return lower(node, shell)


def evaluate(expr, bindings: Mapping[str, float], dim: int = DEFAULT_DIM):
    """Evaluate a surface node or canonical expression at named values.

    Parameters and field components bind by name, ``d(phi,mu)`` by
    ``"d(phi,mu)"`` with a concrete index, coordinates by ``"x0"``, ``"x1"``...
    """
    if not isinstance(expr, Expr):
        expr = lower_node(expr, dim)

    def lookup(a):
        key = a.text()
        if key not in bindings:
            raise UnboundParameterError(f"unbound symbol {key!r}")
        return bindings[key]

    return float(alg.evaluate(expr, lookup))
