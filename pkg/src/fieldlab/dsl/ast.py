"""Surface syntax tree for Lagrangian densities.

Nodes are frozen dataclasses, so two trees compare structurally with ``==``.
Index names stay symbolic here; :func:`fieldlab.dsl.lagrangian.lower`
expands contractions against the metric.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class FieldRef:
    name: str


@dataclass(frozen=True)
class DefRef:
    """Reference to a user definition of a coordinate function, e.g. a(x)."""

    name: str


@dataclass(frozen=True)
class CoordRef:
    index: int


@dataclass(frozen=True)
class Index:
    """Derivative slot: a dummy name or a concrete component, up or down."""

    name: Union[str, int]
    up: bool = False

    def text(self) -> str:
        return ("^" if self.up else "") + str(self.name)


@dataclass(frozen=True)
class Partial:
    """d(target, i1, i2, ...) with target a field or a definition."""

    target: Union[FieldRef, DefRef]
    indices: tuple[Index, ...]


@dataclass(frozen=True)
class Sum:
    terms: tuple[tuple[int, "Node"], ...]  # (sign, term)


@dataclass(frozen=True)
class Product:
    factors: tuple["Node", ...]


@dataclass(frozen=True)
class Power:
    base: "Node"
    exponent: Fraction


@dataclass(frozen=True)
class ExpNode:
    arg: "Node"


@dataclass(frozen=True)
class Contraction:
    """Product whose repeated index names are summed against eta."""

    indices: tuple[str, ...]
    body: Product


Node = Union[Num, Param, FieldRef, DefRef, CoordRef, Partial, Sum, Product, Power, ExpNode, Contraction]
LEAVES = (Num, Param, FieldRef, DefRef, CoordRef, Partial)


def _num_text(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _exp_text(e: Fraction) -> str:
    if e.denominator == 1:
        return str(e.numerator)
    return f"({e.numerator}/{e.denominator})"


def pretty(node: Node) -> str:
    """Render ``node`` in the input grammar; the output reparses to ``node``."""
    if isinstance(node, Num):
        return _num_text(node.value)
    if isinstance(node, (Param, FieldRef, DefRef)):
        return node.name
    if isinstance(node, CoordRef):
        return f"x{node.index}"
    if isinstance(node, Partial):
        return "d(" + ",".join([node.target.name, *(i.text() for i in node.indices)]) + ")"
    if isinstance(node, ExpNode):
        return f"exp({pretty(node.arg)})"
    if isinstance(node, Power):
        base = pretty(node.base)
        if not isinstance(node.base, LEAVES + (ExpNode,)) or (
            isinstance(node.base, Num) and node.base.value < 0
        ):
            base = f"({base})"
        return f"{base}^{_exp_text(node.exponent)}"
    if isinstance(node, Contraction):
        return pretty(node.body)
    if isinstance(node, Product):
        parts = []
        for f in node.factors:
            t = pretty(f)
            if isinstance(f, (Sum, Product, Contraction)):
                t = f"({t})"
            parts.append(t)
        return "*".join(parts)
    if isinstance(node, Sum):
        out = []
        for i, (sign, term) in enumerate(node.terms):
            t = pretty(term)
            if isinstance(term, Sum):
                t = f"({t})"
            if i == 0:
                out.append(("-" if sign < 0 else "") + t)
            else:
                out.append((" - " if sign < 0 else " + ") + t)
        return "".join(out)
    raise TypeError(f"unknown node {node!r}")
