"""One-parameter field deformations phi_eps and their velocity at eps = 0.

Velocities are symbolic jet expressions, one per field component, so that
d(L_eps)/d(eps) can be formed exactly by the chain rule.  The phase family
needs a factor i that the real-coefficient algebra cannot hold; it is carried
separately as ``factor``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dsl import algebra as alg
from .dsl.algebra import Expr
from .dsl.analysis import exponential_weight
from .dsl.lagrangian import LagrangianSpec
from .errors import Refusal
from .jet import FieldBlock, Jet
from .lattice import ScalarLatticeField

KINDS = (
    "identity",
    "field-shift-const",
    "field-scale",
    "spacetime-shift",
    "momentum-field-shift",
    "scaling",
    "dissipative-mixed",
    "phase",
    "mixed-general",
    "custom",
)


class FamilyParameterError(Refusal):
    pass


@dataclass(frozen=True)
class Velocity:
    exprs: Mapping[str, Expr]
    factor: complex = 1.0


@dataclass(frozen=True)
class PerturbationFamily:
    kind: str
    a: tuple[float, ...] | None = None
    b: tuple[float, ...] | None = None
    f: tuple[Expr, ...] | None = None
    inner: "PerturbationFamily | None" = None
    exprs: Mapping[str, Expr] | None = field(default=None, hash=False, compare=False)
    normalization: str = "trace"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown family kind {self.kind!r}")

    def label(self) -> str:
        return self.kind

    def velocity(self, spec: LagrangianSpec) -> Velocity:
        comps = spec.components
        D = spec.dim
        k = self.kind
        if k == "identity":
            return Velocity({c: alg.ZERO for c in comps})
        if k == "field-shift-const":
            return Velocity({c: Expr.const(-1.0) for c in comps})
        if k == "field-scale":
            return Velocity({c: alg.fld(c) for c in comps})
        if k == "spacetime-shift":
            a = _vector(self.a, D, "a")
            return Velocity({c: sum((Expr.const(a[m]) * alg.fld(c, m) for m in range(D)), alg.ZERO) for c in comps})
        if k == "momentum-field-shift":
            b = _vector(self.b, D, "b")
            vd = spec.varderivs
            # b^mu dL/d(d^mu phi) = b^mu eta_{mu mu} dL/d(d_mu phi)
            return Velocity({
                c: sum((Expr.const(b[m] * spec.metric.eta(m)) * vd.momentum(c, m) for m in range(D)), alg.ZERO)
                for c in comps
            })
        if k == "scaling":
            delta = (D - 2) / 2.0
            return Velocity({
                c: Expr.const(delta) * alg.fld(c) + sum((alg.coord(m) * alg.fld(c, m) for m in range(D)), alg.ZERO)
                for c in comps
            })
        if k == "dissipative-mixed":
            cvec = damping_vector(spec, self.normalization)
            return Velocity({
                c: alg.fld(c) + sum((Expr.const(cvec[m]) * alg.fld(c, m) for m in range(D)), alg.ZERO)
                for c in comps
            })
        if k == "phase":
            if not spec.is_complex:
                raise FamilyParameterError("not-complex", "phase rotation acts on a complex field")
            out = {}
            for fd in spec.fields:
                if fd.kind == "complex":
                    p, q = fd.components
                    out[p] = alg.fld(p)
                    out[q] = -alg.fld(q)
                else:
                    out[fd.name] = alg.ZERO
            return Velocity(out, 1j)
        if k == "mixed-general":
            f = self.f or tuple(alg.ZERO for _ in range(D))
            if len(f) != D:
                raise ValueError(f"f needs {D} components")
            inner = self.inner.velocity(spec) if self.inner is not None else Velocity({c: alg.ZERO for c in comps})
            if inner.factor != 1.0:
                raise ValueError("mixed-general inner family must be real")
            return Velocity({
                c: sum((f[m] * alg.fld(c, m) for m in range(D)), alg.ZERO) + inner.exprs[c] for c in comps
            })
        # custom
        if self.exprs is None:
            raise ValueError("custom family needs velocity expressions")
        return Velocity({c: self.exprs.get(c, alg.ZERO) for c in comps})


def _vector(v, D: int, name: str) -> tuple[float, ...]:
    if v is None:
        raise ValueError(f"family needs parameter {name}")
    v = tuple(float(x) for x in v)
    if len(v) != D:
        raise ValueError(f"parameter {name} needs {D} components, got {len(v)}")
    return v


def damping_vector(spec: LagrangianSpec, normalization: str = "trace") -> tuple[float, ...]:
    """Constant c^mu of the dissipative family for L = exp(h.x) L0.

    ``"trace"`` uses c^mu = 2 / (D h_mu), the componentwise choice satisfying
    h_mu c^mu = 2 which the total-divergence argument needs.  ``"literal"``
    uses c^mu = 2 / h_mu, which only satisfies it for D = 1.
    """
    w = exponential_weight(spec.numeric, spec.dim)
    if w is None:
        raise FamilyParameterError("not-dissipative-form", "no exp(h.x) weight found")
    zero = [m for m, h in enumerate(w.h) if h == 0.0]
    if zero:
        raise FamilyParameterError("zero-damping-component", f"h_{zero[0]} = 0")
    if normalization == "trace":
        return tuple(2.0 / (spec.dim * h) for h in w.h)
    if normalization == "literal":
        return tuple(2.0 / h for h in w.h)
    raise ValueError("normalization must be 'trace' or 'literal'")


# convenience constructors ----------------------------------------------------

def identity() -> PerturbationFamily:
    return PerturbationFamily("identity")


def field_shift() -> PerturbationFamily:
    return PerturbationFamily("field-shift-const")


def field_scale() -> PerturbationFamily:
    return PerturbationFamily("field-scale")


def spacetime_shift(a: Sequence[float]) -> PerturbationFamily:
    return PerturbationFamily("spacetime-shift", a=tuple(a))


def momentum_shift(b: Sequence[float]) -> PerturbationFamily:
    return PerturbationFamily("momentum-field-shift", b=tuple(b))


def scaling() -> PerturbationFamily:
    return PerturbationFamily("scaling")


def dissipative_mixed(normalization: str = "trace") -> PerturbationFamily:
    return PerturbationFamily("dissipative-mixed", normalization=normalization)


def phase() -> PerturbationFamily:
    return PerturbationFamily("phase")


def mixed_general(f: Sequence[Expr], inner: PerturbationFamily | None = None) -> PerturbationFamily:
    return PerturbationFamily("mixed-general", f=tuple(alg.as_expr(x) for x in f), inner=inner)


def custom(exprs: Mapping[str, Expr]) -> PerturbationFamily:
    return PerturbationFamily("custom", exprs=dict(exprs))


# --------------------------------------------------------------------------

def eps_derivative_expr(spec: LagrangianSpec, vel: Velocity) -> Expr:
    """d L(x, phi_eps, d phi_eps)/d eps at 0 = sum_a dL/dphi_a v_a + P_a^mu D_mu v_a.

    The factor of ``vel`` is not included.
    """
    vd = spec.varderivs
    out = alg.ZERO
    for c in spec.components:
        v = vel.exprs[c]
        if v.is_zero():
            continue
        out = out + vd.dL_dphi[c] * v
        for mu in range(spec.dim):
            out = out + vd.momentum(c, mu) * alg.total_derivative(v, mu)
    return out


def flux_exprs(spec: LagrangianSpec, vel: Velocity) -> tuple[Expr, ...]:
    """P_a^mu v_a summed over components (factor not included)."""
    vd = spec.varderivs
    return tuple(
        sum((vd.momentum(c, mu) * vel.exprs[c] for c in spec.components), alg.ZERO) for mu in range(spec.dim)
    )


def family_velocity(family: PerturbationFamily, block: FieldBlock, spec: LagrangianSpec) -> dict:
    """d phi_eps / d eps at eps = 0 on every site, per component."""
    vel = family.velocity(spec)
    jet = Jet(block)
    out = {}
    for c in spec.components:
        v = np.array(jet.eval(vel.exprs[c])) * vel.factor
        if np.iscomplexobj(v) and not block.is_complex and np.all(v.imag == 0):
            v = v.real
        out[c] = ScalarLatticeField(block.grid, v)
    return out
