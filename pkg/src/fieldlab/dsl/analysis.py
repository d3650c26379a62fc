"""Structural questions about a density: homogeneity, rho-condition, forms."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import algebra as alg
from .algebra import Coord, Exp, Expr, Fld, Group
from .lagrangian import LagrangianSpec


class DerivativeInPotentialError(ValueError):
    pass


def _contains_field(a, comps) -> bool:
    if isinstance(a, Fld):
        return a.name in comps
    if isinstance(a, Exp):
        return any(_contains_field(b, comps) for b in a.arg.atoms())
    if isinstance(a, Group):
        return any(_contains_field(b, comps) for b in a.inner.atoms())
    return False


def detect_homogeneity(U: Expr, field, sample_count: int = 100, seed: int = 0) -> Fraction | None:
    """Degree k with U(s phi) = s^k U(phi), or None if no single k fits.

    ``field`` is a component name or a sequence of components scaled jointly
    (both halves of a complex field).  Polynomial potentials are decided by
    inspecting monomial degrees; anything else by sampling.
    """
    comps = {field} if isinstance(field, str) else set(field)
    if any(isinstance(a, Fld) and a.derivs for a in U.atoms()):
        raise DerivativeInPotentialError("potential must not contain derivatives of the field")
    if U.is_zero():
        return None

    polynomial = True
    degrees = set()
    for mono, _ in U.terms:
        deg = Fraction(0)
        for a, e in mono:
            if isinstance(a, Fld) and a.name in comps:
                deg += e
            elif _contains_field(a, comps):
                polynomial = False
        degrees.add(deg)
    if polynomial:
        return degrees.pop() if len(degrees) == 1 else None
    return _numeric_degree(U, comps, sample_count, seed)


def _numeric_degree(U: Expr, comps, sample_count: int, seed: int) -> Fraction | None:
    rng = np.random.default_rng(seed)
    others = sorted({a for a in U.atoms() if not isinstance(a, (Exp, Group)) and not (isinstance(a, Fld) and a.name in comps)}, key=lambda a: a.sort_key())
    k = None
    for _ in range(sample_count):
        point = {a: rng.uniform(0.5, 2.0) for a in others}
        fvals = {c: rng.uniform(0.5, 2.0) for c in comps}
        s = rng.uniform(0.5, 2.0)

        def at(scale):
            return alg.evaluate(U, lambda a: fvals[a.name] * scale if isinstance(a, Fld) else point[a])

        u1, us = at(1.0), at(s)
        if u1 == 0 or us == 0 or np.sign(u1) != np.sign(us):
            return None
        if k is None:
            k = Fraction(float(np.log(us / u1) / np.log(s))).limit_denominator(24)
        if abs(us - s ** float(k) * u1) > 1e-10 * abs(us):
            return None
    return k


def is_homogeneous_of_degree(U: Expr, field, k, sample_count: int = 100) -> bool:
    """True when U scales with degree ``k``; the zero potential qualifies for every k."""
    if U.is_zero():
        return True
    found = detect_homogeneity(U, field, sample_count)
    return found is not None and found == Fraction(k).limit_denominator(10**6)


# --------------------------------------------------------------------------

def _coefficient_ratio(a: Expr, b: Expr, rel: float = 1e-12) -> tuple[bool, float | None]:
    """Find r with a == r*b identically.  Returns (consistent, r or None if free)."""
    da, db = a.as_dict(), b.as_dict()
    scale = max(a.max_coeff(), b.max_coeff(), 1e-300)
    r = None
    for m in set(da) | set(db):
        ca, cb = da.get(m, 0.0), db.get(m, 0.0)
        if abs(cb) <= rel * scale:
            if abs(ca) > rel * scale:
                return False, None
            continue
        ratio = ca / cb
        if r is None:
            r = ratio
        elif abs(ratio - r) > 1e-10 * max(abs(r), 1e-300):
            return False, None
    return True, r


def check_k_condition(spec: LagrangianSpec) -> float | None:
    """Constant rho with dL/d(d^mu phi) = rho * D_mu(dL/dphi) identically, else None."""
    vd = spec.varderivs
    metric = spec.metric
    rho = None
    for comp in spec.components:
        f = vd.dL_dphi[comp]
        for mu in range(spec.dim):
            lhs = Expr.const(metric.eta(mu)) * vd.momentum(comp, mu)
            rhs = alg.total_derivative(f, mu)
            ok, r = _coefficient_ratio(lhs, rhs)
            if not ok:
                return None
            if r is None:
                continue
            if rho is None:
                rho = r
            elif abs(r - rho) > 1e-10 * abs(rho):
                return None
    if rho is None or rho == 0.0:
        return None
    return rho


# --------------------------------------------------------------------------
# canonical forms

@dataclass(frozen=True)
class CanonicalForm:
    """L = 1/2 G_ab d_mu phi_a d^mu phi_b - U(phi) with constant symmetric G."""

    gram: np.ndarray  # (n, n) over spec.components
    potential: Expr

    def quadratic(self, values: dict, comps) -> object:
        """sum_ab G_ab v_a v_b for per-component arrays ``values``."""
        out = 0.0
        for i, a in enumerate(comps):
            for j, b in enumerate(comps):
                if self.gram[i, j] != 0.0:
                    out = out + self.gram[i, j] * values[a] * values[b]
        return out


def split_kinetic(L: Expr, comps, dim: int) -> tuple[Expr, Expr]:
    """(terms containing first derivatives, remainder)."""
    kin, rest = {}, {}
    for mono, c in L.terms:
        has = any(isinstance(a, Fld) and a.derivs for a, _ in mono)
        (kin if has else rest)[mono] = c
    return Expr.from_dict(kin), Expr.from_dict(rest)


def canonical_form(L: Expr, comps, dim: int, rel: float = 1e-12) -> CanonicalForm | None:
    """Decompose ``L`` as a canonical kinetic term minus a potential, if possible."""
    kin, rest = split_kinetic(L, comps, dim)
    n = len(comps)
    gram = np.zeros((n, n))
    for i, a in enumerate(comps):
        for j, b in enumerate(comps):
            # d^2 L / d(d_0 a) d(d_0 b) must be constant
            d2 = alg.diff(alg.diff(kin, Fld(a, (0,))), Fld(b, (0,)))
            c = d2.constant_value()
            if c is None:
                return None
            gram[i, j] = c
    if not np.allclose(gram, gram.T):
        return None
    expected = alg.ZERO
    for i, a in enumerate(comps):
        for j, b in enumerate(comps):
            if gram[i, j]:
                for mu in range(dim):
                    eta = 1 if mu == 0 else -1
                    expected = expected + Expr.const(0.5 * gram[i, j] * eta) * alg.fld(a, mu) * alg.fld(b, mu)
    if not alg.is_identically_zero(kin - expected, max(kin.max_coeff(), 1.0), rel):
        return None
    if any(isinstance(a, Fld) and a.derivs for a in rest.atoms()):
        return None
    return CanonicalForm(gram, -rest)


@dataclass(frozen=True)
class ExponentialWeight:
    """L = exp(h_mu x^mu) * L0 with constant covector h."""

    h: tuple[float, ...]
    inner: Expr


def exponential_weight(L: Expr, dim: int) -> ExponentialWeight | None:
    """Factor a common exp(h.x) out of every monomial, if there is one."""
    if not L.terms:
        return None
    weight = None
    for mono, _ in L.terms:
        exps = [(a, e) for a, e in mono if isinstance(a, Exp)]
        if len(exps) != 1 or exps[0][1] != 1:
            return None
        if weight is None:
            weight = exps[0][0]
        elif exps[0][0] != weight:
            return None
    h = []
    arg = weight.arg
    for mu in range(dim):
        c = alg.diff(arg, Coord(mu)).constant_value()
        if c is None:
            return None
        h.append(c)
    linear = alg.ZERO
    for mu, c in enumerate(h):
        linear = linear + Expr.const(c) * alg.coord(mu)
    residue = arg - linear
    if residue.constant_value() is None:
        return None
    offset = np.exp(residue.constant_value())

    inner = alg.substitute(L, lambda a: alg.ONE if a == weight else None)
    return ExponentialWeight(tuple(h), Expr.const(offset) * inner)
