"""Nonlocal constants, conserved-current constructors and their verification.

Every constructor builds its current symbolically (in terms of jet atoms and
coordinates) and evaluates it on a block, so the only discretization error
is that of the shared finite-difference stencils.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dsl import algebra as alg
from .dsl.algebra import Coord, Expr
from .dsl.analysis import canonical_form, check_k_condition, exponential_weight, is_homogeneous_of_degree
from .dsl.lagrangian import LagrangianSpec, check_spacetime_independence, lower_node
from .dsl.parser import parse_expression
from .dynamics import interior_mask, l2_norm, linf_norm
from .errors import Refusal
from .families import PerturbationFamily, Velocity, damping_vector, eps_derivative_expr, flux_exprs
from .jet import FieldBlock, Jet, real_if_close
from .lattice import (
    LatticeGrid,
    ScalarLatticeField,
    SlabRegion,
    VectorLatticeField,
    divergence_array,
    partial,
    spatial_integral,
    surface_flux,
    volume_integral,
)


# --------------------------------------------------------------------------
# containers

@dataclass(frozen=True, eq=False)
class CurrentField:
    """Contravariant j^mu on a grid with the theorem that produced it.

    ``periodic_space`` is False when the current carries explicit spatial
    coordinates, so its divergence must not wrap around the torus.
    """

    grid: LatticeGrid
    values: np.ndarray
    name: str
    theorem: str
    periodic_space: bool = True
    meta: Mapping[str, object] = field(default_factory=dict)

    def as_vector(self) -> VectorLatticeField:
        return VectorLatticeField(self.grid, np.real_if_close(self.values))

    def divergence(self) -> np.ndarray:
        return divergence_array(self.values, self.grid, self.periodic_space)


@dataclass(frozen=True, eq=False)
class TensorField:
    """Rank-2 tensor; ``values[mu, nu]`` holds T^mu_nu (``mixed``) or T^{mu nu} (``contravariant``)."""

    grid: LatticeGrid
    values: np.ndarray
    name: str
    theorem: str
    variance: str = "mixed"
    periodic_space: bool = True

    def eta(self, mu: int) -> float:
        return 1.0 if mu == 0 else -1.0

    def contravariant(self) -> np.ndarray:
        if self.variance == "contravariant":
            return self.values
        D = self.grid.dim
        return np.stack([np.stack([self.values[m, n] * self.eta(n) for n in range(D)]) for m in range(D)])

    def mixed(self) -> np.ndarray:
        if self.variance == "mixed":
            return self.values
        D = self.grid.dim
        return np.stack([np.stack([self.values[m, n] * self.eta(n) for n in range(D)]) for m in range(D)])

    def trace(self) -> np.ndarray:
        m = self.mixed()
        return sum(m[k, k] for k in range(self.grid.dim))

    def column(self, nu: int) -> CurrentField:
        """The current j^mu = values[mu, nu] for fixed nu."""
        return CurrentField(self.grid, self.values[:, nu], f"{self.name}[.,{nu}]", self.theorem, self.periodic_space)

    def columns(self) -> list[CurrentField]:
        return [self.column(n) for n in range(self.grid.dim)]


def symmetry_defect(t: TensorField) -> float:
    """max |A^{mu nu} - A^{nu mu}| relative to max |A| over all sites."""
    a = t.contravariant()
    scale = float(np.max(np.abs(a))) or 1.0
    worst = 0.0
    for m in range(t.grid.dim):
        for n in range(m + 1, t.grid.dim):
            worst = max(worst, float(np.max(np.abs(a[m, n] - a[n, m]))))
    return worst / scale


def asymmetry_witness(t: TensorField, factor: float = 1e3):
    """First (site, mu, nu) with |A^{mu nu} - A^{nu mu}| above ``factor`` times rounding, else None."""
    a = t.contravariant()
    eps = np.finfo(float).eps
    for m in range(t.grid.dim):
        for n in range(m + 1, t.grid.dim):
            d = np.abs(a[m, n] - a[n, m])
            bound = factor * eps * (np.abs(a[m, n]) + np.abs(a[n, m]) + 1e-300)
            hit = np.argwhere(d > bound)
            if hit.size:
                site = tuple(int(i) for i in hit[0])
                return site, m, n, float(d[site])
    return None


# --------------------------------------------------------------------------
# shared helpers

def _has_spatial_coord(exprs) -> bool:
    for e in exprs:
        for a in e.atoms():
            if isinstance(a, Coord) and a.index > 0:
                return True
    return False


def _eval_vector(jet: Jet, exprs: Sequence[Expr], factor: complex = 1.0) -> np.ndarray:
    vals = jet.eval_many(exprs)
    if factor != 1.0:
        vals = vals * factor
    return real_if_close(vals)


def _as_coordinate_expr(x, dim: int) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float)):
        return Expr.const(x)
    node, _ = parse_expression(str(x))
    return lower_node(node, dim)


def as_vector_exprs(f, dim: int) -> tuple[Expr, ...]:
    """Coerce numbers, strings or expressions into a D-vector of coordinate expressions."""
    f = tuple(_as_coordinate_expr(x, dim) for x in f)
    if len(f) != dim:
        raise ValueError(f"vector needs {dim} components, got {len(f)}")
    return f


def position_vector(dim: int) -> tuple[Expr, ...]:
    return tuple(alg.coord(m) for m in range(dim))


def _lower(spec: LagrangianSpec, mu: int) -> float:
    return float(spec.metric.eta(mu))


def _require_independent(spec: LagrangianSpec, what: str) -> None:
    if not check_spacetime_independence(spec):
        raise Refusal("spacetime-dependent", f"{what} needs a density without explicit coordinates")


def _em_exprs(spec: LagrangianSpec, L: Expr | None = None) -> list[list[Expr]]:
    """T^mu_nu = sum_a P_a^mu d_nu phi_a - L delta^mu_nu (unrefused, symbolic)."""
    vd = spec.varderivs
    L = spec.numeric if L is None else L
    D = spec.dim
    out = []
    for mu in range(D):
        row = []
        for nu in range(D):
            e = sum((vd.momentum(c, mu) * alg.fld(c, nu) for c in spec.components), alg.ZERO)
            if mu == nu:
                e = e - L
            row.append(e)
        out.append(row)
    return out


# --------------------------------------------------------------------------
# nonlocal constant

@dataclass
class NonlocalReport:
    family: str
    t0_index: int
    t1_indices: list
    times: list
    values: list
    deviation: float
    max_abs: float
    passed: bool | None = None

    def to_json(self) -> dict:
        return {
            "family": self.family,
            "t0_index": self.t0_index,
            "t1": list(self.times),
            "value": list(self.values),
            "deviation": self.deviation,
            "max_abs": self.max_abs,
            "pass": self.passed,
        }


def nonlocal_constant(
    spec: LagrangianSpec,
    block: FieldBlock,
    family: PerturbationFamily,
    t0: int = 1,
    t1: int | Sequence[int] | None = None,
    spatial: str | None = None,
    tolerance: float | None = None,
) -> NonlocalReport:
    """Surface flux of P^mu v minus the volume integral of dL_eps/deps over slabs [t0, t1].

    ``t1`` defaults to every interior slice after ``t0``.  The value is
    reported per t1 together with its spread (max - min).
    """
    grid = block.grid
    last = grid.shape[0] - 2
    if t1 is None:
        t1s = list(range(t0 + 1, last + 1))
    elif isinstance(t1, int):
        t1s = [t1]
    else:
        t1s = list(t1)
    if not t1s or min(t1s) <= t0:
        raise ValueError("need t0 < t1")
    vel = family.velocity(spec)
    flux_e = flux_exprs(spec, vel)
    dens_e = eps_derivative_expr(spec, vel)
    if spatial is None:
        spatial = "box" if _has_spatial_coord(list(flux_e) + [dens_e]) else "torus"
    jet = Jet(block)
    flux = _eval_vector(jet, flux_e, vel.factor)
    dens = real_if_close(np.array(jet.eval(dens_e)) * vel.factor)
    values = []
    for t1_ in t1s:
        slab = SlabRegion(t0, t1_, spatial)
        v = surface_flux(flux, slab, grid) - volume_integral(dens, slab, grid)
        values.append(complex(v) if np.iscomplexobj(v) else float(v))
    arr = np.asarray(values)
    arr = real_if_close(arr)
    deviation = float(np.max(arr.real) - np.min(arr.real)) if arr.size else 0.0
    if np.iscomplexobj(arr):
        deviation = max(deviation, float(np.max(arr.imag) - np.min(arr.imag)))
    max_abs = float(np.max(np.abs(arr))) if arr.size else 0.0
    times = [float(grid.origin[0] + k * grid.dt) for k in t1s]
    passed = None if tolerance is None else bool(deviation <= tolerance)
    return NonlocalReport(family.label(), t0, t1s, times, [complex(v) if np.iscomplexobj(arr) else float(v) for v in arr], deviation, max_abs, passed)


# --------------------------------------------------------------------------
# total divergence condition and currents from psi

def _psi_array(psi, jet: Jet, dim: int):
    """Return (values (D, ...), periodic_space) for a psi given as expressions or a field."""
    if isinstance(psi, VectorLatticeField):
        return psi.values, True
    if isinstance(psi, CurrentField):
        return psi.values, psi.periodic_space
    if psi is None or (isinstance(psi, (int, float)) and psi == 0):
        return np.zeros((dim,) + jet.grid.shape), True
    exprs = as_vector_exprs(psi, dim)
    return _eval_vector(jet, exprs), not _has_spatial_coord(exprs)


def total_divergence_residual(spec: LagrangianSpec, block: FieldBlock, family: PerturbationFamily, psi) -> ScalarLatticeField:
    """dL_eps/deps - d_mu psi^mu on every site."""
    jet = Jet(block)
    vel = family.velocity(spec)
    dens = np.array(jet.eval(eps_derivative_expr(spec, vel))) * vel.factor
    vals, periodic = _psi_array(psi, jet, spec.dim)
    res = real_if_close(dens - divergence_array(vals, block.grid, periodic))
    return ScalarLatticeField(block.grid, res)


def current_from_psi(spec: LagrangianSpec, block: FieldBlock, family: PerturbationFamily, psi, name: str | None = None) -> CurrentField:
    """j^mu = P^mu v - psi^mu."""
    jet = Jet(block)
    vel = family.velocity(spec)
    flux_e = flux_exprs(spec, vel)
    flux = _eval_vector(jet, flux_e, vel.factor)
    vals, periodic = _psi_array(psi, jet, spec.dim)
    periodic = periodic and not _has_spatial_coord(flux_e)
    return CurrentField(block.grid, real_if_close(flux - vals), name or f"psi-current[{family.label()}]", "total-divergence", periodic)


# --------------------------------------------------------------------------
# energy-momentum and K tensors

def energy_momentum(spec: LagrangianSpec, block: FieldBlock) -> TensorField:
    """T^mu_nu = P^mu d_nu phi - L delta^mu_nu (summed over field components)."""
    _require_independent(spec, "the energy-momentum tensor")
    jet = Jet(block)
    ex = _em_exprs(spec)
    D = spec.dim
    vals = np.stack([_eval_vector(jet, ex[m]) for m in range(D)])
    return TensorField(block.grid, real_if_close(vals), "T", "energy-momentum")


def k_tensor_exprs(spec: LagrangianSpec, rho: float) -> list[list[Expr]]:
    vd = spec.varderivs
    D = spec.dim
    out = []
    for mu in range(D):
        row = []
        for nu in range(D):
            e = alg.ZERO
            for c in spec.components:
                e = e + Expr.const(_lower(spec, nu)) * vd.momentum(c, mu) * vd.momentum(c, nu)
                if mu == nu:
                    f = vd.dL_dphi[c]
                    pp = sum((Expr.const(_lower(spec, a)) * vd.momentum(c, a) * vd.momentum(c, a) for a in range(D)), alg.ZERO)
                    e = e - Expr.const(0.5) * (Expr.const(rho) * f * f + pp)
            row.append(e)
        out.append(row)
    return out


def k_tensor(spec: LagrangianSpec, block: FieldBlock, rho: float | None = None) -> TensorField:
    """K^mu_nu = P^mu P_nu - 1/2 delta^mu_nu [rho (dL/dphi)^2 + P^a P_a] per component, summed."""
    found = check_k_condition(spec)
    if found is None:
        raise Refusal("no-rho")
    rho = found if rho is None else float(rho)
    exprs = k_tensor_exprs(spec, rho)
    periodic = not _has_spatial_coord([e for row in exprs for e in row])
    jet = Jet(block)
    vals = np.stack([_eval_vector(jet, row) for row in exprs])
    return TensorField(block.grid, real_if_close(vals), "K", "k-tensor", periodic_space=periodic)


def fit_proportionality(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Least-squares kappa with a ~ kappa b, and max |a - kappa b| / max |b|."""
    a, b = np.ravel(a), np.ravel(b)
    denom = float(np.dot(b, b))
    kappa = float(np.dot(a, b) / denom) if denom else 0.0
    scale = float(np.max(np.abs(b))) or 1.0
    return kappa, float(np.max(np.abs(a - kappa * b))) / scale


# --------------------------------------------------------------------------
# currents generated by the energy-momentum tensor

@dataclass
class ConditionCheck:
    symbolic_zero: bool
    symbolic_residual: str
    block_max: float
    sampled_max: float


def theta_consistency(spec: LagrangianSpec, theta: Expr) -> Expr:
    """Largest-coefficient witness of explicit d_mu L - D_mu theta (zero when consistent)."""
    L = spec.numeric
    worst = alg.ZERO
    for mu in range(spec.dim):
        r = alg.explicit_partial(L, mu) - alg.total_derivative(theta, mu)
        if r.max_coeff() > worst.max_coeff():
            worst = r
    return worst


def theta_curl_residual(spec: LagrangianSpec, block: FieldBlock) -> float:
    """max over pairs of |d_nu g_mu - d_mu g_nu| with g_mu the explicit d_mu L on the block."""
    jet = Jet(block)
    g = [np.array(jet.eval(alg.explicit_partial(spec.numeric, mu))) for mu in range(spec.dim)]
    worst = 0.0
    mask = interior_mask(block.grid)
    for mu in range(spec.dim):
        for nu in range(mu + 1, spec.dim):
            c = partial(g[mu], block.grid, nu, False) - partial(g[nu], block.grid, mu, False)
            worst = max(worst, float(np.max(np.abs(c[mask]))))
    return worst


def general_condition_expr(spec: LagrangianSpec, f: Sequence[Expr], vel: Velocity, theta: Expr) -> Expr:
    """LHS + RHS of the T-generator identity; zero for every motion when it holds."""
    vd = spec.varderivs
    L = spec.numeric
    D = spec.dim
    lhs = eps_derivative_expr(spec, vel)
    rhs = alg.ZERO
    for mu in range(D):
        for al in range(D):
            df = alg.explicit_partial(f[al], mu)
            if df.is_zero():
                continue
            t = sum((vd.momentum(c, mu) * alg.fld(c, al) for c in spec.components), alg.ZERO)
            if mu == al:
                t = t - (L - theta)
            rhs = rhs + t * df
    return lhs + rhs


def random_motion(spec: LagrangianSpec, grid: LatticeGrid, seed: int = 0) -> FieldBlock:
    """A smooth field configuration that is not a solution (for off-shell identities)."""
    from .dynamics import RandomSmooth

    a, _ = RandomSmooth(seed=seed, cutoff=2, amplitude=0.5, background=0.3).slices(spec, grid, 0.0)
    b, _ = RandomSmooth(seed=seed + 1, cutoff=2, amplitude=0.5, background=0.3).slices(spec, grid, 0.0)
    t = np.linspace(0.0, 1.0, grid.shape[0]).reshape((-1,) + (1,) * (grid.dim - 1))
    return FieldBlock(grid, {c: a[c] * np.cos(t) + b[c] * np.sin(t) for c in spec.components})


def condition_check(spec: LagrangianSpec, cond: Expr, block: FieldBlock, tol: float = 1e-10, seed: int = 0) -> ConditionCheck:
    """Symbolic verdict plus the largest value on the block and on a random motion."""
    scale = max(spec.numeric.max_coeff(), 1.0)
    mask = interior_mask(block.grid)
    on_block = float(np.max(np.abs(Jet(block).eval(cond)[mask]))) if not cond.is_zero() else 0.0
    sampled = float(np.max(np.abs(Jet(random_motion(spec, block.grid, seed)).eval(cond)[mask]))) if not cond.is_zero() else 0.0
    return ConditionCheck(alg.is_identically_zero(cond, scale, tol), alg.to_text(cond), on_block, sampled)


def current_from_T_general(
    spec: LagrangianSpec,
    block: FieldBlock,
    f_field,
    varphi_family: PerturbationFamily | None = None,
    theta=None,
    tol: float = 1e-10,
) -> CurrentField:
    """j^mu = [P^mu d_a phi - (L - theta) delta^mu_a] f^a + P^mu w, w the family velocity."""
    D = spec.dim
    f = as_vector_exprs(f_field, D)
    theta = alg.ZERO if theta is None else _as_coordinate_expr(theta, D) if not isinstance(theta, Expr) else theta
    witness = theta_consistency(spec, theta)
    L = spec.numeric
    scale = max(L.max_coeff(), 1.0)
    if not alg.is_identically_zero(witness, scale, tol):
        raise Refusal("theta-inconsistent", f"residual {alg.to_text(witness.chop())}")
    vel = (varphi_family.velocity(spec) if varphi_family is not None else Velocity({c: alg.ZERO for c in spec.components}))
    cond = general_condition_expr(spec, f, vel, theta).chop(1e-14)
    check = condition_check(spec, cond, block, tol)
    if not check.symbolic_zero:
        raise Refusal("condition-violated", f"residual {check.symbolic_residual}")
    vd = spec.varderivs
    exprs = []
    for mu in range(D):
        e = alg.ZERO
        for al in range(D):
            t = sum((vd.momentum(c, mu) * alg.fld(c, al) for c in spec.components), alg.ZERO)
            if mu == al:
                t = t - (L - theta)
            e = e + t * f[al]
        exprs.append(e)
    jet = Jet(block)
    base = _eval_vector(jet, exprs)
    w_part = _eval_vector(jet, flux_exprs(spec, vel), vel.factor)
    periodic = not _has_spatial_coord(exprs + list(flux_exprs(spec, vel)))
    return CurrentField(block.grid, real_if_close(base + w_part), "T-generated", "T-generated", periodic, {"condition": check})


def current_from_T(spec: LagrangianSpec, block: FieldBlock, f_field, varphi_family: PerturbationFamily | None = None) -> CurrentField:
    """Spacetime-independent special case: j^mu = T^mu_a f^a + P^mu w."""
    _require_independent(spec, "the T-generated current")
    return current_from_T_general(spec, block, f_field, varphi_family, None)


# --------------------------------------------------------------------------
# scaling currents

def scaling_dimension(D: int) -> float:
    return (D - 2) / 2.0


def _scaling_preconditions(spec: LagrangianSpec):
    D = spec.dim
    if D == 2:
        raise Refusal("dimension-two", "scaling dimension Delta_2 = 0")
    if not check_spacetime_independence(spec):
        raise Refusal("spacetime-dependent", "scaling currents need a density without explicit coordinates")
    cf = canonical_form(spec.numeric, spec.components, D)
    if cf is None:
        raise Refusal("not-canonical")
    delta = scaling_dimension(D)
    k = D / delta
    if not is_homogeneous_of_degree(cf.potential, spec.components, k):
        raise Refusal("wrong-homogeneity", f"need degree {k:g} for D = {D}")
    return cf, delta


def scaling_current_exprs(spec: LagrangianSpec):
    """Symbolic J^mu and H^{mu nu}; preconditions enforced."""
    cf, delta = _scaling_preconditions(spec)
    D = spec.dim
    vd = spec.varderivs
    T = _em_exprs(spec)
    x = position_vector(D)
    eta = [_lower(spec, m) for m in range(D)]
    J = []
    for mu in range(D):
        e = sum((Expr.const(delta) * alg.fld(c) * vd.momentum(c, mu) for c in spec.components), alg.ZERO)
        e = e + sum((x[a] * T[mu][a] for a in range(D)), alg.ZERO)
        J.append(e)
    X = alg.ZERO
    comps = spec.components
    for i, a in enumerate(comps):
        for j, b in enumerate(comps):
            if cf.gram[i, j]:
                X = X + Expr.const(cf.gram[i, j]) * alg.fld(a) * alg.fld(b)
    x2 = sum((Expr.const(eta[a]) * x[a] * x[a] for a in range(D)), alg.ZERO)
    H = []
    for mu in range(D):
        row = []
        for nu in range(D):
            e = Expr.const(0.5) * x2 * T[mu][nu] * Expr.const(eta[nu]) - x[nu] * J[mu]
            if mu == nu:
                e = e + Expr.const(0.5 * delta * eta[mu]) * X
            row.append(e)
        H.append(row)
    return J, H, cf


def scaling_currents(spec: LagrangianSpec, block: FieldBlock) -> tuple[CurrentField, TensorField]:
    """J^mu = Delta phi d^mu phi + x^a T^mu_a and H^{mu nu} = 1/2 Delta eta X + 1/2 x^2 T^{mu nu} - x^nu J^mu.

    X = G_ab phi_a phi_b (phi^2 for a real field, 2|phi|^2 for a complex one).
    """
    J, H, cf = scaling_current_exprs(spec)
    jet = Jet(block)
    Jv = _eval_vector(jet, J)
    Hv = np.stack([_eval_vector(jet, row) for row in H])
    meta = {"gram": cf.gram.tolist(), "delta": scaling_dimension(spec.dim)}
    return (
        CurrentField(block.grid, Jv, "J", "scaling", False, meta),
        TensorField(block.grid, Hv, "H", "scaling", "contravariant", False),
    )


def distance_radicand(T: TensorField, J: CurrentField, H: TensorField) -> np.ndarray:
    """2 H^mu_mu - x^2 T^mu_mu + 2 x_mu J^mu on every site."""
    g = T.grid
    D = g.dim
    eta = [1.0] + [-1.0] * (D - 1)
    Hc = H.contravariant()
    x = [g.coordinate(m) for m in range(D)]
    trH = sum(eta[m] * Hc[m, m] for m in range(D))
    x2 = sum(eta[m] * x[m] * x[m] for m in range(D))
    xJ = sum(eta[m] * x[m] * J.values[m] for m in range(D))
    return 2.0 * trH - x2 * T.trace() + 2.0 * xJ


def distance_from_origin(T: TensorField, J: CurrentField, H: TensorField, D: int | None = None, weight: float = 1.0, tol: float = 1e-9) -> ScalarLatticeField:
    """|phi| rebuilt from T, J and H alone.

    ``weight`` is the ratio X / |phi|^2 (1 for a real field, 2 for a complex
    one).  Negative radicands below ``-tol`` times the largest magnitude are
    flagged with a warning and clamped at zero.
    """
    D = T.grid.dim if D is None else D
    delta = scaling_dimension(D)
    if delta == 0:
        raise Refusal("dimension-two")
    r = distance_radicand(T, J, H) / (D * delta * weight)
    scale = float(np.max(np.abs(r))) or 1.0
    neg = r < -tol * scale
    if np.any(neg):
        warnings.warn(f"{int(np.sum(neg))} sites with negative radicand (min {float(np.min(r)):.3e}); clamped to 0")
    return ScalarLatticeField(T.grid, np.sqrt(np.maximum(r, 0.0)))


# --------------------------------------------------------------------------
# dissipative theories

def dissipative_current_exprs(spec: LagrangianSpec, normalization: str = "trace") -> tuple[list[Expr], tuple[float, ...]]:
    w = exponential_weight(spec.numeric, spec.dim)
    if w is None:
        raise Refusal("not-dissipative-form")
    cf = canonical_form(w.inner, spec.components, spec.dim)
    if cf is None or any(isinstance(a, Coord) for a in w.inner.atoms()):
        raise Refusal("not-canonical", "the undamped density must be 1/2 G d(phi).d(phi) - U(phi)")
    if not is_homogeneous_of_degree(cf.potential, spec.components, 2):
        raise Refusal("wrong-homogeneity", "need degree 2")
    c = damping_vector(spec, normalization)
    vd = spec.varderivs
    L = spec.numeric
    D = spec.dim
    out = []
    for mu in range(D):
        e = alg.ZERO
        for comp in spec.components:
            v = alg.fld(comp) + sum((Expr.const(c[n]) * alg.fld(comp, n) for n in range(D)), alg.ZERO)
            e = e + vd.momentum(comp, mu) * v
        out.append(e - Expr.const(c[mu]) * L)
    return out, c


def dissipative_current(spec: LagrangianSpec, block: FieldBlock, normalization: str = "trace", jet: Jet | None = None) -> CurrentField:
    """j^mu = exp(h.x) (phi P_L^mu + c^nu T_L^mu_nu) with h_nu c^nu = 2."""
    exprs, c = dissipative_current_exprs(spec, normalization)
    jet = jet or Jet(block)
    vals = _eval_vector(jet, exprs)
    periodic = not _has_spatial_coord(exprs)
    return CurrentField(block.grid, vals, "dissipative", "dissipative", periodic, {"c": list(c), "normalization": normalization})


# --------------------------------------------------------------------------
# finite invariance

@dataclass
class FiniteInvarianceResult:
    xi: float
    deviation: float
    threshold: float
    accepted: bool


class NotFinitelyInvariant(Refusal):
    def __init__(self, result: FiniteInvarianceResult):
        self.result = result
        super().__init__("not-finitely-invariant", f"site std {result.deviation:.3e} > {result.threshold:.3e}")


def finite_invariance(spec: LagrangianSpec, block: FieldBlock, family: PerturbationFamily, rel: float = 1e-8) -> FiniteInvarianceResult:
    vel = family.velocity(spec)
    dens = np.array(Jet(block).eval(eps_derivative_expr(spec, vel))) * vel.factor
    v = dens[interior_mask(block.grid)]
    mean = complex(np.mean(v)) if np.iscomplexobj(v) else float(np.mean(v))
    std = float(np.std(v))
    threshold = rel * (1.0 + abs(mean))
    xi = mean.real if isinstance(mean, complex) and abs(mean.imag) <= threshold else mean
    return FiniteInvarianceResult(xi, std, threshold, std <= threshold and not isinstance(xi, complex))


def finite_invariance_current(spec: LagrangianSpec, block: FieldBlock, family: PerturbationFamily, rel: float = 1e-8):
    """(result, j^mu = P^mu v - xi x^mu) or NotFinitelyInvariant."""
    res = finite_invariance(spec, block, family, rel)
    if not res.accepted:
        raise NotFinitelyInvariant(res)
    vel = family.velocity(spec)
    flux_e = flux_exprs(spec, vel)
    jet = Jet(block)
    vals = _eval_vector(jet, flux_e, vel.factor)
    g = block.grid
    if res.xi != 0.0:
        vals = vals - res.xi * np.stack([np.broadcast_to(g.coordinate(m), g.shape) for m in range(g.dim)])
    periodic = not _has_spatial_coord(flux_e) and res.xi == 0.0
    return res, CurrentField(g, vals, f"finite-invariance[{family.label()}]", "finite-invariance", periodic, {"xi": res.xi})


# --------------------------------------------------------------------------
# verification

@dataclass
class VerificationEntry:
    current: str
    theorem: str
    grid: dict
    residual_l2: float
    residual_linf: float
    charge_times: list
    charge_series: list
    drift: float
    convergence_order: float | None = None
    passed: bool | None = None
    relative_residual: float | None = None

    def to_json(self) -> dict:
        return {
            "current": self.current,
            "theorem": self.theorem,
            "grid": self.grid,
            "residual_l2": self.residual_l2,
            "residual_linf": self.residual_linf,
            "relative_residual": self.relative_residual,
            "charge_series": [[t, q] for t, q in zip(self.charge_times, self.charge_series)],
            "drift": self.drift,
            "convergence_order": self.convergence_order,
            "pass": self.passed,
        }


def charge_series(j: CurrentField) -> np.ndarray:
    """Q(t) = int j^0 over space on every slice."""
    g = j.grid
    return np.real_if_close(spatial_integral(j.values[0], g, "torus" if j.periodic_space else "box"))


def relative_drift(q: np.ndarray, floor: float = 1e-12) -> float:
    """max |Q - Q0| / |Q0|, absolute when Q0 is negligible."""
    q = np.asarray(q)
    if q.size == 0:
        return 0.0
    q0 = q[0]
    ref = max(float(np.max(np.abs(q))), 1.0)
    d = float(np.max(np.abs(q - q0)))
    return float(d / abs(q0)) if abs(q0) > floor * ref else d


def divergence_scale(j: CurrentField, margin: int = 2) -> float:
    """L2 norm of sum_mu |d_mu j^mu|, the size the divergence would have without cancellation."""
    g = j.grid
    sm = 0 if j.periodic_space else 1
    acc = np.abs(partial(j.values[0], g, 0))
    for mu in range(1, g.dim):
        acc = acc + np.abs(partial(j.values[mu], g, mu, j.periodic_space))
    return l2_norm(acc, g, margin, sm)


def verify_current(
    j: CurrentField,
    grid: LatticeGrid | None = None,
    margin: int = 2,
    drift_tol: float | None = None,
    residual_tol: float | None = None,
    rel_tol: float | None = None,
) -> VerificationEntry:
    """Divergence norms over interior slices and the charge drift of one current.

    Currents that are not spatially periodic also drop the outermost spatial
    rows, where the divergence falls back to one-sided stencils.  The relative
    residual divides the divergence norm by :func:`divergence_scale`.
    """
    g = grid or j.grid
    sm = 0 if j.periodic_space else 1
    div = j.divergence()
    q = charge_series(j)
    inner = slice(margin, g.shape[0] - margin)
    times = g.times()
    drift = float(relative_drift(q[inner]))
    l2, linf = l2_norm(div, g, margin, sm), linf_norm(div, g, margin, sm)
    scale = divergence_scale(j, margin)
    rel = float(l2 / scale) if scale > 0 else (0.0 if l2 == 0 else float("inf"))
    passed = None
    if drift_tol is not None or residual_tol is not None or rel_tol is not None:
        passed = bool(
            (drift_tol is None or drift <= drift_tol)
            and (residual_tol is None or l2 <= residual_tol)
            and (rel_tol is None or rel <= rel_tol)
        )
    return VerificationEntry(
        j.name, j.theorem, g.to_json(), l2, linf, [float(t) for t in times], [float(np.real(x)) for x in q], drift, None, passed, rel
    )
