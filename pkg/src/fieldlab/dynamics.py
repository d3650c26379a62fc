"""Explicit leapfrog evolution of the Euler-Lagrange equation and its oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .dsl import algebra as alg
from .dsl.algebra import Coord, Expr, Fld
from .dsl.lagrangian import LagrangianSpec
from .jet import FieldBlock, Jet
from .lattice import LatticeGrid, ScalarLatticeField, diff_axis, second_diff_axis, spacetime_grid


class NumericalAbort(RuntimeError):
    def __init__(self, step: int, message: str = "non-finite value produced"):
        self.step = step
        super().__init__(f"{message} at step {step}")


class UnsupportedTheoryError(ValueError):
    pass


# --------------------------------------------------------------------------
# initial data

def _spatial_coords(grid: LatticeGrid) -> list[np.ndarray]:
    """Spatial coordinate arrays broadcast over one time slice."""
    out = []
    for i in range(1, grid.dim):
        shape = [1] * (grid.dim - 1)
        shape[i - 1] = grid.shape[i]
        out.append(grid.axis_values(i).reshape(shape))
    return out


def check_commensurate(k, grid: LatticeGrid, tol: float = 1e-9) -> None:
    for ki, L in zip(k, grid.periods):
        n = ki * L / (2 * math.pi)
        if abs(n - round(n)) > tol * max(1.0, abs(n)):
            raise ValueError(f"wave number {ki} is not commensurate with period {L}")


@dataclass(frozen=True)
class PlaneWave:
    """A cos(omega t - k.x) (real) or A exp(i(omega t - k.x)) (complex)."""

    amplitude: float = 1.0
    k: tuple[float, ...] = ()
    mass: float = 0.0

    def omega(self) -> float:
        return math.sqrt(sum(ki * ki for ki in self.k) + self.mass**2)

    def slices(self, spec: LagrangianSpec, grid: LatticeGrid, t: float):
        k = tuple(self.k) + (0.0,) * (grid.dim - 1 - len(self.k))
        check_commensurate(k, grid)
        w = self.omega()
        xs = _spatial_coords(grid)
        phase = w * t - sum((ki * x for ki, x in zip(k, xs)), np.zeros(grid.spatial_shape))
        phase = np.broadcast_to(phase, grid.spatial_shape)
        values, rates = {}, {}
        for f in spec.fields:
            if f.kind == "complex":
                a, b = f.components
                z = self.amplitude * np.exp(1j * phase)
                values[a], rates[a] = z, 1j * w * z
                values[b], rates[b] = np.conj(z), np.conj(1j * w * z)
            else:
                values[f.name] = self.amplitude * np.cos(phase)
                rates[f.name] = -self.amplitude * w * np.sin(phase)
        return values, rates


@dataclass(frozen=True)
class GaussianPacket:
    """Periodized Gaussian bump on a constant background, released at rest.

    The distance to the center uses the chord sin(pi dx / L) L / pi so the
    profile is smooth on the torus.
    """

    center: tuple[float, ...] | None = None
    width: float = 0.25
    amplitude: float = 1.0
    background: float = 0.0

    def profile(self, grid: LatticeGrid) -> np.ndarray:
        xs = _spatial_coords(grid)
        periods = grid.periods
        center = self.center if self.center is not None else tuple(
            grid.origin[i + 1] + 0.5 * periods[i] for i in range(grid.dim - 1)
        )
        r2 = np.zeros(grid.spatial_shape)
        for x, c, L in zip(xs, center, periods):
            chord = np.sin(math.pi * (x - c) / L) * L / math.pi
            r2 = r2 + chord**2
        return self.background + self.amplitude * np.exp(-r2 / (2.0 * self.width**2))

    def slices(self, spec: LagrangianSpec, grid: LatticeGrid, t: float):
        p = self.profile(grid)
        values, rates = {}, {}
        for f in spec.fields:
            if f.kind == "complex":
                a, b = f.components
                values[a] = p.astype(complex)
                values[b] = p.astype(complex)
                rates[a] = np.zeros_like(values[a])
                rates[b] = np.zeros_like(values[b])
            else:
                values[f.name] = p
                rates[f.name] = np.zeros_like(p)
        return values, rates


@dataclass(frozen=True)
class RandomSmooth:
    """Random band-limited data: Fourier modes with |n|_inf <= cutoff."""

    seed: int = 0
    cutoff: int = 2
    amplitude: float = 0.1
    background: float = 0.0

    def _draw(self, rng, grid: LatticeGrid) -> np.ndarray:
        xs = _spatial_coords(grid)
        out = np.zeros(grid.spatial_shape)
        bound = 0.0
        ranges = [range(-self.cutoff, self.cutoff + 1)] * (grid.dim - 1)
        for n in np.array(np.meshgrid(*ranges, indexing="ij")).reshape(grid.dim - 1, -1).T:
            phase = sum(2 * math.pi * ni * (x - o) / L for ni, x, o, L in zip(n, xs, grid.origin[1:], grid.periods))
            a, b = rng.normal(size=2) / (1.0 + float(np.dot(n, n)))
            out = out + a * np.cos(phase) + b * np.sin(phase)
            bound += abs(a) + abs(b)
        # normalized by a bound on the coefficients, so the data do not depend on the sampling
        return self.background + self.amplitude * out / (bound if bound > 0 else 1.0)

    def slices(self, spec: LagrangianSpec, grid: LatticeGrid, t: float):
        rng = np.random.default_rng(self.seed)
        values, rates = {}, {}
        for f in spec.fields:
            if f.kind == "complex":
                a, b = f.components
                z = self._draw(rng, grid) + 1j * self._draw(rng, grid)
                r = self._draw(rng, grid) + 1j * self._draw(rng, grid)
                values[a], values[b] = z, np.conj(z)
                rates[a], rates[b] = r, np.conj(r)
            else:
                values[f.name] = self._draw(rng, grid)
                rates[f.name] = self._draw(rng, grid)
        return values, rates


InitialData = PlaneWave | GaussianPacket | RandomSmooth


@dataclass(frozen=True)
class EvolutionConfig:
    dt: float
    steps: int
    initial: object
    spatial_shape: tuple[int, ...] = (64,)
    box: tuple[float, ...] = (2 * math.pi,)
    courant_check: bool = True
    t0: float = 0.0
    spatial_origin: tuple[float, ...] | None = None

    def grid(self) -> LatticeGrid:
        return spacetime_grid(self.spatial_shape, self.box, self.dt, self.steps, self.t0, self.spatial_origin)


# --------------------------------------------------------------------------
# stepper

def euler_lagrange_expr(spec: LagrangianSpec) -> dict:
    """E_a = dL/dphi_a - D_mu (dL/d d_mu phi_a) per component, parameters substituted."""
    vd = spec.varderivs
    out = {}
    for c in spec.components:
        e = vd.dL_dphi[c]
        for mu in range(spec.dim):
            e = e - alg.total_derivative(vd.momentum(c, mu), mu)
        out[c] = e
    return out


def _is_time_derivative(a) -> bool:
    return isinstance(a, Fld) and 0 in a.derivs


class TheoryStepper:
    """Leapfrog update solved from E = M phi_tt + C phi_t + R = 0.

    M, C and R are read off the Euler-Lagrange expression symbolically.  The
    update (M/dt^2 + C/(2dt)) phi+ = M(2phi - phi-)/dt^2 + C phi-/(2dt) - R is
    the usual damped leapfrog and reduces to plain leapfrog when C = 0.
    """

    def __init__(self, spec: LagrangianSpec):
        self.spec = spec
        self.comps = spec.components
        self.el = euler_lagrange_expr(spec)
        n = len(self.comps)
        tt = [Fld(c, (0, 0)) for c in self.comps]
        t = [Fld(c, (0,)) for c in self.comps]
        self.M = [[alg.diff(self.el[a], tt[j]) for j in range(n)] for a in self.comps]
        zero_tt = lambda at: alg.ZERO if (isinstance(at, Fld) and at.order == 2 and 0 in at.derivs) else None
        e0 = {a: alg.substitute(self.el[a], zero_tt) for a in self.comps}
        self.C = [[alg.diff(e0[a], t[j]) for j in range(n)] for a in self.comps]
        zero_t = lambda at: alg.ZERO if (isinstance(at, Fld) and at.derivs == (0,)) else None
        self.R = {a: alg.substitute(e0[a], zero_t) for a in self.comps}
        self._validate(tt, t)
        self.constant_matrices = all(
            e.constant_value() is not None for row in self.M + self.C for e in row
        )

    def _validate(self, tt, t):
        for a in self.comps:
            for j, c in enumerate(self.comps):
                for i in range(1, self.spec.dim):
                    if not alg.diff(self.el[a], Fld(c, (0, i))).is_zero():
                        raise UnsupportedTheoryError("mixed time-space second derivatives in the field equation")
            for row in (self.M, self.C):
                for e in (row[self.comps.index(a)]):
                    if any(_is_time_derivative(x) for x in e.atoms()):
                        raise UnsupportedTheoryError("field equation is not affine in the time derivatives")
            if any(_is_time_derivative(x) for x in self.R[a].atoms()):
                raise UnsupportedTheoryError("field equation is not affine in the time derivatives")
        if all(m.is_zero() for row in self.M for m in row):
            raise UnsupportedTheoryError("no second time derivative: kinetic term lacks (d_0 phi)^2")

    # slice-level evaluation ------------------------------------------------
    def _lookup(self, grid: LatticeGrid, values: Mapping[str, np.ndarray], t: float, rates=None):
        xs = _spatial_coords(grid)
        cache: dict = {}

        def look(a):
            if a in cache:
                return cache[a]
            if isinstance(a, Coord):
                v = t if a.index == 0 else xs[a.index - 1]
            elif isinstance(a, Fld):
                if a.derivs == (0,) and rates is not None:
                    v = rates[a.name]
                elif 0 in a.derivs:
                    raise UnsupportedTheoryError(f"time derivative {a.text()} needed on a single slice")
                else:
                    v = values[a.name]
                    d = a.derivs
                    if len(d) == 1:
                        v = diff_axis(v, grid.spacing[d[0]], d[0] - 1, True)
                    elif len(d) == 2 and d[0] == d[1]:
                        v = second_diff_axis(v, grid.spacing[d[0]], d[0] - 1, True)
                    elif len(d) == 2:
                        v = diff_axis(diff_axis(v, grid.spacing[d[0]], d[0] - 1, True), grid.spacing[d[1]], d[1] - 1, True)
                    elif d:
                        raise NotImplementedError("third derivatives are not discretized")
            else:
                raise TypeError(f"cannot evaluate {a!r} on a slice")
            cache[a] = v
            return v

        return look

    def _coefficients(self, look, shape):
        n = len(self.comps)
        M = [[np.broadcast_to(alg.evaluate(self.M[i][j], look), shape) for j in range(n)] for i in range(n)]
        C = [[np.broadcast_to(alg.evaluate(self.C[i][j], look), shape) for j in range(n)] for i in range(n)]
        R = [np.broadcast_to(alg.evaluate(self.R[a], look), shape) for a in self.comps]
        return M, C, R

    @staticmethod
    def _solve(A, rhs):
        n = len(rhs)
        if n == 1:
            return [rhs[0] / A[0][0]]
        Am = np.stack([np.stack(row, axis=-1) for row in A], axis=-2)
        bm = np.stack(rhs, axis=-1)
        x = np.linalg.solve(Am, bm[..., None])[..., 0]
        return [x[..., i] for i in range(n)]

    def acceleration(self, grid: LatticeGrid, values, rates, t: float):
        """phi_tt from the field equation given phi and phi_t on one slice."""
        look = self._lookup(grid, values, t, rates)
        M, C, R = self._coefficients(look, grid.spatial_shape)
        n = len(self.comps)
        rhs = [-(R[i] + sum(C[i][j] * rates[self.comps[j]] for j in range(n))) for i in range(n)]
        return dict(zip(self.comps, self._solve(M, rhs)))

    def step(self, grid: LatticeGrid, prev, cur, t: float, dt: float | None = None):
        dt = grid.dt if dt is None else dt
        look = self._lookup(grid, cur, t)
        M, C, R = self._coefficients(look, grid.spatial_shape)
        n = len(self.comps)
        A = [[M[i][j] / dt**2 + C[i][j] / (2 * dt) for j in range(n)] for i in range(n)]
        rhs = []
        for i in range(n):
            r = -R[i]
            for j, c in enumerate(self.comps):
                r = r + M[i][j] * (2 * cur[c] - prev[c]) / dt**2 + C[i][j] * prev[c] / (2 * dt)
            rhs.append(r)
        return dict(zip(self.comps, self._solve(A, rhs)))

    def run(self, grid: LatticeGrid, prev, cur, steps: int, t_cur: float, direction: float = 1.0, start_index: int = 1):
        """Advance ``steps`` times from slices (prev, cur); returns the new slices."""
        out = []
        dt = grid.dt if direction > 0 else -grid.dt
        for s in range(steps):
            nxt = self.step(grid, prev, cur, t_cur, dt)
            if not all(np.all(np.isfinite(v)) for v in nxt.values()):
                raise NumericalAbort(start_index + s + 1)
            out.append(nxt)
            prev, cur = cur, nxt
            t_cur += dt
        return out


def _dtype(spec: LagrangianSpec):
    return complex if spec.is_complex else float


def courant_ok(grid: LatticeGrid, factor: float = 0.5) -> bool:
    return grid.dim == 1 or grid.dt <= factor * min(grid.spacing[1:]) * (1 + 1e-12)


def evolve(spec: LagrangianSpec, config: EvolutionConfig, stepper: TheoryStepper | None = None) -> FieldBlock:
    """Full spacetime block of ``config.steps + 1`` slices."""
    grid = config.grid()
    if config.courant_check and not courant_ok(grid):
        raise ValueError(f"dt={grid.dt} violates the Courant bound dt <= 0.5 * min spatial spacing")
    stepper = stepper or TheoryStepper(spec)
    phi0, pi0 = config.initial.slices(spec, grid, config.t0)
    dtype = _dtype(spec)
    phi0 = {c: np.asarray(phi0[c], dtype=dtype) for c in stepper.comps}
    pi0 = {c: np.asarray(pi0[c], dtype=dtype) for c in stepper.comps}
    return evolve_from(spec, grid, phi0, pi0, stepper)


def evolve_from(spec: LagrangianSpec, grid: LatticeGrid, phi0, pi0, stepper: TheoryStepper | None = None) -> FieldBlock:
    """Evolve Cauchy data (phi, phi_t) at the first slice of ``grid``."""
    stepper = stepper or TheoryStepper(spec)
    dt, t0 = grid.dt, grid.origin[0]
    for c in stepper.comps:
        if not (np.all(np.isfinite(phi0[c])) and np.all(np.isfinite(pi0[c]))):
            raise NumericalAbort(0, "non-finite initial data")
    acc = stepper.acceleration(grid, phi0, pi0, t0)
    phi1 = {c: phi0[c] + dt * pi0[c] + 0.5 * dt * dt * acc[c] for c in stepper.comps}
    if not all(np.all(np.isfinite(v)) for v in phi1.values()):
        raise NumericalAbort(1)
    rest = stepper.run(grid, phi0, phi1, grid.shape[0] - 2, t0 + dt)
    slices = [phi0, phi1] + rest
    comps = {c: np.stack([s[c] for s in slices]) for c in stepper.comps}
    return FieldBlock(grid, comps, {"theory": spec.source})


def evolve_backward(spec: LagrangianSpec, block: FieldBlock, stepper: TheoryStepper | None = None) -> dict:
    """Run the recurrence from the last two slices back to t0; returns the recovered first slice."""
    stepper = stepper or TheoryStepper(spec)
    grid = block.grid
    n = grid.shape[0]
    prev = {c: block[c][-1] for c in stepper.comps}
    cur = {c: block[c][-2] for c in stepper.comps}
    t_cur = grid.origin[0] + (n - 2) * grid.dt
    back = stepper.run(grid, prev, cur, n - 2, t_cur, direction=-1.0)
    return back[-1] if back else cur


# --------------------------------------------------------------------------
# residuals and oracles

def el_residual(spec: LagrangianSpec, block: FieldBlock, exact: Callable | None = None) -> dict:
    """Pointwise E_a on the block, one scalar lattice field per component."""
    if block.grid.shape[0] < 3:
        raise ValueError("el_residual needs at least 3 time slices")
    jet = Jet(block, exact)
    out = {}
    for c, e in euler_lagrange_expr(spec).items():
        v = jet.eval(e)
        out[c] = ScalarLatticeField(block.grid, np.array(v))
    return out


def exact_plane_wave(m: float, k_vector, amplitude: float, grid: LatticeGrid, complex_field: bool = False, name: str = "phi") -> FieldBlock:
    """Analytic plane wave sampled on every site of ``grid``."""
    k = tuple(k_vector) + (0.0,) * (grid.dim - 1 - len(tuple(k_vector)))
    check_commensurate(k, grid)
    w = math.sqrt(sum(x * x for x in k) + m * m)
    phase = w * grid.coordinate(0)
    for i, ki in enumerate(k, start=1):
        phase = phase - ki * grid.coordinate(i)
    phase = np.broadcast_to(phase, grid.shape)
    if complex_field:
        z = amplitude * np.exp(1j * phase)
        return FieldBlock(grid, {name: z, name + "star": np.conj(z)}, {"omega": w})
    return FieldBlock(grid, {name: amplitude * np.cos(phase)}, {"omega": w})


def interior_mask(grid: LatticeGrid, margin: int = 2, spatial_margin: int = 0) -> tuple:
    """Index tuple selecting sites at least ``margin`` slices from the time edges."""
    idx = [slice(margin, grid.shape[0] - margin)]
    for n in grid.shape[1:]:
        idx.append(slice(spatial_margin, n - spatial_margin) if spatial_margin else slice(None))
    return tuple(idx)


def l2_norm(values: np.ndarray, grid: LatticeGrid, margin: int = 2, spatial_margin: int = 0) -> float:
    """Discrete L2 norm over interior slices.

    With a spatial margin the mean square over the kept sites is scaled to the
    full spatial volume, so the measured region does not grow with resolution.
    """
    cell = grid.dt * grid.spatial_cell
    v = values[interior_mask(grid, margin, spatial_margin)]
    if v.size == 0:
        return 0.0
    kept = int(np.prod(v.shape[1:]))
    scale = int(np.prod(grid.spatial_shape)) / kept
    return float(np.sqrt(np.sum(np.abs(v) ** 2) * cell * scale))


def linf_norm(values: np.ndarray, grid: LatticeGrid, margin: int = 2, spatial_margin: int = 0) -> float:
    v = values[interior_mask(grid, margin, spatial_margin)]
    return float(np.max(np.abs(v))) if v.size else 0.0


# --------------------------------------------------------------------------
# convergence

class ConvergenceError(ValueError):
    pass


@dataclass
class ConvergenceResult:
    name: str
    spacings: list
    errors: list
    order: float | None
    exact: bool = False
    monotone: bool = True
    floor: float = 0.0

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "h": list(self.spacings),
            "error": list(self.errors),
            "order": self.order,
            "exact": self.exact,
            "monotone": self.monotone,
        }


def measure_order(name: str, spacings: Sequence[float], errors: Sequence[float], floor: float = 0.0) -> ConvergenceResult:
    """Least-squares slope of log(error) against log(h).

    Errors at or below ``floor`` (a rounding level) are reported as exact
    rather than producing a meaningless slope.
    """
    if len(spacings) < 3:
        raise ConvergenceError("need at least 3 resolutions")
    hs = np.asarray(spacings, float)
    es = np.abs(np.asarray(errors, float))
    if np.all(es <= floor):
        return ConvergenceResult(name, list(hs), list(es), None, exact=True, floor=floor)
    order_idx = np.argsort(-hs)
    e_sorted = es[order_idx]
    monotone = bool(np.all(np.diff(e_sorted) < 0))
    if np.any(es <= 0):
        return ConvergenceResult(name, list(hs), list(es), None, monotone=monotone, floor=floor)
    slope = float(np.polyfit(np.log(hs), np.log(es), 1)[0])
    return ConvergenceResult(name, list(hs), list(es), slope, monotone=monotone, floor=floor)


def convergence_study(run, resolutions: Sequence[int], floors: Mapping[str, float] | None = None) -> dict:
    """Run ``run(resolution) -> {name: (h, error)}`` per resolution and fit orders.

    ``run`` may also be an object with a ``refine`` method of that signature.
    """
    if len(resolutions) < 3:
        raise ConvergenceError("need at least 3 resolutions")
    fn = getattr(run, "refine", run)
    if fn is None or not callable(fn):
        raise ConvergenceError("nothing to refine")
    table: dict = {}
    for n in resolutions:
        for name, (h, err) in fn(n).items():
            table.setdefault(name, ([], []))
            table[name][0].append(h)
            table[name][1].append(err)
    if not table:
        raise ConvergenceError("nothing to refine")
    floors = floors if floors is not None else {}
    return {name: measure_order(name, hs, es, floors.get(name, 0.0)) for name, (hs, es) in table.items()}
