"""JSON scenarios: theory, grid, initial data and the checks to run on the evolved block."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import currents as cur
from . import families as fam
from .dsl import check_k_condition, check_spacetime_independence
from .dsl.parser import parse_expression
from .dsl.analysis import canonical_form, is_homogeneous_of_degree
from .dsl.lagrangian import LagrangianSpec, lower_node
from .dynamics import (
    ConvergenceError,
    EvolutionConfig,
    GaussianPacket,
    PlaneWave,
    RandomSmooth,
    courant_ok,
    evolve,
    exact_plane_wave,
    interior_mask,
    l2_norm,
)
from .errors import Refusal
from .jet import FieldBlock
from .presets import load_theory

SCENARIO_VERSION = 1
CHECKS = ("nonlocal", "T", "K", "T-generated", "scaling", "dissipative", "finite-invariance", "trivial-families")

DEFAULT_TOLERANCES = {
    "drift": 1e-4,
    "relative_residual": 0.05,
    "nonlocal": 1e-2,
    "trivial": 1e-2,
    "symmetry": 1e-12,
    "distance": 1e-11,
    "finite_invariance": 1e-8,
    "proportionality": 1e-10,
}


class RoundingFloors(dict):
    """Convergence floors: nonlocal constants at this level count as exact."""

    def __init__(self, level: float = 1e-11):
        super().__init__()
        self.level = level

    def get(self, name, default=0.0):
        return self.level if name.startswith(("nonlocal[", "trivial[")) else default


class ScenarioError(ValueError):
    """Malformed scenario file (exit code 2)."""


@dataclass(frozen=True)
class GridSpec:
    points: tuple[int, ...]
    box: tuple[float, ...]
    dt: float
    steps: int
    t0: float = 0.0
    origin: tuple[float, ...] | None = None

    @property
    def spacing(self) -> float:
        return min(L / n for L, n in zip(self.box, self.points))

    def scaled(self, n: int) -> "GridSpec":
        """Same box and duration with ``n`` points per axis and the same dt/h."""
        factor = n / self.points[0]
        pts = tuple(int(round(p * factor)) for p in self.points)
        return GridSpec(pts, self.box, self.dt / factor, int(round(self.steps * factor)), self.t0, self.origin)


@dataclass
class Scenario:
    name: str
    lagrangian: str
    grid: GridSpec
    initial: dict
    checks: tuple[str, ...] = ()
    params: dict = field(default_factory=dict)
    dim: int | None = None
    options: dict = field(default_factory=dict)
    seed: int = 0
    version: int = SCENARIO_VERSION
    raw: dict = field(default_factory=dict, repr=False)

    # -- construction ------------------------------------------------------

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        if not isinstance(d, dict):
            raise ScenarioError("scenario must be a JSON object")
        if "version" not in d:
            raise ScenarioError("scenario needs a 'version' field")
        if d["version"] != SCENARIO_VERSION:
            raise ScenarioError(f"unsupported scenario version {d['version']!r}")
        if "lagrangian" not in d:
            raise ScenarioError("scenario needs a 'lagrangian' (preset id or text)")
        g = d.get("grid", {})
        try:
            pts = g.get("points", 64)
            box = g.get("box", 2 * math.pi)
            dim = d.get("dim")
            spec_dim = dim if dim is not None else load_theory(d["lagrangian"], d.get("params")).dim
            nsp = spec_dim - 1
            pts = tuple(int(p) for p in (pts if isinstance(pts, list) else [pts] * nsp))
            box = tuple(float(b) for b in (box if isinstance(box, list) else [box] * nsp))
            if len(pts) != nsp or len(box) != nsp:
                raise ScenarioError(f"grid needs {nsp} spatial axes")
            h = min(L / n for L, n in zip(box, pts))
            dt = float(g["dt"]) if "dt" in g else float(g.get("dt_ratio", 0.5)) * h
            steps = int(g.get("steps", 100))
            origin = g.get("origin")
            grid = GridSpec(pts, box, dt, steps, float(g.get("t0", 0.0)), tuple(float(o) for o in origin) if origin else None)
        except (TypeError, ValueError, KeyError) as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"bad grid: {exc}") from None
        checks = d.get("checks", [])
        if not isinstance(checks, list):
            raise ScenarioError("'checks' must be a list")
        return cls(
            name=str(d.get("name", "scenario")),
            lagrangian=d["lagrangian"],
            grid=grid,
            initial=dict(d.get("initial", {"kind": "plane-wave", "k": [1.0]})),
            checks=tuple(str(c) for c in checks),
            params=dict(d.get("params", {})),
            dim=d.get("dim"),
            options=dict(d.get("options", {})),
            seed=int(d.get("seed", 0)),
            raw=copy.deepcopy(d),
        )

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario: {exc}") from None
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        return cls.from_dict(d)

    def with_seed(self, seed: int) -> "Scenario":
        out = copy.copy(self)
        out.seed = int(seed)
        return out

    def echo(self) -> dict:
        return {
            "version": self.version,
            "name": self.name,
            "lagrangian": self.lagrangian,
            "params": self.params,
            "dim": self.dim,
            "grid": {
                "points": list(self.grid.points),
                "box": list(self.grid.box),
                "dt": self.grid.dt,
                "steps": self.grid.steps,
                "t0": self.grid.t0,
                "origin": list(self.grid.origin) if self.grid.origin else None,
            },
            "initial": self.initial,
            "checks": list(self.checks),
            "options": self.options,
            "seed": self.seed,
        }

    # -- pieces ------------------------------------------------------------

    def theory(self) -> LagrangianSpec:
        return load_theory(self.lagrangian, self.params or None, self.dim)

    def tolerance(self, key: str) -> float:
        return float(self.options.get("tolerances", {}).get(key, DEFAULT_TOLERANCES[key]))

    def evolution_config(self, spec: LagrangianSpec, grid: GridSpec | None = None) -> EvolutionConfig:
        g = grid or self.grid
        return EvolutionConfig(g.dt, g.steps, initial_data(self.initial, spec, self.seed), g.points, g.box, True, g.t0, g.origin)

    def families_for(self, check: str, spec: LagrangianSpec) -> list[fam.PerturbationFamily]:
        key = {"nonlocal": "nonlocal_families", "trivial-families": "trivial_families", "finite-invariance": "invariance_families"}[check]
        items = self.options.get(key)
        if items is None:
            if check == "finite-invariance":
                items = ["phase"] if spec.is_complex else [{"kind": "spacetime-shift", "a": [1.0] + [0.0] * (spec.dim - 1)}]
            else:
                items = ["field-shift-const", "field-scale"]
        return [family_from_json(x, spec.dim) for x in items]

    # -- validation --------------------------------------------------------

    def validate(self, spec: LagrangianSpec | None = None) -> LagrangianSpec:
        """Raise :class:`Refusal` (or ScenarioError) if a requested check cannot apply."""
        spec = spec or self.theory()
        for c in self.checks:
            if c not in CHECKS:
                raise Refusal("unknown-check", c)
        if len(self.grid.points) != spec.dim - 1:
            raise ScenarioError(f"grid has {len(self.grid.points)} spatial axes, theory needs {spec.dim - 1}")
        independent = check_spacetime_independence(spec)
        for c in self.checks:
            if c == "T" and not independent:
                raise Refusal("spacetime-dependent", "conservation of T needs a density without explicit coordinates")
            if c == "K" and check_k_condition(spec) is None:
                raise Refusal("no-rho")
            if c == "T-generated" and not independent and "theta" not in self.options:
                raise Refusal("spacetime-dependent", "supply options.theta for a coordinate-dependent density")
            if c == "scaling":
                cur.scaling_current_exprs(spec)
            if c == "dissipative":
                cur.dissipative_current_exprs(spec, self.options.get("normalization", "trace"))
            if c in ("nonlocal", "trivial-families", "finite-invariance"):
                for f in self.families_for(c, spec):
                    f.velocity(spec)
        from .lattice import spacetime_grid

        grid = spacetime_grid(self.grid.points, self.grid.box, self.grid.dt, self.grid.steps, self.grid.t0, self.grid.origin)
        if not courant_ok(grid):
            raise ScenarioError(f"dt={self.grid.dt:g} violates dt <= 0.5 h")
        return spec

    # -- running -----------------------------------------------------------

    def run(self, grid: GridSpec | None = None) -> "RunResult":
        spec = self.validate()
        block = evolve(spec, self.evolution_config(spec, grid))
        return run_checks(self, spec, block)

    def refine(self, n: int) -> dict:
        """Errors keyed by check name at ``n`` points per spatial axis."""
        if not self.checks and not _has_exact(self, self.theory()):
            raise ConvergenceError("nothing to refine")
        g = self.grid.scaled(n)
        spec = self.validate()
        block = evolve(spec, self.evolution_config(spec, g))
        res = run_checks(self, spec, block)
        h = g.spacing
        out = {name: (h, err) for name, err in res.errors.items()}
        exact = _field_error(self, spec, block)
        if exact is not None:
            out["field-error"] = (h, exact)
        if not out:
            raise ConvergenceError("nothing to refine")
        return out


def initial_data(d: dict, spec: LagrangianSpec, seed: int = 0):
    kind = d.get("kind", "plane-wave")
    if kind == "plane-wave":
        mass = d.get("mass")
        if mass is None:
            mass = float(spec.params.get("m") or 0.0) if "m" in spec.params else 0.0
        return PlaneWave(float(d.get("amplitude", 1.0)), tuple(float(k) for k in d.get("k", [1.0])), float(mass))
    if kind == "gaussian":
        c = d.get("center")
        return GaussianPacket(
            tuple(float(x) for x in c) if c else None,
            float(d.get("width", 0.25)),
            float(d.get("amplitude", 1.0)),
            float(d.get("background", 0.0)),
        )
    if kind == "random-smooth":
        return RandomSmooth(int(d.get("seed", seed)), int(d.get("cutoff", 2)), float(d.get("amplitude", 0.1)), float(d.get("background", 0.0)))
    raise ScenarioError(f"unknown initial data kind {kind!r}")


def family_from_json(x: Any, dim: int) -> fam.PerturbationFamily:
    if isinstance(x, str):
        x = {"kind": x}
    if not isinstance(x, dict) or "kind" not in x:
        raise ScenarioError(f"bad family entry {x!r}")
    k = x["kind"]
    if k == "spacetime-shift":
        return fam.spacetime_shift(x.get("a", [1.0] + [0.0] * (dim - 1)))
    if k == "momentum-field-shift":
        return fam.momentum_shift(x.get("b", [1.0] + [0.0] * (dim - 1)))
    if k == "dissipative-mixed":
        return fam.dissipative_mixed(x.get("normalization", "trace"))
    if k == "mixed-general":
        f = [_coordinate_expr(e, dim) for e in x.get("f", [0.0] * dim)]
        inner = family_from_json(x["inner"], dim) if "inner" in x else None
        return fam.mixed_general(f, inner)
    if k == "custom":
        return fam.custom({c: _coordinate_expr(e, dim) for c, e in x.get("velocity", {}).items()})
    if k not in fam.KINDS:
        raise ScenarioError(f"unknown family kind {k!r}")
    return fam.PerturbationFamily(k)


def _coordinate_expr(e, dim: int):
    return cur.as_vector_exprs([e], 1)[0] if not isinstance(e, str) else lower_node(parse_expression(e)[0], dim)


# --------------------------------------------------------------------------
# results

@dataclass
class RunResult:
    entries: list = field(default_factory=list)  # (CurrentField, VerificationEntry)
    checks: dict = field(default_factory=dict)
    nonlocal_rows: list = field(default_factory=list)  # (t1, family, value)
    errors: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(_ok(c.get("pass")) for c in self.checks.values())


def slice_norms(j: cur.CurrentField, margin: int = 2) -> list[tuple[float, float, float, float]]:
    """(t, Q, L2, Linf) of the divergence on each interior slice."""
    g = j.grid
    div = j.divergence()
    q = cur.charge_series(j)
    sm = 0 if j.periodic_space else 1
    spatial = tuple(slice(sm, n - sm) if sm else slice(None) for n in g.spatial_shape)
    scale = int(np.prod(g.spatial_shape)) / max(int(np.prod([n - 2 * sm for n in g.spatial_shape])), 1)
    times = g.times()
    rows = []
    for k in range(margin, g.shape[0] - margin):
        d = np.abs(div[(k,) + spatial])
        l2 = float(np.sqrt(np.sum(d**2) * g.spatial_cell * scale))
        rows.append((float(times[k]), float(np.real(q[k])), l2, float(np.max(d)) if d.size else 0.0))
    return rows


def _verify(res: RunResult, sc: Scenario, j: cur.CurrentField, key: str | None = None) -> cur.VerificationEntry:
    if j.periodic_space:
        e = cur.verify_current(j, drift_tol=sc.tolerance("drift"))
    else:
        e = cur.verify_current(j, rel_tol=sc.tolerance("relative_residual"))
    res.entries.append((j, e))
    res.errors[key or j.name] = e.residual_l2
    return e


def _ok(flag) -> bool:
    # flags may be numpy booleans, for which an identity test against False is wrong
    return flag is None or bool(flag)


def _entries_pass(entries) -> bool:
    return all(_ok(e.passed) for e in entries)


def _normalize_flags(obj):
    if isinstance(obj, dict):
        return {k: (None if v is None else bool(v)) if k == "pass" else _normalize_flags(v) for k, v in obj.items()}
    return obj


def run_checks(sc: Scenario, spec: LagrangianSpec, block: FieldBlock) -> RunResult:
    res = RunResult()
    for check in sc.checks:
        if check == "T":
            T = cur.energy_momentum(spec, block)
            ents = [_verify(res, sc, c) for c in T.columns()]
            res.errors["T"] = max(e.residual_l2 for e in ents)
            sym = cur.symmetry_defect(T)
            res.checks["T"] = {
                "columns": [e.current for e in ents],
                "symmetry_defect": sym,
                "pass": _entries_pass(ents) and sym <= sc.tolerance("symmetry"),
            }
        elif check == "K":
            rho = check_k_condition(spec)
            K = cur.k_tensor(spec, block)
            ents = [_verify(res, sc, c) for c in K.columns()]
            res.errors["K"] = max(e.residual_l2 for e in ents)
            sym = cur.symmetry_defect(K)
            info: dict = {"rho": rho, "symmetry_defect": sym}
            if "m" in spec.params and spec.params["m"]:
                info["rho_stated"] = 1.0 / (2.0 * float(spec.params["m"]) ** 2)
            ok = _entries_pass(ents) and sym <= sc.tolerance("symmetry")
            if check_spacetime_independence(spec):
                T = cur.energy_momentum(spec, block)
                kappa, dev = cur.fit_proportionality(K.mixed(), T.mixed())
                info.update(kappa=kappa, proportionality_deviation=dev)
                if not spec.is_complex:
                    ok = ok and dev <= sc.tolerance("proportionality")
            info["pass"] = ok
            res.checks["K"] = info
        elif check == "T-generated":
            f = sc.options.get("f", [1.0] + [0.0] * (spec.dim - 1))
            varphi = family_from_json(sc.options["varphi"], spec.dim) if "varphi" in sc.options else None
            theta = sc.options.get("theta")
            j = cur.current_from_T_general(spec, block, f, varphi, theta)
            e = _verify(res, sc, j)
            res.checks["T-generated"] = {"pass": _ok(e.passed)}
        elif check == "scaling":
            res.checks["scaling"] = _scaling(sc, spec, block, res)
        elif check == "dissipative":
            norm = sc.options.get("normalization", "trace")
            j = cur.dissipative_current(spec, block, norm)
            e = _verify(res, sc, j)
            res.checks["dissipative"] = {"c": list(j.meta["c"]), "normalization": norm, "pass": _ok(e.passed)}
        elif check == "finite-invariance":
            out = {}
            for f in sc.families_for(check, spec):
                r = cur.finite_invariance(spec, block, f, sc.tolerance("finite_invariance"))
                item: dict = {"accepted": r.accepted, "xi": r.xi if not isinstance(r.xi, complex) else abs(r.xi), "deviation": r.deviation}
                if r.accepted:
                    _, j = cur.finite_invariance_current(spec, block, f, sc.tolerance("finite_invariance"))
                    e = _verify(res, sc, j)
                    item["pass"] = _ok(e.passed)
                else:
                    item["refusal"] = "not-finitely-invariant"
                out[f.label()] = item
            expect = sc.options.get("expect_invariant")
            ok = all(v.get("pass", True) for v in out.values())
            if expect is not None:
                ok = ok and all(v["accepted"] == bool(expect) for v in out.values())
            res.checks["finite-invariance"] = {"families": out, "pass": ok}
        elif check in ("nonlocal", "trivial-families"):
            out = {}
            ok = True
            for f in sc.families_for(check, spec):
                rep = cur.nonlocal_constant(spec, block, f)
                for t, v in zip(rep.times, rep.values):
                    res.nonlocal_rows.append((t, f.label(), float(np.real(v))))
                if check == "nonlocal":
                    good = rep.deviation <= sc.tolerance("nonlocal") * (1.0 + rep.max_abs)
                    if f.kind != "identity":
                        res.errors[f"nonlocal[{f.label()}]"] = rep.deviation
                else:
                    good = rep.max_abs <= sc.tolerance("trivial")
                    if f.kind != "identity":
                        res.errors[f"trivial[{f.label()}]"] = rep.max_abs
                ok = ok and good
                out[f.label()] = {"deviation": rep.deviation, "max_abs": rep.max_abs, "pass": good}
            res.checks[check] = {"families": out, "pass": ok}
    res.checks = {k: _normalize_flags(v) for k, v in res.checks.items()}
    return res


def _scaling(sc: Scenario, spec: LagrangianSpec, block: FieldBlock, res: RunResult) -> dict:
    T = cur.energy_momentum(spec, block)
    J, H = cur.scaling_currents(spec, block)
    ents = [_verify(res, sc, J, "J")]
    for nu, c in enumerate(H.columns()):
        ents.append(_verify(res, sc, c, f"H[{nu}]"))
    weight = 2.0 if spec.is_complex else 1.0
    rebuilt = cur.distance_from_origin(T, J, H, weight=weight).values
    phi = np.abs(block[spec.components[0]])
    mask = interior_mask(block.grid)
    err = float(np.max(np.abs(rebuilt[mask] - phi[mask]) / (1.0 + phi[mask])))
    witness = cur.asymmetry_witness(H)
    return {
        "distance_identity_error": err,
        "h_asymmetry_witness": _witness_json(witness),
        "pass": _entries_pass(ents) and err <= sc.tolerance("distance"),
    }


def _witness_json(w):
    if w is None:
        return None
    site, mu, nu, size = w
    return {"site": list(site), "mu": mu, "nu": nu, "difference": size}


def _has_exact(sc: Scenario, spec: LagrangianSpec) -> bool:
    if sc.initial.get("kind", "plane-wave") != "plane-wave" or not check_spacetime_independence(spec):
        return False
    cf = canonical_form(spec.numeric, spec.components, spec.dim)
    return cf is not None and is_homogeneous_of_degree(cf.potential, spec.components, 2)


def _field_error(sc: Scenario, spec: LagrangianSpec, block: FieldBlock) -> float | None:
    """L2 distance to the analytic plane wave for linear theories."""
    if not _has_exact(sc, spec):
        return None
    pw = initial_data(sc.initial, spec, sc.seed)
    exact = exact_plane_wave(pw.mass, pw.k, pw.amplitude, block.grid, spec.is_complex)
    c = spec.components[0]
    return l2_norm(np.abs(block[c] - exact[c]), block.grid)
