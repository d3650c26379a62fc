"""``fieldlab`` command line: parse a theory, run a scenario, or measure convergence orders.

Exit codes: 0 pass, 1 a check failed, 2 usage, parse error or refusal, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .dsl import ParseError, UnboundParameterError, IndexDisciplineError
from .dsl import algebra as alg
from .dsl import canonical_form, check_k_condition, check_spacetime_independence, detect_homogeneity, exponential_weight
from .dynamics import ConvergenceError, NumericalAbort, convergence_study
from .errors import Refusal
from .presets import PRESETS, load_theory
from .report import dumps, write_csv, write_json
from .scenario import RoundingFloors, Scenario, ScenarioError

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_ABORT = 0, 1, 2, 3


def _err(msg: str) -> None:
    print(f"fieldlab: {msg}", file=sys.stderr)


# --------------------------------------------------------------------------
# parse

def describe_theory(spec) -> dict:
    """Derived quantities printed by ``fieldlab parse``."""
    vd = spec.varderivs
    L = spec.numeric
    independent = check_spacetime_independence(spec)
    inner = L
    w = exponential_weight(L, spec.dim)
    if w is not None:
        inner = w.inner
    cf = canonical_form(inner, spec.components, spec.dim)
    degree = None
    if cf is not None:
        k = detect_homogeneity(cf.potential, spec.components)
        degree = None if k is None else (int(k) if k.denominator == 1 else str(k))
    return {
        "ast": spec.pretty(),
        "dim": spec.dim,
        "fields": {f.name: f.kind for f in spec.fields},
        "params": dict(spec.params),
        "dL_dphi": {c: alg.to_text(vd.dL_dphi[c].chop()) for c in spec.components},
        "dL_dd_phi": {c: [alg.to_text(vd.momentum(c, mu).chop()) for mu in range(spec.dim)] for c in spec.components},
        "spacetime_independent": independent,
        "exponential_weight": list(w.h) if w is not None else None,
        "canonical": cf is not None,
        "potential": alg.to_text(cf.potential.chop()) if cf is not None else None,
        "homogeneity_degree": degree,
        "rho": check_k_condition(spec),
    }


def _theory_source(path: str) -> tuple[str, dict | None, int | None]:
    if path in PRESETS:
        return path, None, None
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from None
    if p.suffix == ".json":
        sc = Scenario.load(p)
        return sc.lagrangian, sc.params or None, sc.dim
    return text, None, None


def cmd_parse(args) -> int:
    path = args.path or args.scenario
    if not path:
        _err("parse needs a file, preset id or --scenario")
        return EXIT_USAGE
    try:
        src, params, dim = _theory_source(path)
        spec = load_theory(src, params, dim)
        info = describe_theory(spec)
    except ParseError as exc:
        _err(f"{path}: {exc}")
        return EXIT_USAGE
    except (ScenarioError, UnboundParameterError, IndexDisciplineError, ValueError, KeyError) as exc:
        _err(f"{path}: {exc}")
        return EXIT_USAGE
    if args.json:
        sys.stdout.write(dumps(info))
    else:
        print(f"L = {info['ast']}")
        print(f"dimension: {info['dim']}  fields: {', '.join(f'{k} ({v})' for k, v in info['fields'].items())}")
        for c in spec.components:
            print(f"dL/d{c} = {info['dL_dphi'][c]}")
            for mu, m in enumerate(info["dL_dd_phi"][c]):
                print(f"dL/d(d_{mu} {c}) = {m}")
        print(f"spacetime independent: {'yes' if info['spacetime_independent'] else 'no (spacetime-dependent)'}")
        if info["exponential_weight"] is not None:
            print(f"exponential weight h = {info['exponential_weight']}")
        if info["potential"] is not None:
            print(f"potential U = {info['potential']}")
        deg = info["homogeneity_degree"]
        print(f"homogeneity degree of U: {deg if deg is not None else 'none'}")
        print(f"rho: {info['rho'] if info['rho'] is not None else 'none'}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "parse.json", info)
    return EXIT_PASS


# --------------------------------------------------------------------------
# run

def _load_scenario(args) -> Scenario:
    if not args.scenario:
        raise ScenarioError("--scenario is required")
    sc = Scenario.load(args.scenario)
    if args.seed is not None:
        sc = sc.with_seed(args.seed)
    return sc


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in name).strip("_")


def write_run(out: Path, sc: Scenario, res) -> dict:
    from .scenario import slice_norms

    out.mkdir(parents=True, exist_ok=True)
    entries = []
    used: set = set()
    for j, e in res.entries:
        entries.append(e.to_json())
        base = _safe(j.name) or "current"
        fname, k = base, 1
        while fname in used:
            k += 1
            fname = f"{base}_{k}"
        used.add(fname)
        rows = [(t, j.name, q, l2, linf) for t, q, l2, linf in slice_norms(j)]
        write_csv(out / f"current_{fname}.csv", ("t", "current", "Q", "divergence_l2", "divergence_linf"), rows)
    if res.nonlocal_rows:
        write_csv(out / "nonlocal.csv", ("t1", "family", "value"), res.nonlocal_rows)
    report = {
        "scenario": sc.echo(),
        "checks": res.checks,
        "currents": entries,
        "convergence": [],
        "pass": res.passed,
    }
    write_json(out / "report.json", report)
    return report


def cmd_run(args) -> int:
    try:
        sc = _load_scenario(args)
        res = sc.run()
    except (ScenarioError, ParseError, UnboundParameterError, IndexDisciplineError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    except Refusal as exc:
        _err(f"refused: {exc}")
        return EXIT_USAGE
    except NumericalAbort as exc:
        _err(str(exc))
        return EXIT_ABORT
    except ValueError as exc:
        _err(str(exc))
        return EXIT_USAGE
    out = Path(args.out or "fieldlab-out")
    write_run(out, sc, res)
    for name, c in res.checks.items():
        print(f"{name}: {'pass' if c.get('pass') is not False else 'FAIL'}")
    print(f"overall: {'pass' if res.passed else 'FAIL'}")
    return EXIT_PASS if res.passed else EXIT_FAIL


# --------------------------------------------------------------------------
# converge

def cmd_converge(args) -> int:
    try:
        sc = _load_scenario(args)
        if not args.resolutions:
            raise ScenarioError("--resolutions is required")
        resolutions = [int(x) for x in args.resolutions.split(",") if x.strip()]
        table = convergence_study(sc, resolutions, RoundingFloors())
    except (ScenarioError, ParseError, UnboundParameterError, IndexDisciplineError, ConvergenceError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    except Refusal as exc:
        _err(f"refused: {exc}")
        return EXIT_USAGE
    except NumericalAbort as exc:
        _err(str(exc))
        return EXIT_ABORT
    except ValueError as exc:
        _err(str(exc))
        return EXIT_USAGE
    out = Path(args.out or "fieldlab-out")
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for name, r in table.items():
        for h, e in zip(r.spacings, r.errors):
            rows.append((name, float(h), float(e), "exact" if r.exact else ("" if r.order is None else format(r.order, ".17g"))))
        label = "exact" if r.exact else (f"{r.order:.3f}" if r.order is not None else "n/a")
        print(f"{name}: order {label}")
    write_csv(out / "convergence.csv", ("check", "h", "error", "order"), rows)
    write_json(out / "convergence.json", {
        "scenario": sc.echo(),
        "resolutions": resolutions,
        "convergence": [{**r.to_json(), "h": [float(x) for x in r.spacings], "error": [float(x) for x in r.errors]} for r in table.values()],
    })
    return EXIT_PASS


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fieldlab", description="Conserved-current laboratory for lattice field theories.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario JSON file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="override the scenario seed")
    common.add_argument("--threads", type=int, help="worker threads (advisory)")
    sub = p.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("parse", parents=[common], help="print the AST and derived quantities")
    sp.add_argument("path", nargs="?", help="Lagrangian file, scenario JSON or preset id")
    sp.add_argument("--json", action="store_true", help="print JSON instead of text")
    sp.set_defaults(func=cmd_parse)
    sr = sub.add_parser("run", parents=[common], help="evolve and verify the requested currents")
    sr.set_defaults(func=cmd_run)
    sc = sub.add_parser("converge", parents=[common], help="measure convergence orders over resolutions")
    sc.add_argument("--resolutions", help="comma separated points per axis, at least three")
    sc.set_defaults(func=cmd_converge)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_PASS
    if args.threads is not None:
        if args.threads < 1:
            _err("--threads must be positive")
            return EXIT_USAGE
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
