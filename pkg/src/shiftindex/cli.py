"""Command-line entry point: ``shiftindex <subcommand> ...``.

Exit status is 0 on success, 1 when a verification check fails (an
agreement flag is false, an expected value mismatches or an invariant is
broken) and 2 on malformed input.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness
from .analytic_index import estimate_index, model_euler_index
from .errors import NoPlateau, NotElliptic, ParseError, ShiftIndexError, TruncationInsufficient
from .geometry import build_base_grid, build_cosphere_grid, manifold_from_name
from .group_action import Generator, IsometryGroup, Law, diophantine_check, growth_check
from .symbol_algebra import invert, symbol_of_spec


def _ints(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _common(p: argparse.ArgumentParser):
    p.add_argument("--resolution", type=int, help="cosphere grid resolution per periodic axis")
    p.add_argument("--truncations", type=_ints, help="Fourier truncation schedule, e.g. 64,128,256")
    p.add_argument("--shell-max", type=int, help="largest word length summed on the topological side")
    p.add_argument("--tol", type=float, help="inversion residual tolerance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", help="directory for the report file (stdout when absent)")


def _scenario_source(p):
    p.add_argument("source", help="suite/scenario JSON file or bundled suite name")
    p.add_argument("--name", action="append", help="restrict to scenarios with this name (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shiftindex", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-group", help="growth and Diophantine checks for a rotation group")
    p.add_argument("--manifold", default="circle")
    p.add_argument("--turns", action="append", default=[],
                   help="generator translation, comma separated per flat factor (repeat per generator)")
    p.add_argument("--sphere-turns", action="append", default=[])
    p.add_argument("--law", choices=[l.value for l in Law], default="free_abelian")
    p.add_argument("--order", type=int)
    p.add_argument("--g-range", type=int, default=200)
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("--k-max", type=int, default=32)
    _common(p)

    for name, helptext in (("invert-symbol", "invert the principal symbol of each scenario"),
                           ("analytic-index", "Fredholm index from truncated Fourier sections"),
                           ("topological-index", "index from the fixed-point formulas")):
        p = sub.add_parser(name, help=helptext)
        _scenario_source(p)
        _common(p)

    p = sub.add_parser("model-euler", help="Euler operator model: Hermite-basis kernel and index")
    _common(p)

    p = sub.add_parser("verify", help="run a suite on both sides and compare")
    _scenario_source(p)
    p.add_argument("--timing", action="store_true", help="record wall-clock runtime per scenario")
    _common(p)

    p = sub.add_parser("report", help="re-emit a saved JSON report")
    p.add_argument("report")
    _common(p)

    sub.add_parser("list-suites", help="names of the bundled suites")
    return parser


def _overrides(args) -> dict:
    return {"resolution": args.resolution, "truncations": args.truncations, "shell_max": args.shell_max,
            "tolerances": {"inverse": args.tol} if args.tol is not None else None}


def _scenarios(args):
    from dataclasses import replace
    suite, scenarios = harness.load_suite(args.source)
    if args.name:
        missing = set(args.name) - {s.name for s in scenarios}
        if missing:
            raise ParseError(f"--name: no scenario called {sorted(missing)} in {suite}")
        scenarios = [s for s in scenarios if s.name in args.name]
    ov = {k: v for k, v in _overrides(args).items() if v is not None}
    tol = ov.pop("tolerances", {})
    return suite, [replace(s, **ov, tolerances={**s.tolerances, **tol}) for s in scenarios]


def _write(args, payload: dict, stem: str):
    text = json.dumps(payload, indent=2, sort_keys=True, default=harness._json_default) + "\n"
    if args.out:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        (d / f"{stem}.json").write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_check_group(args) -> int:
    M = manifold_from_name(args.manifold)
    gens = []
    for i, t in enumerate(args.turns):
        trans = tuple(harness.parse_turns(v, f"--turns[{i}]") for v in t.split(","))
        sph = harness.parse_turns(args.sphere_turns[i], f"--sphere-turns[{i}]") if i < len(args.sphere_turns) else 0
        gens.append(Generator(trans, sph))
    G = IsometryGroup(M, tuple(gens), Law(args.law), args.order)
    out = {"group": G.describe()}
    if G.rank and not G.is_finite:
        out["growth_exponent"] = growth_check(G, args.k_max).exponent
    out["diophantine"] = diophantine_check(G, args.g_range, args.samples, seed=args.seed).as_dict()
    _write(args, out, "check-group")
    return 0


def cmd_invert(args) -> int:
    suite, scenarios = _scenarios(args)
    rows, status = [], 0
    for s in scenarios:
        if s.kind not in ("operator", "toeplitz"):
            rows.append({"name": s.name, "status": "n/a"})
            continue
        grid = (build_base_grid if s.kind == "toeplitz" else build_cosphere_grid)(s.manifold, s.resolution)
        sym = symbol_of_spec(s.payload, grid)
        try:
            inv = invert(sym, s.tol_inverse)
            rows.append({"name": s.name, "status": "elliptic", "inverse_support": len(inv.support),
                         "inverse_radius": inv.radius})
        except (NotElliptic, TruncationInsufficient) as exc:
            d = exc.diagnostics.as_dict() if hasattr(exc.diagnostics, "as_dict") else exc.diagnostics
            kind = "not_elliptic" if isinstance(exc, NotElliptic) else "truncation_insufficient"
            rows.append({"name": s.name, "status": kind, "message": str(exc), "diagnostics": d})
            if s.expect_elliptic is not False:
                status = 1
    _write(args, {"suite": suite, "scenarios": rows}, f"{suite}-invert")
    return status


def cmd_analytic(args) -> int:
    suite, scenarios = _scenarios(args)
    rows, status = [], 0
    for s in scenarios:
        if s.kind == "model_euler":
            rows.append({"name": s.name, **model_euler_index(max(s.truncations)).as_dict()})
            continue
        if s.kind in ("projection", "audit"):
            res = harness.run_scenario(s, args.seed) if s.kind == "projection" else None
            rows.append({"name": s.name, **(res.analytic.as_dict() if res and res.analytic else {"status": "n/a"})})
            continue
        target = s.payload
        if s.kind == "toeplitz":
            target = symbol_of_spec(s.payload, build_base_grid(s.manifold, s.resolution))
        try:
            est = estimate_index(target, s.truncations)
            rows.append({"name": s.name, **est.as_dict()})
            if s.expected is not None and est.index != s.expected:
                status = 1
        except NoPlateau as exc:
            rows.append({"name": s.name, "status": "no_plateau", "closing_gap": exc.closing_gap,
                         "readings": [r.as_dict() for r in exc.readings]})
            if s.expect_elliptic is not False:
                status = 1
    _write(args, {"suite": suite, "scenarios": rows}, f"{suite}-analytic")
    return status


def cmd_topological(args) -> int:
    suite, scenarios = _scenarios(args)
    rows, status = [], 0
    for s in scenarios:
        if s.kind == "model_euler":
            rows.append({"name": s.name, "status": "n/a"})
            continue
        res = harness.VerificationResult(s.name, s.kind)
        if s.kind == "audit":
            res = harness.run_scenario(s, args.seed)
        else:
            from .topological_index import evaluate_dirac_even, evaluate_fixedp, evaluate_local_odd
            try:
                if s.kind == "projection":
                    from .models import bott_projection
                    grid = build_base_grid(s.manifold, s.resolution)
                    res.topological = evaluate_dirac_even(bott_projection(s.group, grid,
                                                                          float(s.payload.get("mass", 1.0))),
                                                          s.shell_max)
                else:
                    grid = (build_base_grid if s.kind == "toeplitz" else build_cosphere_grid)(s.manifold,
                                                                                               s.resolution)
                    evaluate = evaluate_local_odd if s.kind == "toeplitz" else evaluate_fixedp
                    res.topological = evaluate(symbol_of_spec(s.payload, grid), s.shell_max,
                                               tolerance=s.tol_inverse)
            except ShiftIndexError as exc:
                rows.append({"name": s.name, "status": type(exc).__name__, "message": str(exc)})
                if s.expect_elliptic is not False:
                    status = 1
                continue
        rep = res.topological
        rows.append({"name": s.name, **rep.as_dict()})
        if s.expected is not None and rep.nearest_integer != s.expected:
            status = 1
    _write(args, {"suite": suite, "scenarios": rows}, f"{suite}-topological")
    return status


def cmd_model_euler(args) -> int:
    N = max(args.truncations) if args.truncations else 64
    est = model_euler_index(N)
    _write(args, {"model_euler": est.as_dict()}, "model-euler")
    return 0 if est.extras["kernel_overlap"] > 1 - 1e-10 else 1


def cmd_verify(args) -> int:
    report = harness.verify_suite(args.source, args.seed, _overrides(args), timing=args.timing)
    if args.name:
        report.results = [r for r in report.results if r.name in args.name]
    text = harness.emit(report, args.format, args.out)
    if args.out:
        print(text)
    else:
        sys.stdout.write(text)
    s = report.summary()
    print(f"{report.suite}: {s['scenarios']} scenarios, {s['agreements']} agree, {s['disagreements']} disagree, "
          f"{s['expected_mismatches']} expected mismatches, {s['invariant_failures']} invariant failures",
          file=sys.stderr)
    return 1 if report.failed else 0


def cmd_report(args) -> int:
    try:
        data = json.loads(Path(args.report).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{args.report}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    for key in ("suite", "scenarios"):
        if key not in data:
            raise ParseError(f"{args.report}: missing key '{key}'")
    text = harness.to_csv(data) if args.format == "csv" else json.dumps(data, indent=2, sort_keys=True) + "\n"
    sys.stdout.write(text)
    failed = any(r.get("agreement") is False or r.get("expected_match") is False
                 or not all(r.get("invariants", {}).values()) for r in data["scenarios"])
    return 1 if failed else 0


COMMANDS = {"check-group": cmd_check_group, "invert-symbol": cmd_invert, "analytic-index": cmd_analytic,
            "topological-index": cmd_topological, "model-euler": cmd_model_euler, "verify": cmd_verify,
            "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-suites":
        print("\n".join(harness.bundled_suites()))
        return 0
    try:
        return COMMANDS[args.command](args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ShiftIndexError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
