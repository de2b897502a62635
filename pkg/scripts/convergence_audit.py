"""Shell-decay exponents of the fixed-point series across rotation numbers.

For each sphere rotation number the audit symbol is evaluated with the
same weight/decay profile; the fitted exponent of the shell masses is
printed next to the Diophantine verdict. Well-approximable numbers should
decay visibly worse than badly approximable ones.

    python scripts/convergence_audit.py --shell-max 64 --alphas golden sqrt2 liouville:4 liouville:6
"""
import argparse
import json
import sys

from shiftindex import harness

BASE = {"kind": "audit", "manifold": "sphere_x_circle", "resolution": 4,
        "tolerances": {"inverse": 1e-8}, "conditions": {"g_range": 2**30}}


def audit_row(alpha: str, shell_max: int, weight: float, decay: float, seed: int) -> dict:
    data = dict(BASE, name=f"audit-{alpha}", shell_max=shell_max,
                group={"generators": [{"translation": [0], "sphere_turns": alpha}]},
                model={"weight": weight, "decay": decay, "shells": shell_max})
    res = harness.run_scenario(harness.parse_scenario(data), seed)
    rep = res.topological
    return {"alpha": alpha, "decay_exponent": rep.decay_exponent, "total": [rep.total.real, rep.total.imag],
            "diophantine": res.conditions["diophantine"]["status"], "N": res.conditions["diophantine"]["N"]}


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--alphas", nargs="+", default=["golden", "sqrt2", "liouville:4", "liouville:5", "liouville:6"])
    p.add_argument("--shell-max", type=int, default=64)
    p.add_argument("--weight", type=float, default=0.3)
    p.add_argument("--decay", type=float, default=6.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true", help="emit JSON instead of a table")
    args = p.parse_args(argv)
    rows = [audit_row(a, args.shell_max, args.weight, args.decay, args.seed) for a in args.alphas]
    if args.json:
        json.dump(rows, sys.stdout, indent=2)
        print()
        return
    print(f"{'alpha':<14}{'decay':>10}  {'condition':<12}{'N':>4}  total")
    for r in rows:
        print(f"{r['alpha']:<14}{r['decay_exponent']:>10.3f}  {r['diophantine']:<12}{str(r['N']):>4}  "
              f"{r['total'][0]:+.3e}{r['total'][1]:+.3e}j")


if __name__ == "__main__":
    main()
