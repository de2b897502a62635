"""Per-truncation SVD and heat readings for one scenario of a suite.

Useful for seeing where a plateau forms, or how the spectral gap closes
for a non-elliptic operator.

    python scripts/truncation_sweep.py dichotomy nonell-sine --truncations 32 64 128 256
"""
import argparse

from shiftindex import harness
from shiftindex.analytic_index import estimate_index
from shiftindex.errors import NoPlateau
from shiftindex.geometry import build_base_grid
from shiftindex.symbol_algebra import symbol_of_spec


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("suite")
    p.add_argument("name")
    p.add_argument("--truncations", type=int, nargs="+", default=[32, 64, 128, 256])
    args = p.parse_args(argv)
    _, scenarios = harness.load_suite(args.suite)
    s = next((s for s in scenarios if s.name == args.name), None)
    if s is None or s.kind not in ("operator", "toeplitz"):
        raise SystemExit(f"no operator or toeplitz scenario named {args.name!r} in {args.suite}")
    target = s.payload
    if s.kind == "toeplitz":
        target = symbol_of_spec(s.payload, build_base_grid(s.manifold, s.resolution))
    try:
        est = estimate_index(target, args.truncations)
        readings, verdict = est.readings, f"index {est.index}"
    except NoPlateau as exc:
        readings, verdict = exc.readings, f"no plateau (closing gap: {exc.closing_gap})"
    print(f"{'N':>6}{'svd':>6}{'heat':>6}{'gap':>12}")
    for r in readings:
        print(f"{r.N:>6}{str(r.svd):>6}{str(r.heat):>6}{r.gap:>12.3e}")
    print(verdict)


if __name__ == "__main__":
    main()
