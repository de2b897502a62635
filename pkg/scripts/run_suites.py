"""Run every bundled suite (or the named ones) and write JSON and CSV reports.

    python scripts/run_suites.py --out results
    python scripts/run_suites.py classical rotation --seed 1
"""
import argparse
import sys
import time

from shiftindex import harness


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("suites", nargs="*", help="bundled suite names or suite files (default: all bundled)")
    p.add_argument("--out", default="results")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    failed = False
    for suite in args.suites or harness.bundled_suites():
        start = time.perf_counter()
        report = harness.verify_suite(suite, args.seed, timing=True)
        for fmt in ("json", "csv"):
            harness.emit(report, fmt, args.out)
        s = report.summary()
        print(f"{report.suite:<10} {s['scenarios']:>3} scenarios  {s['agreements']:>3} agree  "
              f"{s['disagreements']} disagree  {s['expected_mismatches']} mismatched  "
              f"{time.perf_counter() - start:6.1f} s")
        failed |= report.failed
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
