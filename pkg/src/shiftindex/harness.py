"""Scenario files, the two-sided verification driver and report emission.

A suite file is UTF-8 JSON ``{"suite": name, "scenarios": [...]}``.  Each
scenario has the keys ``name``, ``kind``, ``manifold``, ``group``,
``terms`` (or ``model``), ``expected`` and ``tolerances``; see the README
for the full schema.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .analytic_index import IndexEstimate, estimate_index, model_euler_index
from .errors import (NoPlateau, NotElliptic, ParseError, ScenarioInvalid, ShiftIndexError,
                     TruncationInsufficient, UnsupportedGeometry)
from .geometry import build_base_grid, build_cosphere_grid, manifold_from_name
from .group_action import (GOLDEN, Generator, IsometryGroup, Law, diophantine_check, growth_check,
                           liouville_number)
from .models import audit_symbol, bott_dirac_spec, bott_projection
from .operator_spec import LocalTerm, OperatorSpec, SymbolSpec, TrigPoly
from .symbol_algebra import invert, symbol_of_spec
from .topological_index import IndexReport, evaluate_dirac_even, evaluate_fixedp, evaluate_local_odd

KINDS = ("operator", "toeplitz", "projection", "model_euler", "audit")
SCENARIO_KEYS = {"name", "kind", "manifold", "group", "terms", "order", "model", "expected", "tolerances",
                 "truncations", "shell_max", "resolution", "conditions", "notes", "m"}


# ----------------------------------------------------------------------------
# parsing


def parse_turns(value, where: str):
    """Rotation amount in turns: a number, "p/q", "golden", "sqrt2" or "liouville[:k]"."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return value
    if isinstance(value, str):
        v = value.strip().lower()
        if v == "golden":
            return GOLDEN
        if v == "sqrt2":
            return math.sqrt(2.0) - 1.0
        if v.startswith("liouville"):
            k = int(v.split(":")[1]) if ":" in v else 6
            return liouville_number(k)
        try:
            return Fraction(v)
        except ValueError:
            pass
    raise ParseError(f"{where}: cannot read rotation amount {value!r}")


def _complex(value, where):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if isinstance(value, list) and len(value) == 2 and all(isinstance(v, (int, float)) for v in value):
        return complex(value[0], value[1])
    raise ParseError(f"{where}: expected a number or [re, im], got {value!r}")


def _matrix(value, m, where):
    if isinstance(value, list) and value and isinstance(value[0], list) and isinstance(value[0][0], (list, int, float)) \
            and len(value) == m and all(isinstance(r, list) and len(r) == m for r in value) and m > 1:
        return np.array([[_complex(v, where) for v in row] for row in value])
    return _complex(value, where) * np.eye(m)


def _coefficient(spec, m, nvars, where):
    """Coefficient: number, [re, im], or {"modes": [{"k": [...], "value": ...}, ...]}."""
    if spec is None:
        return TrigPoly.constant(np.eye(m), nvars)
    if isinstance(spec, dict):
        if "modes" not in spec:
            raise ParseError(f"{where}: coefficient object needs the key 'modes'")
        modes = {}
        for i, entry in enumerate(spec["modes"]):
            if "k" not in entry or "value" not in entry:
                raise ParseError(f"{where}.modes[{i}]: needs keys 'k' and 'value'")
            k = tuple(entry["k"]) if isinstance(entry["k"], list) else (entry["k"],)
            if len(k) != nvars:
                raise ParseError(f"{where}.modes[{i}].k: expected {nvars} entries")
            modes[k] = modes.get(k, 0) + _matrix(entry["value"], m, f"{where}.modes[{i}].value")
        return TrigPoly(modes)
    return TrigPoly.constant(_matrix(spec, m, where), nvars)


def _group(data, manifold, where):
    if data is None or data == "trivial":
        return IsometryGroup(manifold, (), Law.FREE_ABELIAN)
    if not isinstance(data, dict):
        raise ParseError(f"{where}: group must be an object or 'trivial'")
    law = data.get("law", "free_abelian")
    gens = []
    for i, g in enumerate(data.get("generators", [])):
        w = f"{where}.generators[{i}]"
        trans = g.get("translation", [0] * len(manifold.flat_factors))
        trans = tuple(parse_turns(t, w + ".translation") for t in trans)
        sph = parse_turns(g.get("sphere_turns", 0), w + ".sphere_turns")
        gens.append(Generator(trans, sph))
    try:
        return IsometryGroup(manifold, tuple(gens), Law(law), data.get("order"))
    except (ValueError, UnsupportedGeometry) as exc:
        raise ParseError(f"{where}: {exc}") from None


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    kind: str
    manifold: object
    group: IsometryGroup
    payload: object  # OperatorSpec, SymbolSpec or a model description
    truncations: tuple = (64, 128, 256)
    shell_max: int = 8
    resolution: int = 64
    tolerances: dict = field(default_factory=dict)
    expected: Optional[int] = None
    expect_elliptic: Optional[bool] = None
    provenance: str = ""
    conditions: dict = field(default_factory=dict)

    @property
    def tol_integer(self) -> float:
        return float(self.tolerances.get("integer", 1e-6))

    @property
    def tol_inverse(self) -> float:
        return float(self.tolerances.get("inverse", 1e-10))


def parse_scenario(data: dict, where: str = "scenario") -> Scenario:
    if not isinstance(data, dict):
        raise ParseError(f"{where}: expected an object")
    unknown = set(data) - SCENARIO_KEYS
    if unknown:
        raise ParseError(f"{where}: unknown key(s) {sorted(unknown)}")
    for key in ("name", "kind"):
        if key not in data:
            raise ParseError(f"{where}: missing key '{key}'")
    name, kind = data["name"], data["kind"]
    where = f"{where}[{name}]"
    if kind not in KINDS:
        raise ParseError(f"{where}.kind: expected one of {KINDS}, got {kind!r}")
    expected = data.get("expected", {}) or {}
    if not isinstance(expected, dict):
        raise ParseError(f"{where}.expected: expected an object")
    common = dict(truncations=tuple(data.get("truncations", (64, 128, 256))), shell_max=int(data.get("shell_max", 8)),
                  resolution=int(data.get("resolution", 64)), tolerances=dict(data.get("tolerances", {})),
                  expected=expected.get("index"), expect_elliptic=expected.get("elliptic"),
                  provenance=str(expected.get("provenance", "")), conditions=dict(data.get("conditions", {})))
    if kind == "model_euler":
        return Scenario(name, kind, None, None, None, **common)
    if "manifold" not in data:
        raise ParseError(f"{where}: missing key 'manifold'")
    try:
        manifold = manifold_from_name(data["manifold"])
    except UnsupportedGeometry as exc:
        raise ParseError(f"{where}.manifold: {exc}") from None
    group = _group(data.get("group"), manifold, f"{where}.group")
    nvars = len(manifold.periodic_coordinates)
    if kind in ("projection", "audit"):
        model = data.get("model")
        if not isinstance(model, dict):
            raise ParseError(f"{where}.model: expected an object")
        return Scenario(name, kind, manifold, group, dict(model), **common)
    if "terms" not in data:
        raise ParseError(f"{where}: missing key 'terms'")
    m = int(data.get("m", 1))
    terms = []
    for i, t in enumerate(data["terms"]):
        w = f"{where}.terms[{i}]"
        if "element" not in t:
            raise ParseError(f"{w}: missing key 'element'")
        try:
            g = group.element(*t["element"])
        except ShiftIndexError as exc:
            raise ParseError(f"{w}.element: {exc}") from None
        if kind == "toeplitz":
            terms.append((g, _coefficient(t.get("coefficient"), m, nvars, w + ".coefficient")))
            continue
        parts = []
        for j, p in enumerate(t.get("parts", [])):
            wp = f"{w}.parts[{j}]"
            bad = set(p) - {"coefficient", "derivative", "multiplier", "bessel"}
            if bad:
                raise ParseError(f"{wp}: unknown key(s) {sorted(bad)}")
            parts.append(LocalTerm(_coefficient(p.get("coefficient"), m, nvars, wp + ".coefficient"),
                                   tuple(p.get("derivative", ())), p.get("multiplier"), float(p.get("bessel", 0.0))))
        terms.append((g, parts))
    try:
        if kind == "toeplitz":
            payload = SymbolSpec(group, m, terms)
        else:
            payload = OperatorSpec(group, m, terms, float(data.get("order", 0.0)))
    except (ValueError, ShiftIndexError) as exc:
        raise ParseError(f"{where}.terms: {exc}") from None
    return Scenario(name, kind, manifold, group, payload, **common)


def load_suite(path) -> tuple:
    """Parse a suite file (or a bundled suite name); returns (suite name, scenarios)."""
    text, label = _read_suite_text(path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{label}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if isinstance(data, dict) and "kind" in data and "scenarios" not in data:
        data = {"suite": data.get("name", label), "scenarios": [data]}
    if not isinstance(data, dict) or "scenarios" not in data:
        raise ParseError(f"{label}: missing key 'scenarios'")
    scenarios = [parse_scenario(s, f"scenarios[{i}]") for i, s in enumerate(data["scenarios"])]
    names = [s.name for s in scenarios]
    dup = sorted({n for n in names if names.count(n) > 1})
    if dup:
        raise ScenarioInvalid(f"duplicate scenario names {dup}", {"name": dup})
    return str(data.get("suite", label)), scenarios


def bundled_suites() -> list:
    return sorted(p.name[:-5] for p in resources.files("shiftindex").joinpath("suites").iterdir()
                  if p.name.endswith(".json"))


def _read_suite_text(path):
    p = Path(str(path))
    if p.exists():
        return p.read_text(encoding="utf-8"), p.name
    name = str(path)
    res = resources.files("shiftindex").joinpath("suites", f"{name}.json")
    if res.is_file():
        return res.read_text(encoding="utf-8"), name
    raise ParseError(f"no suite file or bundled suite named {name!r}")


# ----------------------------------------------------------------------------
# running


@dataclass
class VerificationResult:
    name: str
    kind: str
    analytic: Optional[IndexEstimate] = None
    analytic_status: str = "n/a"  # "index", "no_plateau", "n/a", "error"
    closing_gap: Optional[bool] = None
    topological: Optional[IndexReport] = None
    topological_status: str = "n/a"  # "report", "not_elliptic", "n/a", "error"
    elliptic: Optional[bool] = None
    agreement: Optional[bool] = None
    expected: Optional[int] = None
    expected_match: Optional[bool] = None
    invariants: dict = field(default_factory=dict)
    conditions: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    runtime_ms: Optional[float] = None

    @property
    def analytic_index(self) -> Optional[int]:
        return self.analytic.index if self.analytic is not None else None

    @property
    def failed(self) -> bool:
        return self.agreement is False or self.expected_match is False or not all(self.invariants.values())

    def as_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "analytic_status": self.analytic_status,
                "analytic": self.analytic.as_dict() if self.analytic else None, "closing_gap": self.closing_gap,
                "topological_status": self.topological_status,
                "topological": self.topological.as_dict() if self.topological else None,
                "elliptic": self.elliptic, "agreement": self.agreement, "expected": self.expected,
                "expected_match": self.expected_match, "invariants": self.invariants,
                "conditions": self.conditions, "warnings": list(self.warnings),
                **({"runtime_ms": self.runtime_ms} if self.runtime_ms is not None else {})}


def _conditions(s: Scenario, res: VerificationResult, seed: int):
    group = s.group
    if group is None or group.rank == 0:
        return
    growth = growth_check(group, int(s.conditions.get("k_max", 16)))
    res.conditions["growth_exponent"] = growth.exponent
    dio = diophantine_check(group, int(s.conditions.get("g_range", 200)), int(s.conditions.get("samples", 32)),
                            seed=seed)
    res.conditions["diophantine"] = dio.as_dict()
    if dio.violation:
        res.warnings.append("Diophantine condition violated; computation proceeds")


def _symbol_elliptic(sym, tol) -> tuple:
    try:
        invert(sym, tol)
        return True, None
    except NotElliptic as exc:
        return False, str(exc)
    except TruncationInsufficient as exc:
        return None, str(exc)


def run_scenario(s: Scenario, seed: int = 0, timing: bool = False) -> VerificationResult:
    start = time.perf_counter()
    res = VerificationResult(s.name, s.kind, expected=s.expected)
    _conditions(s, res, seed)
    if s.kind == "model_euler":
        est = model_euler_index(max(s.truncations))
        res.analytic, res.analytic_status = est, "index"
        res.invariants["kernel_overlap"] = est.extras["kernel_overlap"] > 1 - 1e-10
        res.warnings.append("topological side not applicable to the non-compact model")
    elif s.kind == "audit":
        grid = build_cosphere_grid(s.manifold, s.resolution)
        model = s.payload
        sym = audit_symbol(s.group, grid, float(model.get("weight", 0.3)), float(model.get("decay", 6.0)),
                           int(model.get("shells", s.shell_max)))
        report = evaluate_fixedp(sym, s.shell_max, tolerance=float(s.tolerances.get("inverse", 1e-8)),
                                 support_radius=sym.radius, radius=sym.radius)
        res.topological, res.topological_status = report, "report"
        res.elliptic = True
        res.warnings.append("analytic side not assembled on sphere x circle")
    else:
        _run_two_sided(s, res)
    if res.topological is not None:
        res.invariants["integrality"] = res.topological.distance_to_integer < s.tol_integer
    if res.analytic is not None:
        res.invariants["heat_svd_agree"] = all(r.svd == r.heat for r in res.analytic.readings[-3:])
    if s.expected is not None:
        got = res.analytic_index
        if got is None and res.topological is not None:
            got = res.topological.nearest_integer
        res.expected_match = got == s.expected
    if s.expect_elliptic is not None and res.elliptic is not None:
        res.expected_match = (res.expected_match is not False) and res.elliptic == s.expect_elliptic
    if timing:
        res.runtime_ms = 1000.0 * (time.perf_counter() - start)
    return res


def _run_two_sided(s: Scenario, res: VerificationResult):
    if s.kind == "projection":
        model = s.payload
        mass = float(model.get("mass", 1.0))
        grid = build_base_grid(s.manifold, s.resolution)
        if model.get("type", "bott") == "trivial":
            from .symbol_algebra import CrossedSymbol
            sym = CrossedSymbol.identity(s.group, grid, 1)
            spec = OperatorSpec(s.group, 1, [(s.group.identity, [
                LocalTerm(TrigPoly.constant(1.0, 2), derivative=(1, 0), bessel=-1.0),
                LocalTerm(TrigPoly.constant(1j, 2), derivative=(0, 1), bessel=-1.0)])], 0.0)
        else:
            sym = bott_projection(s.group, grid, mass)
            spec = bott_dirac_spec(s.group, mass)
        res.elliptic = True
        try:
            res.topological = evaluate_dirac_even(sym, s.shell_max)
            res.topological_status = "report"
        except ShiftIndexError as exc:
            res.topological_status, _ = "error", res.warnings.append(f"topological: {exc}")
        analytic_target = spec
    else:
        grid = (build_base_grid if s.kind == "toeplitz" else build_cosphere_grid)(s.manifold, s.resolution)
        sym = symbol_of_spec(s.payload, grid)
        elliptic, why = _symbol_elliptic(sym, s.tol_inverse)
        res.elliptic = elliptic
        if elliptic:
            evaluate = evaluate_local_odd if s.kind == "toeplitz" else evaluate_fixedp
            try:
                res.topological = evaluate(sym, s.shell_max, tolerance=s.tol_inverse)
                res.topological_status = "report"
            except ShiftIndexError as exc:
                res.topological_status = "error"
                res.warnings.append(f"topological: {exc}")
        else:
            res.topological_status = "not_elliptic" if elliptic is False else "error"
            res.warnings.append(f"symbol: {why}")
        analytic_target = sym if s.kind == "toeplitz" else s.payload
    try:
        res.analytic = estimate_index(analytic_target, s.truncations)
        res.analytic_status = "index"
    except NoPlateau as exc:
        res.analytic_status, res.closing_gap = "no_plateau", exc.closing_gap
    if res.analytic is not None and res.topological is not None:
        res.agreement = res.analytic.index == res.topological.nearest_integer
    elif res.analytic_status == "no_plateau" and res.elliptic is False:
        res.agreement = bool(res.closing_gap)
    else:
        # one side produced an integer, or failed, while the other did not
        res.agreement = False


@dataclass
class SuiteReport:
    suite: str
    seed: int
    results: list

    @property
    def failed(self) -> bool:
        return any(r.failed for r in self.results)

    def summary(self) -> dict:
        return {"scenarios": len(self.results),
                "agreements": sum(1 for r in self.results if r.agreement is True),
                "disagreements": sum(1 for r in self.results if r.agreement is False),
                "not_applicable": sum(1 for r in self.results if r.agreement is None),
                "expected_mismatches": sum(1 for r in self.results if r.expected_match is False),
                "invariant_failures": sum(1 for r in self.results if not all(r.invariants.values()))}

    def as_dict(self) -> dict:
        return {"suite": self.suite, "seed": self.seed, "summary": self.summary(),
                "scenarios": [r.as_dict() for r in self.results]}


def verify_suite(path, seed: int = 0, overrides: Optional[dict] = None, timing: bool = False) -> SuiteReport:
    name, scenarios = load_suite(path)
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    results = []
    for s in sorted(scenarios, key=lambda s: s.name):
        if overrides:
            s = replace(s, **{k: v for k, v in overrides.items() if k != "tolerances"},
                        tolerances={**s.tolerances, **overrides.get("tolerances", {})})
        results.append(run_scenario(s, seed, timing))
    return SuiteReport(name, seed, results)


# ----------------------------------------------------------------------------
# emission


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(type(o).__name__)


def to_json(report: SuiteReport) -> str:
    return json.dumps(report.as_dict(), indent=2, sort_keys=True, default=_json_default) + "\n"


CSV_COLUMNS = ("name", "analytic", "topological_raw", "topological_rounded", "agree", "decay_exponent", "runtime_ms")


def csv_rows(report_dict: dict) -> list:
    rows = []
    for r in report_dict["scenarios"]:
        an = r["analytic"]["index"] if r.get("analytic") else r["analytic_status"]
        top = r.get("topological")
        rows.append({"name": r["name"], "analytic": an,
                     "topological_raw": f"{top['total'][0]:.12g}{top['total'][1]:+.3g}j" if top else r["topological_status"],
                     "topological_rounded": top["nearest_integer"] if top else "",
                     "agree": "" if r["agreement"] is None else str(r["agreement"]).lower(),
                     "decay_exponent": top["decay_exponent"] if top and top["decay_exponent"] is not None else "",
                     "runtime_ms": f"{r['runtime_ms']:.1f}" if r.get("runtime_ms") is not None else ""})
    return rows


def to_csv(report) -> str:
    data = report.as_dict() if isinstance(report, SuiteReport) else report
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(csv_rows(data))
    return buf.getvalue()


def emit(report, fmt: str = "json", out: Optional[str] = None) -> str:
    """Serialize a report; with ``out`` write ``<suite>.<fmt>`` there and return the path."""
    if fmt not in ("json", "csv"):
        raise ValueError(f"unknown format {fmt!r}")
    text = to_json(report) if fmt == "json" else to_csv(report)
    if out is None:
        return text
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    suite = report.suite if isinstance(report, SuiteReport) else report.get("suite", "report")
    path = d / f"{suite}.{fmt}"
    path.write_text(text, encoding="utf-8")
    return str(path)
