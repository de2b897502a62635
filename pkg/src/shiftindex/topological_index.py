"""Right-hand sides of the index formulas with per-element series diagnostics.

Three evaluators share one accumulation scheme:

* ``evaluate_fixedp``: integrals over the cosphere bundles of the fixed
  strata of ``Td * ch sigma(g) / ch lambda_{-1}(N M_g (x) C)(g)``;
* ``evaluate_local_odd``: Toeplitz formula over X_g with ``A-hat`` and the
  sine Pfaffian denominator;
* ``evaluate_dirac_even``: even formula for a projection.

Strata without a cosphere bundle contribute exactly zero and are logged.
Every report carries, besides the literal contributions, the absolute
integrand mass of each shell of word length; its upper envelope gives the
decay exponent used as the empirical convergence diagnostic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.special import bernoulli

from .errors import EmptyStratum, NonConvergent, NotIdempotent, VanishingAngle
from .geometry import CosphereGrid, SampledForm, build_base_grid, integrate_form, pole_circle_grid
from .group_action import FixedStratum, StratumKind, ball, fixed_strata
from .symbol_algebra import ChernCharacter, CrossedSymbol, convolve, cs_character, differential, invert

# sign of the odd formula on X (fixed by the Hardy-Toeplitz operator of exp(ix))
ODD_ORIENTATION = -1.0
EVEN_ORIENTATION = 1.0


# ----------------------------------------------------------------------------
# exterior algebra for characteristic forms


@lru_cache(maxsize=None)
def _wedge_tensor(d: int) -> np.ndarray:
    n = 1 << d
    T = np.zeros((n, n, n))
    for a in range(n):
        for b in range(n):
            if a & b:
                continue
            inv = sum(1 for i in range(d) if a >> i & 1 for j in range(d) if b >> j & 1 and i > j)
            T[a, b, a | b] = -1.0 if inv % 2 else 1.0
    return T


def form_degree_mask(d: int) -> np.ndarray:
    return np.array([bin(a).count("1") for a in range(1 << d)])


def _mat_wedge(X, Y, d):
    return np.einsum("ika,kjb,abc->ijc", X, Y, _wedge_tensor(d))


def _scalar_wedge(x, y, d):
    return np.einsum("a,b,abc->c", x, y, _wedge_tensor(d))


def _matrix_series(X, coeffs, d):
    """sum_n coeffs[n] X^n for a matrix of even forms (nilpotent above degree d)."""
    r = X.shape[0]
    one = np.zeros((r, r, 1 << d), dtype=complex)
    one[:, :, 0] = np.eye(r)
    out = coeffs[0] * one
    P = one
    for c in coeffs[1:]:
        P = _mat_wedge(P, X, d)
        out = out + c * P
    return out


def _scalar_exp(y, d):
    out = np.zeros_like(y)
    out[0] = 1.0
    term = out.copy()
    for n in range(1, d // 2 + 2):
        term = _scalar_wedge(term, y, d) / n
        out = out + term
    return out


def _trace(X):
    return np.trace(X, axis1=0, axis2=1)


def _series_log_x2_over_sinh(order: int) -> list:
    """Taylor coefficients of log((x/2)/sinh(x/2)) up to x^order (power-series arithmetic)."""
    n = order + 1
    s = np.zeros(n)
    for j in range(0, n, 2):
        s[j] = 0.5**j / math.factorial(j + 1)  # sinh(x/2)/(x/2)
    # log(1/s) = -log(1 + (s - 1))
    u = s.copy()
    u[0] = 0.0
    out = np.zeros(n)
    power = np.zeros(n)
    power[0] = 1.0
    for k in range(1, n):
        power = np.convolve(power, u)[:n]
        out -= (-1) ** (k + 1) * power / k
    return list(out)


def ahat_doubled(curvature: np.ndarray, d: int) -> np.ndarray:
    """A-hat of TM (+) TM from a real skew curvature matrix of 2-forms, shape (r, r, 2^d)."""
    X = 1j * curvature / (2 * math.pi)
    Xd = np.zeros((2 * X.shape[0], 2 * X.shape[1], X.shape[2]), dtype=complex)
    r = X.shape[0]
    Xd[:r, :r] = X
    Xd[r:, r:] = X
    L = _matrix_series(Xd, _series_log_x2_over_sinh(d + 1), d)
    return _scalar_exp(0.5 * _trace(L), d)


def todd_complexified(curvature: np.ndarray, d: int) -> np.ndarray:
    """Td(TM (x) C) = exp(tr X / 2 + sum_k a_k tr X^(2k)), a_k = -B_2k / (2k (2k)!)."""
    X = 1j * curvature / (2 * math.pi)
    B = bernoulli(d + 2)
    y = 0.5 * _trace(X)
    P = _matrix_series(X, [0, 1], d)
    X2 = _mat_wedge(P, P, d)
    Pk = None
    for k in range(1, d // 2 + 1):
        Pk = X2 if Pk is None else _mat_wedge(Pk, X2, d)
        y = y - B[2 * k] / (2 * k * math.factorial(2 * k)) * _trace(Pk)
    return _scalar_exp(y, d)


def round_sphere_curvature(d: int, du: int, dphi: int) -> np.ndarray:
    """Curvature of T(S^2) (+) R for the unit sphere in the exterior algebra on d differentials.

    In the coordinates (u, phi) the area form is -du ^ dphi and K = 1.
    """
    n = 1 << d
    Om = np.zeros((3, 3, n))
    idx = (1 << du) | (1 << dphi)
    sign = -1.0 if du < dphi else 1.0
    Om[0, 1, idx] = sign
    Om[1, 0, idx] = -sign
    return Om


# ----------------------------------------------------------------------------
# characteristic forms on strata


@dataclass(frozen=True)
class CharacteristicForms:
    stratum: FixedStratum
    todd: SampledForm
    ahat: SampledForm
    curvature: np.ndarray
    todd_full: np.ndarray
    ahat_full: np.ndarray

    @property
    def higher_degree_size(self) -> float:
        """Largest coefficient above degree 0 (vanishes on every model stratum)."""
        return float(max(np.max(np.abs(self.todd_full[1:])), np.max(np.abs(self.ahat_full[1:]))))


def stratum_carrier(stratum: FixedStratum, resolution: int, cosphere: bool = True) -> CosphereGrid:
    from .geometry import build_cosphere_grid
    if stratum.kind is StratumKind.EMPTY:
        raise EmptyStratum("empty stratum has no carrier")
    m = stratum.manifold
    if stratum.kind is StratumKind.WHOLE:
        return build_cosphere_grid(m, resolution) if cosphere else build_base_grid(m, resolution)
    if stratum.kind is StratumKind.SUBCIRCLE:
        return pole_circle_grid(m, stratum.pole, resolution, cosphere)
    raise EmptyStratum(f"stratum kind {stratum.kind.value} has no cosphere bundle")


def characteristic_forms(stratum: FixedStratum, resolution: int = 8) -> CharacteristicForms:
    grid = stratum_carrier(stratum, resolution)
    d = grid.dim
    curv = np.zeros((max(stratum.dim, 1),) * 2 + (1 << d,))
    if stratum.kind is StratumKind.WHOLE and stratum.manifold.has_sphere:
        curv = round_sphere_curvature(d, grid.axis_index("u"), grid.axis_index("phi"))
    td = todd_complexified(curv, d)
    ah = ahat_doubled(curv, d)
    ones = np.broadcast_to(td[0], grid.shape)[None, ..., None, None]
    return CharacteristicForms(stratum, SampledForm(0, grid, ones.copy()),
                               SampledForm(0, grid, np.broadcast_to(ah[0], grid.shape)[None, ..., None, None].copy()),
                               curv, td, ah)


# ----------------------------------------------------------------------------
# denominators


def _angles(x) -> tuple:
    return tuple(x.angles) if isinstance(x, FixedStratum) else tuple(float(t) for t in x)


def _check_angles(angles):
    for t in angles:
        r = math.remainder(t, 2 * math.pi)
        if abs(r) <= 1e-10:
            raise VanishingAngle(f"normal angle {t} vanishes mod 2 pi")


def lambda_minus_one(angles) -> complex:
    """sum_j (-1)^j tr(g | Lambda^j(N (x) C)) from the eigenvalues exp(+-i theta)."""
    eig = [np.exp(1j * t) for t in angles] + [np.exp(-1j * t) for t in angles]
    # np.poly gives the elementary symmetric functions e_j with sign (-1)^j
    return complex(np.sum(np.poly(eig))) if eig else 1.0 + 0j


def as_denominator(stratum_or_angles, grid: Optional[CosphereGrid] = None):
    """ch lambda_{-1}(N M_g (x) C)(g) for a flat normal bundle.

    Evaluated as the alternating trace over exterior powers; for flat
    normal bundles this is prod_j (2 - 2 cos theta_j).
    """
    angles = _angles(stratum_or_angles)
    _check_angles(angles)
    value = lambda_minus_one(angles).real
    if grid is None:
        return value
    return SampledForm(0, grid, np.full((1,) + grid.shape, value, dtype=complex))


def pfaffian(A: np.ndarray) -> complex:
    """Pfaffian of a skew-symmetric matrix by Gaussian elimination with pivoting."""
    A = np.array(A, dtype=complex)
    n = A.shape[0]
    if n % 2:
        return 0.0
    pf = 1.0 + 0j
    for k in range(0, n - 1, 2):
        p = k + 1 + int(np.argmax(np.abs(A[k, k + 1:])))
        if p != k + 1:
            A[[k + 1, p]] = A[[p, k + 1]]
            A[:, [k + 1, p]] = A[:, [p, k + 1]]
            pf = -pf
        if A[k, k + 1] == 0:
            return 0.0
        pf *= A[k, k + 1]
        if k + 2 < n:
            tau = A[k, k + 2:] / A[k, k + 1]
            A[k + 2:, k + 2:] += np.outer(tau, A[k + 2:, k + 1]) - np.outer(A[k + 2:, k + 1], tau)
    return pf


def pf_sin_denominator(stratum_or_angles, grid: Optional[CosphereGrid] = None):
    """Pf{2i sin(i Theta / 2)} with Theta the block-diagonal rotation generator (Omega = 0)."""
    angles = _angles(stratum_or_angles)
    _check_angles(angles)
    if angles:
        J = np.array([[0.0, -1.0], [1.0, 0.0]])
        Theta = scipy.linalg.block_diag(*[t * J for t in angles])
        Z = 0.5j * Theta
        sinZ = (scipy.linalg.expm(1j * Z) - scipy.linalg.expm(-1j * Z)) / 2j
        value = pfaffian(2j * sinZ).real
    else:
        value = 1.0
    if grid is None:
        return value
    return SampledForm(0, grid, np.full((1,) + grid.shape, value, dtype=complex))


# ----------------------------------------------------------------------------
# Chern character of a projection


def chern_projection(p: CrossedSymbol, idempotent_tol: float = 1e-8) -> ChernCharacter:
    """ch p = tr p exp(-(2 pi i)^-1 dp dp), expanded up to the carrier's top degree."""
    defect = convolve(p, p).distance(p)
    if defect >= idempotent_tol:
        raise NotIdempotent(f"||p*p - p|| = {defect:.3g} exceeds {idempotent_tol:.3g}")
    d = p.grid.dim
    dp = differential(p)
    curv = convolve(dp, dp)
    forms = {0: {e: SampledForm(0, p.grid, np.trace(c, axis1=-2, axis2=-1)[..., None, None])
                 for e, c in p.coeffs.items()}}
    term = p
    k = 1
    while 2 * k <= d:
        term = convolve(term, curv)
        const = (-1.0 / (2j * math.pi)) ** k / math.factorial(k)
        forms[2 * k] = {e: SampledForm(2 * k, p.grid, const * np.trace(c, axis1=-2, axis2=-1)[..., None, None])
                        for e, c in term.coeffs.items()}
        k += 1
    return ChernCharacter(p.group, p.grid, forms)


# ----------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class Contribution:
    element: tuple
    word_length: int
    stratum: str
    pole: int
    value: complex
    mass: float
    denominator: float

    def as_dict(self):
        return {"element": list(self.element), "word_length": self.word_length, "stratum": self.stratum,
                "pole": self.pole, "value": [self.value.real, self.value.imag], "mass": self.mass,
                "denominator": self.denominator}


def _envelope_slope(shell_mass: dict) -> float:
    Ls = sorted(L for L in shell_mass if L >= 1)
    A = [shell_mass[L] for L in Ls]
    if not any(a > 0 for a in A):
        return -math.inf
    env = np.maximum.accumulate(np.array(A)[::-1])[::-1]
    keep = env > 0
    x = np.log(np.array(Ls, dtype=float)[keep])
    y = np.log(env[keep])
    if len(x) < 2:
        return math.nan
    return float(np.polyfit(x, y, 1)[0])


@dataclass(frozen=True)
class IndexReport:
    formula: str
    contributions: tuple
    shell_sums: dict
    shell_masses: dict
    decay_exponent: float
    total: complex
    notes: tuple = ()

    @property
    def nearest_integer(self) -> int:
        return int(round(self.total.real))

    @property
    def distance_to_integer(self) -> float:
        return float(abs(self.total - self.nearest_integer))

    @property
    def converged(self) -> bool:
        if not self.shell_masses:
            return True
        last = self.shell_masses[max(self.shell_masses)]
        return (self.decay_exponent < -1.0 or self.decay_exponent == -math.inf) and last < 1e-6

    def partial_sums(self) -> list:
        acc, out = 0j, []
        for L in sorted(self.shell_sums):
            acc += self.shell_sums[L]
            out.append((L, acc))
        return out

    def as_dict(self):
        def cpx(z):
            return [float(z.real), float(z.imag)]
        dec = self.decay_exponent
        return {"formula": self.formula, "total": cpx(self.total), "nearest_integer": self.nearest_integer,
                "distance_to_integer": self.distance_to_integer,
                "decay_exponent": None if math.isnan(dec) else ("-inf" if dec == -math.inf else dec),
                "converged": self.converged,
                "shell_sums": {str(L): cpx(v) for L, v in sorted(self.shell_sums.items())},
                "shell_masses": {str(L): v for L, v in sorted(self.shell_masses.items())},
                "contributions": [c.as_dict() for c in self.contributions if c.mass > 0 or c.word_length == 0],
                "empty_strata": sum(1 for c in self.contributions if c.stratum == "Empty"),
                "notes": list(self.notes)}


def _abs_mass(form: SampledForm) -> float:
    g = form.grid
    return float(np.sum(g.form_weights * np.abs(form.coefficients[0, ..., 0, 0])))


def _finish(formula, contributions, notes, strict):
    sums, masses = {}, {}
    for c in contributions:
        sums[c.word_length] = sums.get(c.word_length, 0j) + c.value
        masses[c.word_length] = masses.get(c.word_length, 0.0) + c.mass
    report = IndexReport(formula, tuple(contributions), sums, masses, _envelope_slope(masses),
                         sum(sums.values(), 0j), tuple(notes))
    if strict and not report.converged:
        raise NonConvergent(f"shell masses do not decay (exponent {report.decay_exponent:.3g})", report)
    return report


def _evaluate(sigma: CrossedSymbol, shell_max: int, formula: str, cosphere: bool, strict: bool,
              character, weight, denominator, orientation: float, tolerance: float,
              support_radius: Optional[int], resolution: Optional[int]) -> IndexReport:
    group = sigma.group
    resolution = resolution or max(len(ax) for ax in sigma.grid.axes if ax.periodic)
    cache = {}
    contributions, notes = [], []
    empty = 0
    for g in ball(group, shell_max):
        for st in fixed_strata(g):
            if st.kind is StratumKind.EMPTY or st.dim == 0:
                empty += 1
                contributions.append(Contribution(g.exps, g.word_length, st.kind.value, 0, 0j, 0.0, 1.0))
                continue
            key = (st.kind, st.pole)
            if key not in cache:
                if st.kind is StratumKind.WHOLE:
                    grid = sigma.grid
                    sym = sigma
                else:
                    grid = stratum_carrier(st, resolution, cosphere)
                    sym = sigma.restrict(grid)
                cache[key] = character(sym)
            ch = cache[key]
            top = ch.grid.dim
            form = ch.coefficient(top, g.exps)
            if form is None:
                contributions.append(Contribution(g.exps, g.word_length, st.kind.value, st.pole, 0j, 0.0, 1.0))
                continue
            den = denominator(st)
            scaled = SampledForm(top, form.grid, orientation * weight(st) * form.coefficients / den)
            value = integrate_form(scaled)
            contributions.append(Contribution(g.exps, g.word_length, st.kind.value, st.pole, complex(value),
                                              _abs_mass(scaled), float(den)))
    if empty:
        notes.append(f"{empty} strata without a cosphere bundle contributed exactly 0")
    return _finish(formula, contributions, notes, strict)


def evaluate_fixedp(sigma: CrossedSymbol, shell_max: int = 8, strict: bool = False, tolerance: float = 1e-10,
                    support_radius: Optional[int] = None, resolution: Optional[int] = None,
                    radius: Optional[int] = None) -> IndexReport:
    """sum_g sum_{M_g} int_{S*M_g} Td(T*M_g (x) C) ch sigma(g) / ch lambda_{-1}(N M_g (x) C)(g)."""
    def character(sym):
        return cs_character(sym, tolerance=tolerance, support_radius=support_radius, radius=radius)
    return _evaluate(sigma, shell_max, "fixedp", True, strict, character, lambda st: 1.0,
                     as_denominator, 1.0, tolerance, support_radius, resolution)


def evaluate_local_odd(sigma: CrossedSymbol, shell_max: int = 8, strict: bool = False, tolerance: float = 1e-10,
                       support_radius: Optional[int] = None, resolution: Optional[int] = None) -> IndexReport:
    """Toeplitz index sum_g sum_{X_g} int_{X_g} A-hat(X_g) Pf{...}^-1 ch sigma(g)."""
    def character(sym):
        return cs_character(sym, tolerance=tolerance, support_radius=support_radius)
    return _evaluate(sigma, shell_max, "local_odd", False, strict, character, lambda st: 1.0,
                     pf_sin_denominator, ODD_ORIENTATION, tolerance, support_radius, resolution)


def evaluate_dirac_even(p: CrossedSymbol, shell_max: int = 4, strict: bool = False,
                        idempotent_tol: float = 1e-8) -> IndexReport:
    """Even formula: per-g integrals of A-hat Pf{...}^-1 ch p(g) over the fixed strata."""
    ch = chern_projection(p, idempotent_tol)

    def character(sym):
        if sym is not p:
            return chern_projection(sym, idempotent_tol)
        return ch
    return _evaluate(p, shell_max, "dirac_even", False, strict, character, lambda st: 1.0,
                     pf_sin_denominator, EVEN_ORIENTATION, 0.0, None, None)
