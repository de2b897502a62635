"""Crossed-product symbols: finitely supported families g -> a(g) on a grid.

A symbol stands for ``sum_g (dg*)^-1 o a(g)``.  Coefficients are
matrix-valued differential forms sampled on a grid, stored as arrays of
shape ``(n_basis, *grid.shape, m, m)`` keyed by the exponent tuple of g.
The product is the twisted convolution

    (a * b)(g) = sum_{hk = g} (a(h) o dk) . b(k)

where ``a(h) o dk`` is a(h) evaluated at the translate of each node by k
(trigonometric interpolation), and ``.`` is the wedge product of forms
combined with the matrix product at each node.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (AlgebraMismatch, InsufficientSupport, NotElliptic, TopDegree,
                     TruncationInsufficient)
from .geometry import CosphereGrid, SampledForm, basis_size, derivative, translate, wedge_table
from .group_action import GroupElement, IsometryGroup, Law, ball
from .operator_spec import OperatorSpec, SymbolSpec

DROP = 1e-14


def axis_shifts(grid: CosphereGrid, group: IsometryGroup, exps_list) -> np.ndarray:
    """Translations (radians) along the grid axes induced by group elements."""
    coords = group.manifold.periodic_coordinates
    flat = group.manifold.flat_factors
    cols = []
    for ax in grid.axes:
        if ax.role == "flat0":
            cols.append(coords.index(flat[0]))
        elif ax.role == "flat1":
            cols.append(coords.index(flat[1]))
        elif ax.role == "azimuth":
            cols.append(coords.index("phi"))
        else:
            cols.append(None)
    out = np.zeros((len(exps_list), len(grid.axes)))
    for r, exps in enumerate(exps_list):
        s = group.shift(exps)
        for i, c in enumerate(cols):
            if c is not None:
                out[r, i] = s[c]
    return out


def _fit_slope(lengths, values) -> float:
    x = np.log1p(np.asarray(lengths, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


@dataclass(frozen=True, eq=False)
class CrossedSymbol:
    group: IsometryGroup
    grid: CosphereGrid
    m: int
    coeffs: dict
    degree: int = 0
    source: Optional[Callable] = field(default=None, repr=False)
    decay: Optional[float] = field(default=None, init=False)

    def __post_init__(self):
        nb = basis_size(self.grid.dim, self.degree)
        shape = (nb,) + self.grid.shape + (self.m, self.m)
        clean = {}
        for exps, c in self.coeffs.items():
            exps = tuple(exps)
            if self.group.law is Law.CYCLIC:
                exps = (exps[0] % self.group.order,)
            c = np.asarray(c, dtype=complex)
            if c.shape == shape[1:]:
                c = c[None]
            if c.shape != shape:
                raise AlgebraMismatch(f"coefficient shape {c.shape}, expected {shape}")
            if not np.all(np.isfinite(c)):
                raise ValueError("symbol coefficients must be finite")
            clean[exps] = clean[exps] + c if exps in clean else c
        object.__setattr__(self, "coeffs", clean)
        object.__setattr__(self, "decay", self._decay_or_none())

    # -- construction ------------------------------------------------------

    @classmethod
    def identity(cls, group, grid, m=1):
        return cls.monomial(group.identity, grid, np.eye(m))

    @classmethod
    def monomial(cls, g: GroupElement, grid: CosphereGrid, value, source=None):
        value = np.asarray(value, dtype=complex)
        if value.ndim <= 1:
            value = value.reshape(value.shape + (1, 1)) if value.ndim == 0 else value
        if value.ndim == 2:  # constant matrix
            m = value.shape[0]
            value = np.broadcast_to(value, grid.shape + (m, m))
        else:
            value = np.broadcast_to(value, grid.shape + value.shape[-2:]) if value.shape[:-2] != grid.shape else value
        return cls(g.group, grid, value.shape[-1], {g.exps: value}, 0, source)

    @classmethod
    def from_function(cls, group, grid, m, support, func):
        """``func(grid, exps)`` returns values of shape ``(*grid.shape, m, m)``."""
        coeffs = {tuple(e): func(grid, tuple(e)) for e in support}
        return cls(group, grid, m, coeffs, 0, func)

    # -- access ------------------------------------------------------------

    @property
    def n_basis(self) -> int:
        return basis_size(self.grid.dim, self.degree)

    def zeros(self):
        return np.zeros((self.n_basis,) + self.grid.shape + (self.m, self.m), dtype=complex)

    def __getitem__(self, exps):
        if isinstance(exps, GroupElement):
            exps = exps.exps
        exps = tuple(exps)
        if self.group.law is Law.CYCLIC:
            exps = (exps[0] % self.group.order,)
        return self.coeffs.get(exps, self.zeros())

    @property
    def support(self) -> list:
        return sorted((self.group.element(*e) for e in self.coeffs), key=lambda g: (g.word_length, g.exps))

    @property
    def radius(self) -> int:
        return max((self.group.word_length(e) for e in self.coeffs), default=0)

    def norms(self) -> dict:
        return {e: float(np.max(np.abs(c))) if c.size else 0.0 for e, c in self.coeffs.items()}

    def sup_norm(self) -> float:
        return max(self.norms().values(), default=0.0)

    def form(self, exps) -> SampledForm:
        return SampledForm(self.degree, self.grid, self[exps])

    def _decay_or_none(self):
        try:
            return decay_profile(self)
        except InsufficientSupport:
            return None

    def replace(self, coeffs, degree=None, source=None):
        return CrossedSymbol(self.group, self.grid, self.m, coeffs,
                             self.degree if degree is None else degree, source)

    def truncated(self, radius: int):
        return self.replace({e: c for e, c in self.coeffs.items() if self.group.word_length(e) <= radius},
                            source=self.source)

    def pruned(self, floor: float = DROP):
        return self.replace({e: c for e, c in self.coeffs.items() if c.size and np.max(np.abs(c)) >= floor},
                            source=self.source)

    def restrict(self, grid: CosphereGrid):
        """Resample on another grid (e.g. a stratum's cosphere bundle) via ``source``."""
        if self.source is None:
            raise AlgebraMismatch("symbol has no source function for resampling")
        if self.degree != 0:
            raise AlgebraMismatch("only functions can be resampled")
        return CrossedSymbol(self.group, grid, self.m,
                             {e: self.source(grid, e) for e in self.coeffs}, 0, self.source)

    # -- linear structure ----------------------------------------------------

    def _check(self, other):
        if other.group is not self.group or other.grid is not self.grid or other.m != self.m:
            raise AlgebraMismatch("symbols live over different groups, grids or matrix sizes")

    def __add__(self, other):
        self._check(other)
        if other.degree != self.degree:
            raise AlgebraMismatch("cannot add forms of different degree")
        coeffs = dict(self.coeffs)
        for e, c in other.coeffs.items():
            coeffs[e] = coeffs[e] + c if e in coeffs else c
        src = None
        if self.source is not None and other.source is not None and self.degree == 0:
            s1, s2 = self.source, other.source
            src = lambda grid, e: s1(grid, e) + s2(grid, e)
        return self.replace(coeffs, source=src)

    def __rmul__(self, s):
        src = None
        if self.source is not None:
            f = self.source
            src = lambda grid, e: s * f(grid, e)
        return self.replace({e: s * c for e, c in self.coeffs.items()}, source=src)

    def __neg__(self):
        return (-1.0) * self

    def __sub__(self, other):
        return self + (-other)

    def distance(self, other) -> float:
        """Sup-norm distance over all coefficients."""
        self._check(other)
        keys = set(self.coeffs) | set(other.coeffs)
        return max((float(np.max(np.abs(self[e] - other[e]))) for e in keys), default=0.0)

    def __matmul__(self, other):
        return convolve(self, other)


# ----------------------------------------------------------------------------
# product


def _wedge_matmul(A, B, table, nb_out):
    """Wedge + matrix product.  A: (H, nbA, P, m, m) or (nbA, P, m, m); B: (nbB, P, m, m)."""
    ii, jj, kk, ss = table
    lead = A.shape[:-4]
    out = np.zeros(lead + (nb_out,) + A.shape[-3:], dtype=complex)
    for i, j, k, s in zip(ii, jj, kk, ss):
        if A.shape[-1] == 1:
            prod = A[..., i, :, :, :] * B[j]
        else:
            prod = A[..., i, :, :, :] @ B[j]
        out[..., k, :, :, :] += s * prod
    return out


def convolve(a: CrossedSymbol, b: CrossedSymbol, radius: Optional[int] = None) -> CrossedSymbol:
    """Twisted convolution; coefficients below 1e-14 are dropped."""
    a._check(b)
    grid, group = a.grid, a.group
    d = grid.dim
    deg = a.degree + b.degree
    nb_out = basis_size(d, deg)
    table = wedge_table(d, a.degree, b.degree)
    P = int(np.prod(grid.shape))
    m = a.m
    a_keys = list(a.coeffs)
    b_keys = list(b.coeffs)
    out = {}
    if not a_keys or not b_keys or nb_out == 0:
        return CrossedSymbol(group, grid, m, {}, deg)
    A = np.stack([a.coeffs[e] for e in a_keys])  # (H, nbA, *shape, m, m)
    shifts = axis_shifts(grid, group, b_keys)
    for kidx, k in enumerate(b_keys):
        s = shifts[kidx]
        if np.any(s):
            At = translate(A, grid, s[None], offset=2)[0]
        else:
            At = A
        At = At.reshape(At.shape[:2] + (P, m, m))
        Bk = b.coeffs[k].reshape((b.coeffs[k].shape[0], P, m, m))
        prods = _wedge_matmul(At, Bk, table, nb_out)
        for hidx, h in enumerate(a_keys):
            target = group.element(*(x + y for x, y in zip(h, k))).exps
            if radius is not None and group.word_length(target) > radius:
                continue
            if target in out:
                out[target] += prods[hidx]
            else:
                out[target] = prods[hidx].copy()
    shape = (nb_out,) + grid.shape + (m, m)
    coeffs = {e: c.reshape(shape) for e, c in out.items() if np.max(np.abs(c)) >= DROP}
    return CrossedSymbol(group, grid, m, coeffs, deg)


# ----------------------------------------------------------------------------
# differential


def differential(a: CrossedSymbol) -> CrossedSymbol:
    """Exterior derivative applied coefficient-wise (it commutes with the twist)."""
    d = a.grid.dim
    if a.degree >= d:
        raise TopDegree(f"cannot differentiate a {a.degree}-form on a {d}-dimensional carrier")
    ii, jj, kk, ss = wedge_table(d, 1, a.degree)
    nb_out = basis_size(d, a.degree + 1)
    out = {}
    for e, c in a.coeffs.items():
        partials = [derivative(c, a.grid, axis, offset=1) for axis in range(d)]
        dc = np.zeros((nb_out,) + c.shape[1:], dtype=complex)
        for i, j, k, s in zip(ii, jj, kk, ss):
            dc[k] += s * partials[i][j]
        if np.max(np.abs(dc)) >= DROP:
            out[e] = dc
    return a.replace(out, degree=a.degree + 1)


# ----------------------------------------------------------------------------
# inversion


@dataclass(frozen=True)
class InversionDiagnostics:
    method: str
    residual_left: float
    residual_right: float
    smin: tuple = ()  # (radius, smallest singular value) of the tall sections
    scale: float = 1.0

    def as_dict(self):
        return {"method": self.method, "residual_left": self.residual_left,
                "residual_right": self.residual_right, "smin": [list(v) for v in self.smin], "scale": self.scale}


def _unit_residuals(a, b):
    one = CrossedSymbol.identity(a.group, a.grid, a.m)
    return convolve(a, b).distance(one), convolve(b, a).distance(one)


def _section(a: CrossedSymbol, rows, cols):
    """Blocks a(r c^-1)(c . y) for all nodes y: shape (P, len(rows) m, len(cols) m)."""
    group, grid, m = a.group, a.grid, a.m
    P = int(np.prod(grid.shape))
    row_index = {g.exps: i for i, g in enumerate(rows)}
    keys = list(a.coeffs)
    A = np.stack([a.coeffs[e][0] for e in keys])  # (H, *shape, m, m)
    shifted = translate(A, grid, axis_shifts(grid, group, [c.exps for c in cols]), offset=1)
    shifted = shifted.reshape((len(cols), len(keys), P, m, m))
    M = np.zeros((P, len(rows), m, len(cols), m), dtype=complex)
    for ci, c in enumerate(cols):
        for hi, h in enumerate(keys):
            r = group.element(*(x + y for x, y in zip(h, c.exps))).exps
            ri = row_index.get(r)
            if ri is not None:
                M[:, ri, :, ci, :] += shifted[ci, hi]
    return M.reshape(P, len(rows) * m, len(cols) * m)


def _smallest_singular(M):
    return float(np.min(np.linalg.svd(M, compute_uv=False)[:, -1]))


def _representation_solve(a, R, support_radius):
    group, m = a.group, a.m
    ra = a.radius
    if group.law is Law.CYCLIC:
        cols = rows = ball(group, group.order)
    else:
        cols = ball(group, R)
        rows = ball(group, R + ra)
    M = _section(a, rows, cols)
    e_row = [i for i, g in enumerate(rows) if g.is_identity][0]
    rhs = np.zeros((M.shape[1], m), dtype=complex)
    rhs[e_row * m:(e_row + 1) * m] = np.eye(m)
    Q, Rm = np.linalg.qr(M)
    X = np.linalg.solve(Rm, np.conj(np.swapaxes(Q, -1, -2)) @ rhs)  # (P, ncols m, m)
    coeffs = {}
    shape = a.grid.shape
    for ci, c in enumerate(cols):
        if c.word_length <= support_radius:
            block = X[:, ci * m:(ci + 1) * m, :].reshape(shape + (m, m))
            if np.max(np.abs(block)) >= DROP:
                coeffs[c.exps] = block
    return a.replace(coeffs), rows, cols, M


def _diagnose(a, R, scale):
    """Smallest singular values of the tall sections at growing radii."""
    group = a.group
    radii = sorted({max(1, R // 4), max(1, R // 2), R}) if group.rank else [0]
    if group.law is Law.CYCLIC:
        radii = [group.order]
    out = []
    for r in radii:
        rows = ball(group, r + a.radius) if group.law is not Law.CYCLIC else ball(group, r)
        out.append((r, _smallest_singular(_section(a, rows, ball(group, r)))))
    return tuple(out)


def _monomial_inverse(g_exps, value, a):
    """Inverse of delta_g (x) f is delta_{g^-1} (x) (f^-1 o d(g^-1))."""
    group, grid = a.group, a.grid
    inv_exps = group.element(*(-x for x in g_exps)).exps
    finv = np.linalg.inv(value[0])
    s = axis_shifts(grid, group, [inv_exps])
    if np.any(s):
        finv = translate(finv, grid, s, offset=0)[0]
    return a.replace({inv_exps: finv})


def _neumann(a, tolerance, support_radius, max_terms=400):
    norms = a.norms()
    g0 = max(norms, key=norms.get)
    dom = a.coeffs[g0]
    smin = float(np.min(np.linalg.svd(dom[0], compute_uv=False)))
    rest = sum(v for e, v in norms.items() if e != g0)
    if not rest < (1 - 1e-3) * smin:
        return None
    dinv = _monomial_inverse(g0, dom, a)
    one = CrossedSymbol.identity(a.group, a.grid, a.m)
    r = one - convolve(dinv, a)
    term = dinv
    total = dinv
    for _ in range(max_terms):
        term = convolve(r, term, radius=support_radius)
        if not term.coeffs or term.sup_norm() < tolerance * 1e-3:
            break
        total = total + term
    return total.pruned()


def invert(a: CrossedSymbol, tolerance: float = 1e-10, support_radius: Optional[int] = None,
           method: str = "auto", ball_radius: Optional[int] = None) -> CrossedSymbol:
    """Two-sided inverse with support truncated to ``|g| <= support_radius``.

    The default realizes ``a`` in the left regular representation on
    each orbit, ``A_y[r, c] = a(r c^-1)(c . y)``, on a tall section
    ``ball(R + radius(a)) x ball(R)`` and solves for the column at the
    identity in the least-squares sense.  ``method="neumann"`` forces the
    geometric series around a dominant coefficient; ``"auto"`` tries it
    when the representation solve misses the tolerance.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    if a.degree != 0:
        raise AlgebraMismatch("only functions can be inverted")
    if support_radius is None:
        # rank-one groups are cheap enough to widen the support until the tail fits
        base = max(32, 4 * a.radius)
        radii = (base, 2 * base, 4 * base) if a.group.rank == 1 and a.group.law is Law.FREE_ABELIAN else (base,)
        previous = math.inf
        for i, sr in enumerate(radii):
            try:
                return invert(a, tolerance, sr, method, ball_radius)
            except TruncationInsufficient as exc:
                d = exc.diagnostics
                residual = max(d.residual_left, d.residual_right)
                # a residual that does not shrink with the support is aliasing: stop widening
                if i == len(radii) - 1 or residual > 0.1 * previous:
                    raise
                previous = residual
    if support_radius < a.radius:
        raise ValueError("support_radius must be at least the radius of the symbol's support")
    scale = max(sum(a.norms().values()), 1e-300)
    if method == "neumann":
        b = _neumann(a, tolerance, support_radius)
        if b is None:
            raise NotElliptic("no coefficient dominates; the Neumann series does not apply",
                              InversionDiagnostics("neumann", math.inf, math.inf, scale=scale))
        left, right = _unit_residuals(a, b)
        return b if max(left, right) < tolerance else _fail(a, b, left, right, support_radius, scale, "neumann")
    R = ball_radius or support_radius + max(8, support_radius // 2)
    b, *_ = _representation_solve(a, R, support_radius)
    left, right = _unit_residuals(a, b)
    if max(left, right) < tolerance:
        return b
    if method == "auto":
        nb = _neumann(a, tolerance, support_radius)
        if nb is not None:
            l2, r2 = _unit_residuals(a, nb)
            if max(l2, r2) < tolerance:
                return nb
    return _fail(a, b, left, right, R, scale, "representation")


def _fail(a, b, left, right, R, scale, method):
    smin = _diagnose(a, R, scale)
    diag = InversionDiagnostics(method, left, right, smin, scale)
    floor = 1e-9 * scale
    values = [s for _, s in smin]
    collapsing = values[-1] < floor or (len(values) > 1 and values[-1] < 0.8 * values[0])
    if collapsing:
        raise NotElliptic(f"regular-representation sections degenerate (smallest singular values {values})", diag)
    raise TruncationInsufficient(f"residual {max(left, right):.3g} exceeds tolerance with healthy sections; "
                                 "enlarge support_radius or the grid resolution", diag)


def is_elliptic(a: CrossedSymbol, **kwargs) -> bool:
    try:
        invert(a, **kwargs)
        return True
    except NotElliptic:
        return False


# ----------------------------------------------------------------------------
# Chern-Simons character


@dataclass(frozen=True)
class ChernCharacter:
    """Coefficients ch(g) of an odd or even Chern character, by degree."""

    group: IsometryGroup
    grid: CosphereGrid
    forms: dict  # degree -> {exps: SampledForm}

    def items(self, degree: int) -> list:
        return [(self.group.element(*e), f) for e, f in sorted(self.forms.get(degree, {}).items())]

    def coefficient(self, degree: int, exps) -> Optional[SampledForm]:
        return self.forms.get(degree, {}).get(tuple(exps))


def _trace_form(c: np.ndarray) -> np.ndarray:
    return np.trace(c, axis1=-2, axis2=-1)[..., None, None]


def cs_character(a: CrossedSymbol, inverse: Optional[CrossedSymbol] = None, tolerance: float = 1e-10,
                 support_radius: Optional[int] = None, radius: Optional[int] = None) -> ChernCharacter:
    """ch_{2k+1} a = (2 pi i)^-(k+1) k!/(2k+1)! tr (a^-1 da)^(2k+1), all degrees up to the carrier's."""
    if inverse is None:
        inverse = invert(a, tolerance, support_radius)
    omega = convolve(inverse, differential(a), radius=radius)
    d = a.grid.dim
    forms = {}
    power = omega
    k = 0
    while 2 * k + 1 <= d:
        const = (1.0 / (2j * math.pi)) ** (k + 1) * math.factorial(k) / math.factorial(2 * k + 1)
        forms[2 * k + 1] = {e: SampledForm(2 * k + 1, a.grid, const * _trace_form(c))
                            for e, c in power.coeffs.items()}
        k += 1
        if 2 * k + 1 <= d:
            power = convolve(convolve(power, omega, radius=radius), omega, radius=radius)
    return ChernCharacter(a.group, a.grid, forms)


# ----------------------------------------------------------------------------
# symbols of specs, decay


def symbol_of_spec(spec, grid: CosphereGrid) -> CrossedSymbol:
    """Principal symbol sum_g (dg*)^-1 o sigma(D_g) sampled on ``grid``."""
    if isinstance(spec, OperatorSpec):
        func = lambda g, e: spec.principal_symbol(e, g)
    elif isinstance(spec, SymbolSpec):
        func = lambda g, e: spec.values(e, g)
    else:
        raise TypeError(f"cannot take the symbol of {type(spec).__name__}")
    return CrossedSymbol.from_function(spec.group, grid, spec.m, spec.support, func).pruned()


def decay_profile(a) -> float:
    """Slope of log max_{|g|=L} ||a(g)|| against log(1 + L)."""
    env = {}
    for e, c in a.coeffs.items():
        L = a.group.word_length(e)
        v = float(np.max(np.abs(c))) if c.size else 0.0
        env[L] = max(env.get(L, 0.0), v)
    env = {L: v for L, v in env.items() if v > 0}
    if len(env) < 3:
        raise InsufficientSupport(f"support spans {len(env)} word lengths; need at least 3")
    Ls = sorted(env)
    return _fit_slope(Ls, [env[L] for L in Ls])
