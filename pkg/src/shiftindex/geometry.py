"""Model manifolds, quadrature grids on their cosphere bundles, sampled forms.

Three model geometries are supported: the unit circle, the flat torus
``T^2 = (R/2piZ)^2`` and the product ``S^2 x S^1`` of the unit round sphere
with the unit circle.  Every grid is a tensor product of one-dimensional
axes (periodic trapezoidal, or Gauss-Legendre in the cosine of a polar
angle) times a finite set of *components*; for the circle the two
components are the fiber points ``xi = +1`` and ``xi = -1``.

Form coefficients always refer to the coordinate differentials of the
grid axes in their listed order.  On the sphere factor the polar coordinate
is ``u = cos(theta)``, for which the round area element is ``du dphi`` up to
orientation, so all Riemannian densities are identically one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from itertools import combinations
from typing import Optional

import numpy as np

from .errors import BadResolution, DegreeMismatch, UnsupportedGeometry

TWO_PI = 2.0 * math.pi


class Kind(str, Enum):
    CIRCLE = "circle"
    TORUS2 = "torus2"
    SPHERE_CROSS_CIRCLE = "sphere_x_circle"


_DIMS = {Kind.CIRCLE: 1, Kind.TORUS2: 2, Kind.SPHERE_CROSS_CIRCLE: 3}
_FLAT = {Kind.CIRCLE: ("x",), Kind.TORUS2: ("x", "y"), Kind.SPHERE_CROSS_CIRCLE: ("t",)}
# unit sphere volumes S^0, S^1, S^2
_SPHERE_VOL = {0: 2.0, 1: TWO_PI, 2: 4.0 * math.pi}


@dataclass(frozen=True)
class ManifoldModel:
    kind: Kind
    metric: str = field(init=False)
    orientation: int = field(init=False, default=1)

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        metric = "round x flat" if self.kind is Kind.SPHERE_CROSS_CIRCLE else "flat"
        object.__setattr__(self, "metric", metric)

    @property
    def dim(self) -> int:
        return _DIMS[self.kind]

    @property
    def flat_factors(self) -> tuple[str, ...]:
        return _FLAT[self.kind]

    @property
    def has_sphere(self) -> bool:
        return self.kind is Kind.SPHERE_CROSS_CIRCLE

    @property
    def periodic_coordinates(self) -> tuple[str, ...]:
        """Coordinates in which coefficient trig polynomials are written."""
        if self.has_sphere:
            return ("phi", "t")
        return self.flat_factors

    def volume(self) -> float:
        if self.kind is Kind.CIRCLE:
            return TWO_PI
        if self.kind is Kind.TORUS2:
            return TWO_PI**2
        return 4.0 * math.pi * TWO_PI

    def cosphere_volume(self) -> float:
        return self.volume() * _SPHERE_VOL[self.dim - 1]

    def distance(self, p, q) -> np.ndarray:
        """Riemannian distance between points given in manifold coordinates.

        Circle: ``(x,)``; torus: ``(x, y)``; sphere x circle: ``(theta, phi, t)``.
        """
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        if self.kind is Kind.SPHERE_CROSS_CIRCLE:
            th1, ph1, t1 = np.moveaxis(p, -1, 0)
            th2, ph2, t2 = np.moveaxis(q, -1, 0)
            # atan2 form stays accurate for nearly coincident points, unlike arccos
            p3 = np.stack([np.sin(th1) * np.cos(ph1), np.sin(th1) * np.sin(ph1), np.cos(th1)], axis=-1)
            q3 = np.stack([np.sin(th2) * np.cos(ph2), np.sin(th2) * np.sin(ph2), np.cos(th2)], axis=-1)
            great = np.arctan2(np.linalg.norm(np.cross(p3, q3), axis=-1), np.sum(p3 * q3, axis=-1))
            return np.hypot(great, circle_distance(t1, t2))
        return np.sqrt(np.sum(circle_distance(p, q) ** 2, axis=-1))


def circle(): return ManifoldModel(Kind.CIRCLE)


def torus2(): return ManifoldModel(Kind.TORUS2)


def sphere_cross_circle(): return ManifoldModel(Kind.SPHERE_CROSS_CIRCLE)


def manifold_from_name(name: str) -> ManifoldModel:
    aliases = {"circle": Kind.CIRCLE, "s1": Kind.CIRCLE, "torus2": Kind.TORUS2, "torus": Kind.TORUS2,
               "t2": Kind.TORUS2, "sphere_x_circle": Kind.SPHERE_CROSS_CIRCLE,
               "s2xs1": Kind.SPHERE_CROSS_CIRCLE, "stretch": Kind.SPHERE_CROSS_CIRCLE}
    try:
        return ManifoldModel(aliases[name.lower()])
    except KeyError:
        raise UnsupportedGeometry(f"unknown manifold {name!r}") from None


def circle_distance(a, b):
    """Distance on R/2piZ; never raw subtraction."""
    d = np.mod(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), TWO_PI)
    return np.minimum(d, TWO_PI - d)


# ----------------------------------------------------------------------------
# axes and grids


@dataclass(frozen=True, eq=False)
class Axis:
    name: str
    periodic: bool
    nodes: np.ndarray
    weights: np.ndarray
    role: Optional[str] = None  # "flat0", "flat1", "azimuth" or None

    def __len__(self):
        return len(self.nodes)

    @classmethod
    def trapezoid(cls, name, n, role=None):
        return cls(name, True, TWO_PI * np.arange(n) / n, np.full(n, TWO_PI / n), role)

    @classmethod
    def legendre(cls, name, n):
        x, w = np.polynomial.legendre.leggauss(n)
        return cls(name, False, x, w, None)


@dataclass(frozen=True, eq=False)
class CosphereGrid:
    """Tensor-product quadrature grid.

    Array layout for sampled data is ``(n_components, len(axis_0), ...)``.
    ``orientation`` holds one sign per component; it multiplies top-degree
    coefficients during integration.
    """

    manifold: ManifoldModel
    axes: tuple[Axis, ...]
    components: tuple
    orientation: np.ndarray
    points: dict
    carrier: str  # "cosphere", "base" or "stratum"
    label: str = ""

    @property
    def shape(self) -> tuple[int, ...]:
        return (len(self.components),) + tuple(len(a) for a in self.axes)

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def form_weights(self) -> np.ndarray:
        w = np.ones(self.shape)
        for i, ax in enumerate(self.axes):
            sh = [1] * len(self.shape)
            sh[i + 1] = len(ax)
            w = w * ax.weights.reshape(sh)
        return w

    @property
    def weights(self) -> np.ndarray:
        # every density is one in the chosen coordinates (see module docstring)
        return self.form_weights

    def axis_index(self, name: str) -> int:
        for i, ax in enumerate(self.axes):
            if ax.name == name:
                return i
        raise KeyError(name)

    def coordinate(self, name: str) -> np.ndarray:
        return np.broadcast_to(self.points[name], self.shape)


def _broadcast_axis(values, i, ndim):
    sh = [1] * ndim
    sh[i + 1] = len(values)
    return np.asarray(values).reshape(sh)


def _component_array(values, ndim):
    return np.asarray(values, dtype=float).reshape((len(values),) + (1,) * (ndim - 1))


def _orientation_sign(n: int) -> int:
    # S*M oriented as the boundary of the unit co-ball in T*M carrying the
    # orientation dx_1 dxi_1 ... dx_n dxi_n; coordinates ordered (base, fiber)
    return (-1) ** (n * (n - 1) // 2) * (-1) ** n


def build_cosphere_grid(manifold: ManifoldModel, resolution: int) -> CosphereGrid:
    """Quadrature grid on S*M, exact for trig polynomials of degree < resolution."""
    if resolution < 4:
        raise BadResolution(f"resolution must be >= 4, got {resolution}")
    kind = manifold.kind
    if kind is Kind.CIRCLE:
        ax = Axis.trapezoid("x", resolution, role="flat0")
        comps = (1, -1)
        pts = {"x": _broadcast_axis(ax.nodes, 0, 2), "xi": _component_array(comps, 2)}
        orient = -np.array(comps, dtype=float)
        return CosphereGrid(manifold, (ax,), comps, orient, pts, "cosphere", "S*S1")
    if kind is Kind.TORUS2:
        axes = (Axis.trapezoid("x", resolution, "flat0"), Axis.trapezoid("y", resolution, "flat1"),
                Axis.trapezoid("fiber", resolution))
        nd = 4
        fib = _broadcast_axis(axes[2].nodes, 2, nd)
        pts = {"x": _broadcast_axis(axes[0].nodes, 0, nd), "y": _broadcast_axis(axes[1].nodes, 1, nd),
               "xi1": np.cos(fib), "xi2": np.sin(fib)}
        orient = np.array([float(_orientation_sign(2))])
        return CosphereGrid(manifold, axes, (None,), orient, pts, "cosphere", "S*T2")
    if kind is Kind.SPHERE_CROSS_CIRCLE:
        npol = max(2, resolution // 2)
        axes = (Axis.legendre("u", npol), Axis.trapezoid("phi", resolution, "azimuth"),
                Axis.trapezoid("t", resolution, "flat0"), Axis.legendre("uf", npol),
                Axis.trapezoid("chi", resolution))
        nd = 6
        uf = _broadcast_axis(axes[3].nodes, 3, nd)
        chi = _broadcast_axis(axes[4].nodes, 4, nd)
        sf = np.sqrt(1.0 - uf**2)
        pts = {"u": _broadcast_axis(axes[0].nodes, 0, nd), "phi": _broadcast_axis(axes[1].nodes, 1, nd),
               "t": _broadcast_axis(axes[2].nodes, 2, nd), "xi_theta": sf * np.cos(chi),
               "xi_phi": sf * np.sin(chi), "xi_t": uf}
        # theta = arccos(u) and psi = arccos(uf) both reverse orientation
        orient = np.array([float(_orientation_sign(3))])
        return CosphereGrid(manifold, axes, (None,), orient, pts, "cosphere", "S*(S2xS1)")
    raise UnsupportedGeometry(str(kind))


def build_base_grid(manifold: ManifoldModel, resolution: int) -> CosphereGrid:
    """Quadrature grid on M itself (carrier of the even and odd Dirac formulas)."""
    if resolution < 4:
        raise BadResolution(f"resolution must be >= 4, got {resolution}")
    kind = manifold.kind
    if kind is Kind.CIRCLE:
        ax = Axis.trapezoid("x", resolution, "flat0")
        return CosphereGrid(manifold, (ax,), (None,), np.array([1.0]),
                            {"x": _broadcast_axis(ax.nodes, 0, 2)}, "base", "S1")
    if kind is Kind.TORUS2:
        axes = (Axis.trapezoid("x", resolution, "flat0"), Axis.trapezoid("y", resolution, "flat1"))
        pts = {"x": _broadcast_axis(axes[0].nodes, 0, 3), "y": _broadcast_axis(axes[1].nodes, 1, 3)}
        return CosphereGrid(manifold, axes, (None,), np.array([1.0]), pts, "base", "T2")
    if kind is Kind.SPHERE_CROSS_CIRCLE:
        axes = (Axis.legendre("u", max(2, resolution // 2)), Axis.trapezoid("phi", resolution, "azimuth"),
                Axis.trapezoid("t", resolution, "flat0"))
        pts = {"u": _broadcast_axis(axes[0].nodes, 0, 4), "phi": _broadcast_axis(axes[1].nodes, 1, 4),
               "t": _broadcast_axis(axes[2].nodes, 2, 4)}
        # (u, phi) is opposite to the outward orientation (theta, phi)
        return CosphereGrid(manifold, axes, (None,), np.array([-1.0]), pts, "base", "S2xS1")
    raise UnsupportedGeometry(str(kind))


def pole_circle_grid(manifold: ManifoldModel, pole: int, resolution: int, cosphere: bool = True) -> CosphereGrid:
    """Grid on ``{pole} x S^1`` (or its cosphere bundle) inside ``S^2 x S^1``.

    ``pole`` is +1 for the north pole (u = 1) and -1 for the south pole.
    """
    if manifold.kind is not Kind.SPHERE_CROSS_CIRCLE:
        raise UnsupportedGeometry("pole circles exist only on sphere x circle")
    if resolution < 4:
        raise BadResolution(f"resolution must be >= 4, got {resolution}")
    ax = Axis.trapezoid("t", resolution, "flat0")
    t = _broadcast_axis(ax.nodes, 0, 2)
    if cosphere:
        comps = (1, -1)
        xi = _component_array(comps, 2)
        pts = {"u": np.full((1, 1), float(pole)), "phi": np.zeros((1, 1)), "t": t, "xi_t": xi,
               "xi_theta": np.zeros((1, 1)), "xi_phi": np.zeros((1, 1))}
        return CosphereGrid(manifold, (ax,), comps, -np.array(comps, dtype=float), pts, "stratum",
                            f"S*({'N' if pole > 0 else 'S'}xS1)")
    pts = {"u": np.full((1, 1), float(pole)), "phi": np.zeros((1, 1)), "t": t}
    return CosphereGrid(manifold, (ax,), (None,), np.array([1.0]), pts, "stratum",
                        f"{'N' if pole > 0 else 'S'}xS1")


# ----------------------------------------------------------------------------
# exterior algebra on coordinate differentials


@lru_cache(maxsize=None)
def form_basis(d: int, p: int) -> tuple[tuple[int, ...], ...]:
    if p < 0 or p > d:
        return ()
    return tuple(combinations(range(d), p))


def basis_size(d: int, p: int) -> int:
    return len(form_basis(d, p))


@lru_cache(maxsize=None)
def wedge_table(d: int, p: int, q: int):
    """Index arrays ``(i, j, k, sign)`` with ``e_I ^ e_J = sign * e_K``."""
    index = {b: n for n, b in enumerate(form_basis(d, p + q))}
    rows = []
    for i, bi in enumerate(form_basis(d, p)):
        for j, bj in enumerate(form_basis(d, q)):
            if set(bi) & set(bj):
                continue
            inversions = sum(1 for a in bi for b in bj if a > b)
            rows.append((i, j, index[tuple(sorted(bi + bj))], -1 if inversions % 2 else 1))
    if not rows:
        return (np.zeros(0, int),) * 3 + (np.zeros(0),)
    i, j, k, s = (np.array(c) for c in zip(*rows))
    return i, j, k, s.astype(float)


# ----------------------------------------------------------------------------
# spectral calculus on grids


@lru_cache(maxsize=None)
def _legendre_diff_matrix(n: int) -> np.ndarray:
    x, _ = np.polynomial.legendre.leggauss(n)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    w = 1.0 / np.prod(diff, axis=1)
    D = (w[None, :] / w[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


def _wavenumbers(n: int) -> np.ndarray:
    return np.fft.fftfreq(n, d=1.0 / n)


def derivative(values: np.ndarray, grid: CosphereGrid, axis: int, offset: int) -> np.ndarray:
    """Spectral derivative along grid axis ``axis``.

    ``offset`` is the position of the component axis in ``values``; grid axes follow it.
    """
    ax = grid.axes[axis]
    pos = offset + 1 + axis
    if ax.periodic:
        n = len(ax)
        k = _wavenumbers(n)
        if n % 2 == 0:
            k[n // 2] = 0.0
        sh = [1] * values.ndim
        sh[pos] = n
        return np.fft.ifft(np.fft.fft(values, axis=pos) * (1j * k).reshape(sh), axis=pos)
    D = _legendre_diff_matrix(len(ax))
    return np.moveaxis(np.tensordot(D, np.moveaxis(values, pos, 0), axes=(1, 0)), 0, pos)


def translate(values: np.ndarray, grid: CosphereGrid, shifts: np.ndarray, offset: int) -> np.ndarray:
    """Sample ``f(y + s)`` for a batch of axis shifts by trigonometric interpolation.

    ``shifts`` has shape ``(K, n_axes)`` in radians (entries on non-periodic
    axes must vanish).  Returns an array of shape ``(K,) + values.shape``.
    """
    shifts = np.atleast_2d(np.asarray(shifts, dtype=float))
    K = shifts.shape[0]
    active = [i for i, ax in enumerate(grid.axes) if np.any(shifts[:, i] != 0.0)]
    if not active:
        return np.broadcast_to(values, (K,) + values.shape).copy()
    for i in active:
        if not grid.axes[i].periodic:
            raise UnsupportedGeometry(f"cannot translate along non-periodic axis {grid.axes[i].name}")
    positions = [offset + 1 + i for i in active]
    spec = np.fft.fftn(values, axes=positions)
    phase = np.ones((K,) + (1,) * values.ndim, dtype=complex)
    for i, pos in zip(active, positions):
        n = len(grid.axes[i])
        k = _wavenumbers(n)
        ph = np.exp(1j * shifts[:, i][:, None] * k[None, :])
        if n % 2 == 0:
            ph[:, n // 2] = np.cos(shifts[:, i] * n / 2)
        sh = [K] + [1] * values.ndim
        sh[pos + 1] = n
        phase = phase * ph.reshape(sh)
    return np.fft.ifftn(spec[None] * phase, axes=[p + 1 for p in positions])


# ----------------------------------------------------------------------------
# sampled forms


@dataclass(frozen=True, eq=False)
class SampledForm:
    """A homogeneous matrix-valued differential form sampled on a grid.

    ``coefficients`` has shape ``(n_basis, *grid.shape, m, m)``.
    """

    degree: int
    grid: CosphereGrid
    coefficients: np.ndarray

    def __post_init__(self):
        if not 0 <= self.degree <= self.grid.dim:
            raise DegreeMismatch(f"degree {self.degree} exceeds carrier dimension {self.grid.dim}")
        c = np.asarray(self.coefficients)
        expected = (basis_size(self.grid.dim, self.degree),) + self.grid.shape
        if c.ndim == len(expected):
            c = c[..., None, None]
        if c.shape[: len(expected)] != expected or c.ndim != len(expected) + 2:
            raise ValueError(f"coefficient shape {c.shape} inconsistent with {expected}")
        object.__setattr__(self, "coefficients", c)

    @property
    def m(self) -> int:
        return self.coefficients.shape[-1]


def integrate_form(form: SampledForm, grid: Optional[CosphereGrid] = None):
    """Quadrature of a top-degree form against the oriented grid weights."""
    if grid is not None and grid is not form.grid:
        raise ValueError("form is carried by a different grid")
    g = form.grid
    if form.degree != g.dim:
        raise DegreeMismatch(f"cannot integrate a {form.degree}-form over a {g.dim}-dimensional carrier")
    w = g.form_weights * g.orientation.reshape((-1,) + (1,) * g.dim)
    total = np.tensordot(w, form.coefficients[0], axes=(tuple(range(w.ndim)), tuple(range(w.ndim))))
    if total.shape == (1, 1):
        return complex(total[0, 0])
    return total
