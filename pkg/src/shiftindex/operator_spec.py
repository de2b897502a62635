"""Declarative description of operators with shifts, D = sum_g (g*)^-1 D_g.

Each local part ``D_g`` is a finite sum of terms ``a(x) * M * d^alpha`` where
``a`` is a matrix-valued trigonometric polynomial, ``d^alpha`` a monomial in
the flat-coordinate derivatives and ``M`` an optional Fourier multiplier:
the Hardy projections onto nonnegative / negative modes (circle only) and
the Bessel powers ``(1 - Laplacian)^(s/2)``.  The multipliers are needed
because a differential operator on the circle always has index zero.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import UnsupportedTerm
from .geometry import CosphereGrid, Kind, ManifoldModel
from .group_action import GroupElement, IsometryGroup

_COVECTOR = {Kind.CIRCLE: ("xi",), Kind.TORUS2: ("xi1", "xi2"), Kind.SPHERE_CROSS_CIRCLE: ("xi_t",)}
_COORD = {Kind.CIRCLE: ("x",), Kind.TORUS2: ("x", "y"), Kind.SPHERE_CROSS_CIRCLE: ("phi", "t")}
MULTIPLIERS = (None, "hardy+", "hardy-")


@dataclass(frozen=True, eq=False)
class TrigPoly:
    """Matrix trigonometric polynomial ``sum_k c_k exp(i k.x)`` on the periodic coordinates."""

    modes: dict  # tuple[int, ...] -> (m, m) complex array

    def __post_init__(self):
        clean = {}
        for k, c in self.modes.items():
            k = (int(k),) if np.isscalar(k) else tuple(int(v) for v in k)
            c = np.atleast_2d(np.asarray(c, dtype=complex))
            if not np.all(np.isfinite(c)):
                raise ValueError("trigonometric polynomial coefficients must be finite")
            clean[k] = clean.get(k, 0) + c
        object.__setattr__(self, "modes", clean)

    @classmethod
    def constant(cls, value, nvars: int):
        return cls({(0,) * nvars: value})

    @property
    def m(self) -> int:
        return next(iter(self.modes.values())).shape[0] if self.modes else 1

    @property
    def nvars(self) -> int:
        return len(next(iter(self.modes))) if self.modes else 0

    @property
    def degree(self) -> tuple:
        """Largest |k_j| per variable (the bandwidth)."""
        if not self.modes:
            return ()
        return tuple(max(abs(k[j]) for k in self.modes) for j in range(self.nvars))

    def evaluate(self, coords: list) -> np.ndarray:
        """Values at broadcastable coordinate arrays; shape ``(*broadcast, m, m)``."""
        shape = np.broadcast_shapes(*(np.shape(c) for c in coords)) if coords else ()
        out = np.zeros(shape + (self.m, self.m), dtype=complex)
        for k, c in self.modes.items():
            phase = sum((kj * cj for kj, cj in zip(k, coords)), np.zeros(shape))
            out += np.exp(1j * np.broadcast_to(phase, shape))[..., None, None] * c
        return out

    def scaled(self, s) -> "TrigPoly":
        return TrigPoly({k: s * c for k, c in self.modes.items()})


@dataclass(frozen=True, eq=False)
class LocalTerm:
    coefficient: TrigPoly
    derivative: tuple = ()
    multiplier: Optional[str] = None
    bessel: float = 0.0

    @property
    def order(self) -> float:
        return sum(self.derivative) + self.bessel

    def principal_factor(self, kind: Kind, covectors: list) -> np.ndarray:
        """(i xi)^alpha times the multiplier symbol, on unit covectors."""
        out = np.ones(np.broadcast_shapes(*(np.shape(c) for c in covectors)) if covectors else (), dtype=complex)
        for p, xi in zip(self.derivative, covectors):
            out = out * (1j * xi) ** p
        if self.multiplier == "hardy+":
            out = out * (covectors[0] > 0)
        elif self.multiplier == "hardy-":
            out = out * (covectors[0] < 0)
        return out


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    group: IsometryGroup
    m: int
    terms: tuple  # of (GroupElement, tuple[LocalTerm, ...])
    order: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple((g, tuple(parts)) for g, parts in self.terms))
        self.validate()

    @property
    def manifold(self) -> ManifoldModel:
        return self.group.manifold

    def validate(self):
        kind = self.manifold.kind
        nflat = len(self.manifold.flat_factors)
        nvars = len(self.manifold.periodic_coordinates)
        top = False
        for g, parts in self.terms:
            if g.group is not self.group:
                raise UnsupportedTerm("term element belongs to another group")
            for part in parts:
                if part.multiplier not in MULTIPLIERS:
                    raise UnsupportedTerm(f"unknown multiplier {part.multiplier!r}")
                if part.multiplier and kind is not Kind.CIRCLE:
                    raise UnsupportedTerm("Hardy projections are defined on the circle only")
                if len(part.derivative) not in (0, nflat) or any(p < 0 for p in part.derivative):
                    raise UnsupportedTerm(f"derivative multi-index {part.derivative} invalid for {kind.value}")
                if part.coefficient.modes and part.coefficient.nvars != nvars:
                    raise UnsupportedTerm("coefficient has the wrong number of variables")
                if part.coefficient.modes and part.coefficient.m != self.m:
                    raise UnsupportedTerm("coefficient matrix size differs from the operator's")
                if part.order > self.order + 1e-12:
                    raise ValueError(f"term of order {part.order} exceeds declared order {self.order}")
                top = top or abs(part.order - self.order) < 1e-12
        if self.terms and not top:
            raise ValueError("no term attains the declared order")

    @property
    def bandwidth(self) -> tuple:
        """Largest Fourier mode shift per periodic coordinate."""
        nvars = len(self.manifold.periodic_coordinates)
        bw = [0] * nvars
        for _, parts in self.terms:
            for part in parts:
                for j, d in enumerate(part.coefficient.degree):
                    bw[j] = max(bw[j], d)
        return tuple(bw)

    @property
    def support_radius(self) -> int:
        return max((g.word_length for g, _ in self.terms), default=0)

    def principal_symbol(self, exps: tuple, grid: CosphereGrid) -> np.ndarray:
        """sigma(D_g) sampled on a cosphere or stratum grid, shape ``(*grid.shape, m, m)``."""
        kind = self.manifold.kind
        coords = [grid.points[name] for name in _COORD[kind]]
        cov = [grid.points[name] for name in _COVECTOR[kind]]
        out = np.zeros(grid.shape + (self.m, self.m), dtype=complex)
        for g, parts in self.terms:
            if g.exps != exps:
                continue
            for part in parts:
                if abs(part.order - self.order) > 1e-12:
                    continue
                val = part.coefficient.evaluate(coords) * part.principal_factor(kind, cov)[..., None, None]
                out += np.broadcast_to(val, out.shape)
        return out

    @property
    def support(self) -> list:
        seen = []
        for g, _ in self.terms:
            if g.exps not in seen:
                seen.append(g.exps)
        return seen


@dataclass(frozen=True, eq=False)
class SymbolSpec:
    """An order-zero crossed symbol on the base X given by trig polynomials (Toeplitz data)."""

    group: IsometryGroup
    m: int
    terms: tuple  # of (GroupElement, TrigPoly)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        for g, poly in self.terms:
            if g.group is not self.group:
                raise UnsupportedTerm("term element belongs to another group")
            if poly.m != self.m:
                raise UnsupportedTerm("coefficient matrix size differs from the symbol's")

    @property
    def manifold(self):
        return self.group.manifold

    @property
    def support(self) -> list:
        seen = []
        for g, _ in self.terms:
            if g.exps not in seen:
                seen.append(g.exps)
        return seen

    def values(self, exps: tuple, grid: CosphereGrid) -> np.ndarray:
        coords = [grid.points[name] for name in _COORD[self.manifold.kind]]
        out = np.zeros(grid.shape + (self.m, self.m), dtype=complex)
        for g, poly in self.terms:
            if g.exps == exps:
                out += np.broadcast_to(poly.evaluate(coords), out.shape)
        return out


def mode(k, value=1.0, m: int = 1) -> TrigPoly:
    """Single Fourier mode ``value * exp(i k.x)`` (scalar value broadcast to m x m identity)."""
    k = (k,) if np.isscalar(k) else tuple(k)
    value = np.asarray(value, dtype=complex)
    if value.ndim == 0:
        value = value * np.eye(m)
    return TrigPoly({k: value})
