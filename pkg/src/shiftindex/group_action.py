"""Finitely generated isometry groups acting on the model manifolds.

All supported actions are translations of the periodic coordinates: the
flat factors are translated and the sphere factor of ``S^2 x S^1`` is
rotated about its polar axis, which translates the azimuth ``phi``.
Rotation amounts are stored in *turns* (fractions of a full turn) and may
be ``fractions.Fraction`` instances when exact arithmetic is wanted, e.g.
for Liouville-type rotation numbers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from itertools import product
from numbers import Real
from typing import Optional, Sequence

import numpy as np

from .errors import GroupMismatch, UnsupportedGeometry
from .geometry import TWO_PI, Kind, ManifoldModel, circle_distance

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def liouville_number(terms: int = 6) -> Fraction:
    """Partial sum of sum_k 2^(-k!) as an exact fraction."""
    return sum((Fraction(1, 2 ** math.factorial(k)) for k in range(1, terms + 1)), Fraction(0))


def _frac_part(x):
    """x mod 1, exact for Fractions."""
    if isinstance(x, Fraction):
        return x - math.floor(x)
    return float(x) % 1.0


@dataclass(frozen=True)
class Generator:
    """Rigid motion: translation turns per flat factor plus a polar-axis sphere rotation."""

    translation: tuple = ()
    sphere_turns: Real = 0

    def __post_init__(self):
        object.__setattr__(self, "translation", tuple(self.translation))

    def linear_part(self, manifold: ManifoldModel) -> np.ndarray:
        """Differential in an orthonormal frame (at the north pole for the sphere factor)."""
        if manifold.has_sphere:
            a = TWO_PI * float(self.sphere_turns)
            return np.array([[math.cos(a), -math.sin(a), 0.0], [math.sin(a), math.cos(a), 0.0], [0, 0, 1.0]])
        return np.eye(manifold.dim)


def rotation(turns) -> Generator:
    return Generator((turns,))


class Law(str, Enum):
    FREE_ABELIAN = "free_abelian"
    CYCLIC = "cyclic"


@dataclass(frozen=True, eq=False)
class IsometryGroup:
    manifold: ManifoldModel
    generators: tuple
    law: Law = Law.FREE_ABELIAN
    order: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "law", Law(self.law))
        nflat = len(self.manifold.flat_factors)
        for gen in self.generators:
            if len(gen.translation) != nflat:
                raise UnsupportedGeometry(f"generator needs {nflat} translation components, got {len(gen.translation)}")
            if gen.sphere_turns and not self.manifold.has_sphere:
                raise UnsupportedGeometry("sphere rotation on a manifold without a sphere factor")
            if np.linalg.det(gen.linear_part(self.manifold)) <= 0:
                raise UnsupportedGeometry("generator does not preserve orientation")
        if self.law is Law.CYCLIC:
            if len(self.generators) != 1 or not self.order or self.order < 1:
                raise UnsupportedGeometry("a cyclic group needs exactly one generator and a positive order")
            gen = self.generators[0]
            for turns in gen.translation + (gen.sphere_turns,):
                r = _frac_part(turns * self.order)
                if min(float(r), 1.0 - float(r)) > 1e-12:
                    raise UnsupportedGeometry(f"generator^{self.order} is not the identity")

    @property
    def rank(self) -> int:
        return len(self.generators)

    @property
    def is_finite(self) -> bool:
        return self.law is Law.CYCLIC

    @property
    def identity(self) -> "GroupElement":
        return GroupElement(self, (0,) * self.rank)

    def element(self, *exps) -> "GroupElement":
        if len(exps) == 1 and isinstance(exps[0], (tuple, list)):
            exps = tuple(exps[0])
        if len(exps) != self.rank:
            raise GroupMismatch(f"expected {self.rank} exponents, got {len(exps)}")
        if self.law is Law.CYCLIC:
            exps = (int(exps[0]) % self.order,)
        return GroupElement(self, tuple(int(e) for e in exps))

    def generator(self, i: int = 0) -> "GroupElement":
        exps = [0] * self.rank
        exps[i] = 1
        return self.element(*exps)

    def turns(self, exps) -> tuple:
        """Translation amounts (mod 1) of an element along the periodic coordinates."""
        nflat = len(self.manifold.flat_factors)
        flat = [sum((e * gen.translation[j] for e, gen in zip(exps, self.generators)), 0) for j in range(nflat)]
        flat = [_frac_part(v) for v in flat]
        if self.manifold.has_sphere:
            sph = _frac_part(sum((e * gen.sphere_turns for e, gen in zip(exps, self.generators)), 0))
            return (sph, *flat)
        return tuple(flat)

    def shift(self, exps) -> np.ndarray:
        """Translation in radians along ``manifold.periodic_coordinates``."""
        return TWO_PI * np.array([float(v) for v in self.turns(exps)])

    def word_length(self, exps) -> int:
        if self.law is Law.CYCLIC:
            r = exps[0] % self.order
            return min(r, self.order - r)
        return int(sum(abs(e) for e in exps))

    def describe(self) -> dict:
        return {"law": self.law.value, "order": self.order,
                "generators": [{"translation": [float(t) for t in g.translation],
                                "sphere_turns": float(g.sphere_turns)} for g in self.generators]}


def free_abelian(manifold: ManifoldModel, generators: Sequence[Generator]) -> IsometryGroup:
    return IsometryGroup(manifold, tuple(generators), Law.FREE_ABELIAN)


def cyclic(manifold: ManifoldModel, n: int, generator: Optional[Generator] = None) -> IsometryGroup:
    if generator is None:
        generator = Generator((Fraction(1, n),) * len(manifold.flat_factors))
    return IsometryGroup(manifold, (generator,), Law.CYCLIC, n)


def trivial_group(manifold: ManifoldModel) -> IsometryGroup:
    return IsometryGroup(manifold, (), Law.FREE_ABELIAN)


@dataclass(frozen=True)
class GroupElement:
    group: IsometryGroup = field(repr=False)
    exps: tuple

    @property
    def word_length(self) -> int:
        return self.group.word_length(self.exps)

    @property
    def is_identity(self) -> bool:
        return not any(self.exps)

    def shift(self) -> np.ndarray:
        return self.group.shift(self.exps)

    def __mul__(self, other):
        return compose(self, other)

    def __repr__(self):
        return f"g{list(self.exps)}"


def _same_group(g: GroupElement, h: GroupElement):
    if g.group is not h.group:
        raise GroupMismatch("elements belong to different groups")


def compose(g: GroupElement, h: GroupElement) -> GroupElement:
    _same_group(g, h)
    return g.group.element(*(a + b for a, b in zip(g.exps, h.exps)))


def inverse(g: GroupElement) -> GroupElement:
    return g.group.element(*(-a for a in g.exps))


def power(g: GroupElement, k: int) -> GroupElement:
    return g.group.element(*(k * a for a in g.exps))


def ball(group: IsometryGroup, radius: int) -> list[GroupElement]:
    """All elements of word length <= radius, ordered by (length, exponents)."""
    if group.law is Law.CYCLIC:
        elems = {group.element(r) for r in range(-radius, radius + 1)}
    else:
        elems = set()
        rng = range(-radius, radius + 1)
        for exps in product(rng, repeat=group.rank):
            if sum(abs(e) for e in exps) <= radius:
                elems.add(GroupElement(group, exps))
    return sorted(elems, key=lambda g: (g.word_length, g.exps))


def sphere_count(group: IsometryGroup, radius: int) -> int:
    return sum(1 for g in ball(group, radius) if g.word_length == radius)


# ----------------------------------------------------------------------------
# action on points


def act_point(g: GroupElement, x) -> np.ndarray:
    """Image of manifold points ``x`` (coordinates on the last axis).

    Circle ``(x,)``; torus ``(x, y)``; sphere x circle ``(theta, phi, t)``.
    """
    x = np.array(x, dtype=float)
    s = g.shift()
    m = g.group.manifold
    if m.has_sphere:
        x[..., 1] = np.mod(x[..., 1] + s[0], TWO_PI)
        x[..., 2] = np.mod(x[..., 2] + s[1], TWO_PI)
    else:
        x = np.mod(x + s, TWO_PI)
    return x


def act_cosphere(g: GroupElement, x, xi):
    """Induced action on covectors: base motion plus ``((dg)^*)^{-1}`` on xi.

    Covector components are taken in the coordinate-orthonormal frame
    (``(xi_theta, xi_phi, xi_t)`` on the sphere factor), which every
    supported motion transports to itself, so xi is unchanged.
    """
    xi = np.array(xi, dtype=float)
    return act_point(g, x), xi


def distance(manifold: ManifoldModel, p, q) -> np.ndarray:
    return manifold.distance(p, q)


# ----------------------------------------------------------------------------
# fixed strata


class StratumKind(str, Enum):
    WHOLE = "WholeManifold"
    EMPTY = "Empty"
    SUBCIRCLE = "SubCircle"
    POINTSET = "PointSet"


@dataclass(frozen=True)
class FixedStratum:
    element: GroupElement
    kind: StratumKind
    angles: tuple = ()
    pole: int = 0  # +1 / -1 for the pole circles of S^2 x S^1

    @property
    def manifold(self) -> ManifoldModel:
        return self.element.group.manifold

    @property
    def normal_rank(self) -> int:
        return 2 * len(self.angles)

    @property
    def dim(self) -> int:
        if self.kind is StratumKind.EMPTY:
            return -1
        return self.manifold.dim - self.normal_rank

    def distance(self, x) -> np.ndarray:
        """Closed-form distance from points to this stratum (1 if empty)."""
        x = np.asarray(x, dtype=float)
        if self.kind is StratumKind.EMPTY:
            return np.ones(x.shape[:-1])
        if self.kind is StratumKind.WHOLE:
            return np.zeros(x.shape[:-1])
        if self.kind is StratumKind.SUBCIRCLE:
            theta = x[..., 0]
            return theta if self.pole > 0 else math.pi - theta
        raise UnsupportedGeometry(self.kind)

    def sample(self, n: int) -> np.ndarray:
        """Points on the stratum (for invariant checks)."""
        t = TWO_PI * np.arange(n) / n
        if self.kind is StratumKind.SUBCIRCLE:
            theta = 0.0 if self.pole > 0 else math.pi
            return np.stack([np.full(n, theta), np.zeros(n), t], axis=-1)
        if self.kind is StratumKind.WHOLE:
            return np.stack([t] * self.manifold.dim, axis=-1)
        return np.zeros((0, self.manifold.dim))


def _is_zero_turn(v) -> bool:
    if isinstance(v, Fraction):
        return _frac_part(v) == 0
    r = float(_frac_part(v))
    return min(r, 1.0 - r) < 1e-14


def fixed_strata(g: GroupElement) -> list[FixedStratum]:
    m = g.group.manifold
    turns = g.group.turns(g.exps)
    if all(_is_zero_turn(v) for v in turns):
        return [FixedStratum(g, StratumKind.WHOLE)]
    if not m.has_sphere:
        return [FixedStratum(g, StratumKind.EMPTY)]
    sph, flat = turns[0], turns[1:]
    if not all(_is_zero_turn(v) for v in flat):
        return [FixedStratum(g, StratumKind.EMPTY)]
    theta = TWO_PI * float(sph)
    # rotation angle of the normal plane, measured against the outward
    # orientation of the sphere at each pole
    return [FixedStratum(g, StratumKind.SUBCIRCLE, (theta,), pole=1),
            FixedStratum(g, StratumKind.SUBCIRCLE, ((TWO_PI - theta) % TWO_PI,), pole=-1)]


def dist_to_fixed(g: GroupElement, x) -> np.ndarray:
    strata = fixed_strata(g)
    return np.min(np.stack([s.distance(x) for s in strata]), axis=0)


# ----------------------------------------------------------------------------
# growth and Diophantine conditions


@dataclass(frozen=True)
class GrowthEstimate:
    exponent: float
    ks: tuple
    counts: tuple


def growth_check(group: IsometryGroup, k_max: int = 32) -> GrowthEstimate:
    if k_max < 4:
        raise ValueError("k_max must be >= 4")
    counts = []
    ks = tuple(range(1, k_max + 1))
    if group.law is Law.CYCLIC:
        counts = [min(group.order, 2 * k + 1) for k in ks]
    else:
        seen = {group.identity}
        frontier = [group.identity]
        gens = [group.generator(i) for i in range(group.rank)]
        gens += [inverse(s) for s in gens]
        for _ in ks:
            nxt = []
            for a in frontier:
                for s in gens:
                    b = compose(a, s)
                    if b not in seen:
                        seen.add(b)
                        nxt.append(b)
            frontier = nxt
            counts.append(len(seen))
    k = np.array(ks[1:], dtype=float)
    c = np.array(counts[1:], dtype=float)
    slope = float(np.polyfit(np.log(k), np.log(c), 1)[0])
    return GrowthEstimate(slope, ks, tuple(counts))


@dataclass(frozen=True)
class DiophantineResult:
    passed: bool
    N: Optional[int]
    C: Optional[float]
    envelope: tuple  # (word length, worst ratio) pairs, sorted by length
    worst: Optional[tuple] = None  # (exps, ratio) achieving the smallest C at max power

    @property
    def violation(self) -> bool:
        return not self.passed

    def as_dict(self) -> dict:
        return {"status": "diophantine" if self.passed else "violation", "N": self.N, "C": self.C,
                "worst": None if self.worst is None else {"exps": list(self.worst[0]), "ratio": self.worst[1]}}


def _continued_fraction_denominators(x, bound: int) -> list[int]:
    x = Fraction(x) if not isinstance(x, Fraction) else x
    x = x - math.floor(x)
    qs, q_prev, q = [], 0, 1
    while x != 0 and q <= bound:
        x = 1 / x
        a = math.floor(x)
        x -= a
        q_prev, q = q, a * q + q_prev
        if q <= bound:
            qs.append(q)
        if len(qs) > 200:
            break
    return qs


def _candidates(group: IsometryGroup, g_range: int, rng) -> list[GroupElement]:
    if group.law is Law.CYCLIC:
        return [group.element(r) for r in range(group.order)]
    small = ball(group, min(g_range, 10))
    if g_range <= 10:
        return small
    lengths = np.unique(np.geomspace(11, g_range, 64).astype(np.int64))
    out = set(small)
    for L in lengths:
        L = int(L)
        if group.rank == 1:
            out.add(group.element(L))
        else:
            for i in range(group.rank):
                e = [0] * group.rank
                e[i] = L
                out.add(group.element(*e))
            for _ in range(4):
                cut = np.sort(rng.integers(0, L + 1, size=group.rank - 1))
                parts = np.diff(np.concatenate([[0], cut, [L]]))
                signs = rng.choice([-1, 1], size=group.rank)
                out.add(group.element(*(int(p) * int(s) for p, s in zip(parts, signs))))
    if group.rank == 1:
        gen = group.generators[0]
        for turns in gen.translation + ((gen.sphere_turns,) if group.manifold.has_sphere else ()):
            if turns:
                for q in _continued_fraction_denominators(turns, g_range):
                    out.add(group.element(q))
    return sorted(out, key=lambda g: (g.word_length, g.exps))


def _sample_points(manifold: ManifoldModel, n: int, rng) -> np.ndarray:
    if manifold.has_sphere:
        theta = np.arccos(rng.uniform(-1.0, 1.0, n))
        return np.stack([theta, rng.uniform(0, TWO_PI, n), rng.uniform(0, TWO_PI, n)], axis=-1)
    return rng.uniform(0, TWO_PI, (n, manifold.dim))


def _displacement(g: GroupElement, x: np.ndarray) -> np.ndarray:
    """dist(g x, x) computed from exact turn arithmetic."""
    m = g.group.manifold
    turns = g.group.turns(g.exps)
    # circle distance of a translation by v turns is 2 pi ||v||
    d = [TWO_PI * min(float(v), 1.0 - float(v)) for v in turns]
    if m.has_sphere:
        sph = math.sin(math.pi * min(float(turns[0]), 1.0 - float(turns[0])))
        chord = 2.0 * np.sin(x[..., 0]) * sph  # chord on the latitude circle
        great = 2.0 * np.arcsin(np.clip(chord / 2.0, 0.0, 1.0))
        return np.hypot(great, d[1])
    return np.full(x.shape[:-1], math.sqrt(sum(v * v for v in d)))


def diophantine_check(group: IsometryGroup, g_range: int = 200, sample_count: int = 64,
                      max_power: int = 3, seed: int = 0) -> DiophantineResult:
    """Empirical lower-envelope fit of dist(gx, x) / dist(x, fix g) >= C |g|^-N.

    N passes when the constant fitted over all candidates stays within a
    factor 10 of the constant fitted on the exhaustive small ball
    ``|g| <= 10``; the smallest passing N is returned.
    """
    if g_range < 2:
        raise ValueError("g_range must be >= 2")
    if sample_count < 16:
        raise ValueError("sample_count must be >= 16")
    rng = np.random.default_rng(seed)
    x = _sample_points(group.manifold, sample_count, rng)
    records = []
    for g in _candidates(group, g_range, rng):
        if g.is_identity:
            continue
        strata = fixed_strata(g)
        if strata[0].kind is StratumKind.WHOLE:
            continue  # acts trivially
        dfix = np.min(np.stack([s.distance(x) for s in strata]), axis=0)
        keep = dfix > 1e-12
        if not np.any(keep):
            continue
        ratio = float(np.min(_displacement(g, x)[keep] / dfix[keep]))
        records.append((g.word_length, g.exps, ratio))
    if not records:
        return DiophantineResult(True, 0, math.inf, ())
    env = {}
    for L, _, r in records:
        env[L] = min(env.get(L, math.inf), r)
    envelope = tuple(sorted(env.items()))
    worst = None
    for N in range(max_power + 1):
        scaled = [r * float(L) ** N for L, _, r in records]
        i_all = int(np.argmin(scaled))
        small = [s for s, (L, _, _) in zip(scaled, records) if L <= 10] or scaled
        worst = (records[i_all][1], records[i_all][2])
        if scaled[i_all] > 0 and scaled[i_all] >= 0.1 * min(small):
            return DiophantineResult(True, N, scaled[i_all], envelope, worst)
    return DiophantineResult(False, None, None, envelope, worst)
