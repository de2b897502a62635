import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from symbols import elliptic_symbol, random_symbol

from shiftindex.analytic_index import estimate_index
from shiftindex.errors import AlgebraMismatch, InsufficientSupport, NotElliptic, TopDegree
from shiftindex.geometry import build_base_grid, build_cosphere_grid, circle, integrate_form, torus2
from shiftindex.group_action import GOLDEN, Generator, cyclic, free_abelian, trivial_group
from shiftindex.operator_spec import LocalTerm, OperatorSpec, mode
from shiftindex.symbol_algebra import (CrossedSymbol, convolve, cs_character, decay_profile, differential, invert,
                                       is_elliptic, symbol_of_spec)

seeds = st.integers(0, 2**31 - 1)


def test_unit_is_exact(golden_group, circle_cosphere, rng):
    b = random_symbol(golden_group, circle_cosphere, rng, 2)
    one = CrossedSymbol.identity(golden_group, circle_cosphere)
    assert convolve(one, b).distance(b) == 0.0
    assert convolve(b, one).distance(b) == 0.0


def test_monomials_multiply(golden_group, circle_cosphere):
    g, h = golden_group.element(2), golden_group.element(-5)
    out = convolve(CrossedSymbol.monomial(g, circle_cosphere, 1.0), CrossedSymbol.monomial(h, circle_cosphere, 1.0))
    assert list(out.coeffs) == [(-3,)]
    assert np.allclose(out[(-3,)], 1.0)


def test_twist_breaks_commutativity(golden_group, circle_base):
    f = np.exp(1j * circle_base.points["x"])[0][None, :, None, None]
    a = CrossedSymbol(golden_group, circle_base, 1, {(0,): np.broadcast_to(f, circle_base.shape + (1, 1))})
    b = CrossedSymbol.monomial(golden_group.generator(), circle_base, 1.0)
    ab, ba = convolve(a, b)[(1,)], convolve(b, a)[(1,)]
    alpha = 2 * math.pi * GOLDEN
    x = circle_base.points["x"][..., None, None]
    assert np.max(np.abs(ab[0] - np.exp(1j * (x + alpha)))) < 1e-12
    assert np.max(np.abs(ba[0] - np.exp(1j * x))) < 1e-12
    assert np.allclose(ab / ba, np.exp(1j * alpha))


def test_mismatched_groups(golden_group, circle_cosphere, circle_base):
    a = CrossedSymbol.identity(golden_group, circle_cosphere)
    with pytest.raises(AlgebraMismatch):
        convolve(a, CrossedSymbol.identity(golden_group, circle_base))
    with pytest.raises(AlgebraMismatch):
        convolve(a, CrossedSymbol.identity(trivial_group(circle()), circle_cosphere))


@given(seeds)
def test_associativity(seed):
    rng = np.random.default_rng(seed)
    G = free_abelian(circle(), [Generator((GOLDEN,))])
    grid = build_cosphere_grid(circle(), 16)
    a, b, c = (random_symbol(G, grid, rng, 1) for _ in range(3))
    lhs = convolve(convolve(a, b), c)
    rhs = convolve(a, convolve(b, c))
    assert lhs.distance(rhs) < 1e-10


@given(seeds)
def test_associativity_on_the_torus(seed):
    rng = np.random.default_rng(seed)
    M = torus2()
    G = free_abelian(M, [Generator((GOLDEN, 0.0)), Generator((0.0, math.sqrt(2) - 1))])
    grid = build_base_grid(M, 16)
    a, b, c = (random_symbol(G, grid, rng, 1, m=2, degree=2) for _ in range(3))
    assert convolve(convolve(a, b), c).distance(convolve(a, convolve(b, c))) < 1e-10


def test_inverse_of_constant(golden_group, circle_cosphere):
    b = invert(CrossedSymbol.identity(golden_group, circle_cosphere).__rmul__(2.0))
    assert list(b.coeffs) == [(0,)]
    assert np.allclose(b[(0,)], 0.5)


def test_neumann_geometric_series(golden_group, circle_cosphere):
    a = 2.0 * CrossedSymbol.identity(golden_group, circle_cosphere) + \
        CrossedSymbol.monomial(golden_group.generator(), circle_cosphere, 1.0)
    b = invert(a, 1e-10, method="neumann")
    for k in range(6):
        assert np.allclose(b[(k,)], (-1) ** k * 2.0 ** (-k - 1), atol=1e-12)
    assert abs(b[(2,)][0, 0, 0, 0] - 0.125) < 1e-10
    assert decay_profile(b.truncated(12)) < -3


def test_representation_solve_matches_neumann(golden_group, circle_cosphere):
    a = 2.0 * CrossedSymbol.identity(golden_group, circle_cosphere) + \
        CrossedSymbol.monomial(golden_group.generator(), circle_cosphere, 1.0)
    b1 = invert(a, 1e-9, method="neumann", support_radius=40)
    b2 = invert(a, 1e-9, method="representation", support_radius=40)
    assert b1.truncated(20).distance(b2.truncated(20)) < 1e-9


def test_vanishing_symbol_is_not_elliptic(golden_group, circle_cosphere):
    a = CrossedSymbol.from_function(golden_group, circle_cosphere, 1, [(0,)],
                                    lambda g, e: np.sin(np.broadcast_to(g.points["x"], g.shape))[..., None, None])
    with pytest.raises(NotElliptic) as err:
        invert(a)
    assert err.value.diagnostics.smin
    assert not is_elliptic(a)


def test_balanced_shift_is_not_elliptic(golden_group, circle_cosphere):
    a = CrossedSymbol.identity(golden_group, circle_cosphere) + \
        CrossedSymbol.monomial(golden_group.generator(), circle_cosphere, 1.0)
    with pytest.raises(NotElliptic):
        invert(a)


def test_invert_preconditions(golden_group, circle_cosphere):
    a = CrossedSymbol.monomial(golden_group.element(3), circle_cosphere, 1.0)
    with pytest.raises(ValueError):
        invert(a, 0.0)
    with pytest.raises(ValueError):
        invert(a, 1e-10, support_radius=2)


def test_cyclic_group_inverse():
    M = circle()
    G = cyclic(M, 5)
    grid = build_cosphere_grid(M, 20)  # the rotation permutes the nodes
    rng = np.random.default_rng(3)
    a = elliptic_symbol(G, grid, rng, 2, perturbation=0.6)
    b = invert(a, 1e-10)
    one = CrossedSymbol.identity(G, grid)
    assert convolve(a, b).distance(one) < 1e-10 and convolve(b, a).distance(one) < 1e-10


@given(seeds)
def test_inverse_residual(seed):
    rng = np.random.default_rng(seed)
    G = free_abelian(circle(), [Generator((GOLDEN,))])
    # the inverse is a series whose trigonometric degree grows with its
    # length, so the grid must resolve about 15 terms of a degree-1 symbol
    grid = build_cosphere_grid(circle(), 64)
    a = elliptic_symbol(G, grid, rng, 1, m=2, degree=1)
    b = invert(a, 1e-9)
    one = CrossedSymbol.identity(G, grid, 2)
    assert convolve(a, b).distance(one) < 1e-9
    assert convolve(b, a).distance(one) < 1e-9


def test_differential_of_constant(golden_group, circle_cosphere):
    a = CrossedSymbol.identity(golden_group, circle_cosphere).__rmul__(3.0)
    assert differential(a).coeffs == {}
    assert differential(a).degree == 1


def test_differential_of_mode(trivial_circle):
    grid = build_cosphere_grid(circle(), 64)
    x = np.broadcast_to(grid.points["x"], grid.shape)
    a = CrossedSymbol(trivial_circle, grid, 1, {(): np.exp(1j * x)[..., None, None]})
    da = differential(a)
    assert np.max(np.abs(da[()][0, ..., 0, 0] - 1j * np.exp(1j * x))) < 1e-10


def test_top_degree(trivial_circle, circle_base):
    da = differential(CrossedSymbol.identity(trivial_circle, circle_base))
    with pytest.raises(TopDegree):
        differential(da)


@given(seeds)
def test_d_squared_vanishes(seed):
    rng = np.random.default_rng(seed)
    M = torus2()
    G = free_abelian(M, [Generator((GOLDEN, 0.0))])
    grid = build_cosphere_grid(M, 8)
    a = random_symbol(G, grid, rng, 1, m=2)
    dda = differential(differential(a))
    assert dda.sup_norm() < 1e-10


@given(seeds)
def test_leibniz(seed):
    rng = np.random.default_rng(seed)
    G = free_abelian(circle(), [Generator((GOLDEN,))])
    grid = build_cosphere_grid(circle(), 16)
    a, b = random_symbol(G, grid, rng, 1, m=2), random_symbol(G, grid, rng, 1, m=2)
    lhs = differential(convolve(a, b))
    rhs = convolve(differential(a), b) + convolve(a, differential(b))
    assert lhs.distance(rhs) < 1e-9


@given(seeds)
def test_graded_leibniz(seed):
    rng = np.random.default_rng(seed)
    M = torus2()
    G = free_abelian(M, [Generator((GOLDEN, 0.0)), Generator((0.0, math.sqrt(2) - 1))])
    grid = build_base_grid(M, 16)
    a = differential(random_symbol(G, grid, rng, 1, degree=2))  # a 1-form
    b = random_symbol(G, grid, rng, 1, degree=2)
    lhs = differential(convolve(a, b))
    rhs = convolve(differential(a), b) - convolve(a, differential(b))
    assert lhs.distance(rhs) < 1e-9


def test_winding_number_character(trivial_circle):
    grid = build_base_grid(circle(), 64)
    x = np.broadcast_to(grid.points["x"], grid.shape)
    a = CrossedSymbol(trivial_circle, grid, 1, {(): np.exp(1j * x)[..., None, None]})
    ch = cs_character(a)
    assert abs(integrate_form(ch.coefficient(1, ())) - 1) < 1e-12


def test_character_of_constants_vanishes(golden_group, circle_cosphere):
    a = CrossedSymbol.identity(golden_group, circle_cosphere, 2).__rmul__(1.5)
    assert cs_character(a).forms[1] == {}
    b = 2.0 * CrossedSymbol.identity(golden_group, circle_cosphere) + \
        CrossedSymbol.monomial(golden_group.generator(), circle_cosphere, 1.0)
    assert cs_character(b, tolerance=1e-9).forms[1] == {}


@settings(max_examples=10)
@given(st.floats(0.0, 0.1))
def test_character_is_homotopy_invariant(t):
    G = free_abelian(circle(), [Generator((GOLDEN,))])
    grid = build_base_grid(circle(), 64)
    x = np.broadcast_to(grid.points["x"], grid.shape)[..., None, None]
    a = CrossedSymbol(G, grid, 1, {(0,): np.exp(1j * x), (1,): 0.1 * np.exp(-1j * x)})
    ref = integrate_form(cs_character(a).coefficient(1, (0,)))
    val = integrate_form(cs_character(np.exp(1j * t) * a).coefficient(1, (0,)))
    assert abs(val - ref) < 1e-6


def test_symbols_of_specs(golden_group, circle_cosphere):
    e, g = golden_group.identity, golden_group.generator()
    d = symbol_of_spec(OperatorSpec(golden_group, 1, [(e, [LocalTerm(mode(0), derivative=(1,))])], 1),
                       circle_cosphere)
    assert np.allclose(d[e][0, 0], 1j) and np.allclose(d[e][0, 1], -1j)
    f = mode(2)
    mult = symbol_of_spec(OperatorSpec(golden_group, 1, [(e, [LocalTerm(f)])]), circle_cosphere)
    x = circle_cosphere.points["x"]
    assert np.allclose(mult[e][0, ..., 0, 0], np.exp(2j * x))
    shift = symbol_of_spec(OperatorSpec(golden_group, 1, [(g.group.element(-1), [LocalTerm(mode(0))])]),
                           circle_cosphere)
    assert list(shift.coeffs) == [(-1,)] and np.allclose(np.abs(shift[(-1,)]), 1.0)


def test_shift_symbol_matches_operator(golden_group):
    """The pure shift g* is realized by the term at g^-1, whose analytic index is zero."""
    spec = OperatorSpec(golden_group, 1, [(golden_group.element(-1), [LocalTerm(mode(0))])])
    assert estimate_index(spec, [16, 32, 64]).index == 0


def test_decay_profile(golden_group, circle_cosphere):
    coeffs = {(k,): np.full(circle_cosphere.shape + (1, 1), (1.0 + k) ** -4) for k in range(0, 20)}
    a = CrossedSymbol(golden_group, circle_cosphere, 1, coeffs)
    assert abs(decay_profile(a) - (-4)) < 0.2
    assert abs(a.decay - (-4)) < 0.2
    with pytest.raises(InsufficientSupport):
        decay_profile(CrossedSymbol.identity(golden_group, circle_cosphere))


def test_decay_metadata_is_refreshed(golden_group, circle_cosphere):
    a = CrossedSymbol.identity(golden_group, circle_cosphere)
    assert a.decay is None
    b = 2.0 * a + CrossedSymbol.monomial(golden_group.generator(), circle_cosphere, 1.0)
    inv = invert(b, 1e-9)
    assert inv.decay is not None and inv.decay < -3


def test_restrict_uses_source(golden_group):
    grid8, grid16 = build_cosphere_grid(circle(), 8), build_cosphere_grid(circle(), 16)
    spec = OperatorSpec(golden_group, 1, [(golden_group.identity, [LocalTerm(mode(1))])])
    a = symbol_of_spec(spec, grid8)
    b = a.restrict(grid16)
    assert b.grid is grid16
    assert np.allclose(b[(0,)][0, ..., 0, 0], np.exp(1j * grid16.points["x"]))
