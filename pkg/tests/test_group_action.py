import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shiftindex.errors import GroupMismatch, UnsupportedGeometry
from shiftindex.geometry import circle, sphere_cross_circle, torus2
from shiftindex.group_action import (GOLDEN, Generator, IsometryGroup, Law, StratumKind, act_cosphere, act_point,
                                     ball, compose, cyclic, diophantine_check, dist_to_fixed, fixed_strata,
                                     free_abelian, growth_check, inverse, liouville_number, power, sphere_count,
                                     trivial_group)

TWO_PI = 2 * math.pi


@pytest.fixture(scope="module")
def rot():
    return free_abelian(circle(), [Generator((GOLDEN,))])


@pytest.fixture(scope="module")
def torus_group():
    return free_abelian(torus2(), [Generator((GOLDEN, 0.0)), Generator((0.0, math.sqrt(2) - 1))])


@pytest.fixture(scope="module")
def sphere_rot():
    return free_abelian(sphere_cross_circle(), [Generator((0,), GOLDEN)])


def test_rotation_moves_origin(rot):
    g = rot.generator()
    assert abs(act_point(g, [0.0])[0] - TWO_PI * GOLDEN) < 1e-14


def test_rotations_fix_fiber_sign(rot):
    x, xi = act_cosphere(rot.generator(), [0.3], [1.0])
    assert xi[0] == 1.0
    assert abs(x[0] - (0.3 + TWO_PI * GOLDEN)) < 1e-14


def test_cyclic_composition():
    G = cyclic(circle(), 4)
    g = compose(G.element(2), G.element(3))
    assert g.exps == (1,)
    assert g.word_length == 1
    assert G.element(3).word_length == 1


def test_cyclic_order_is_checked():
    with pytest.raises(UnsupportedGeometry):
        IsometryGroup(circle(), (Generator((Fraction(1, 3),)),), Law.CYCLIC, 4)


def test_sphere_rotation_needs_sphere():
    with pytest.raises(UnsupportedGeometry):
        free_abelian(torus2(), [Generator((0.1, 0.2), 0.3)])


def test_wrong_generator_arity():
    with pytest.raises(UnsupportedGeometry):
        free_abelian(torus2(), [Generator((0.1,))])


def test_group_mismatch(rot):
    other = free_abelian(circle(), [Generator((GOLDEN,))])
    with pytest.raises(GroupMismatch):
        compose(rot.generator(), other.generator())
    with pytest.raises(GroupMismatch):
        rot.element(1, 2)


def test_ball_counts(torus_group, rot):
    assert len(ball(rot, 5)) == 11
    assert len(ball(torus_group, 2)) == 13
    assert sphere_count(torus_group, 3) == 12
    assert len(ball(trivial_group(circle()), 4)) == 1


def test_growth_exponents():
    assert abs(growth_check(free_abelian(circle(), [Generator((GOLDEN,))]), 16).exponent - 1) < 0.1
    z2 = free_abelian(torus2(), [Generator((GOLDEN, 0)), Generator((0, GOLDEN))])
    est = growth_check(z2, 32)
    assert est.counts[1] == 13
    assert abs(est.exponent - 2) < 0.15
    assert abs(growth_check(cyclic(circle(), 6), 16).exponent) < 0.1
    with pytest.raises(ValueError):
        growth_check(z2, 3)


def test_golden_is_diophantine(rot):
    res = diophantine_check(rot, 200, 64)
    assert res.passed and res.N == 1
    assert res.C > 0


def test_liouville_violates():
    G = free_abelian(circle(), [Generator((liouville_number(6),))])
    res = diophantine_check(G, 2**30, 32)
    assert res.violation
    assert res.as_dict()["status"] == "violation"


def test_cyclic_passes_trivially():
    res = diophantine_check(cyclic(circle(), 4), 10, 16)
    assert res.passed and res.N == 0


def test_diophantine_preconditions(rot):
    with pytest.raises(ValueError):
        diophantine_check(rot, 1, 64)
    with pytest.raises(ValueError):
        diophantine_check(rot, 10, 8)


def test_liouville_number_is_exact():
    x = liouville_number(3)
    assert x == Fraction(1, 2) + Fraction(1, 4) + Fraction(1, 64)


def test_identity_stratum_on_torus(torus_group):
    (s,) = fixed_strata(torus_group.identity)
    assert s.kind is StratumKind.WHOLE and s.angles == ()
    assert s.dim == 2


def test_irrational_rotation_has_no_fixed_points(rot):
    assert [s.kind for s in fixed_strata(rot.generator())] == [StratumKind.EMPTY]


def test_sphere_rotation_strata():
    G = free_abelian(sphere_cross_circle(), [Generator((0,), Fraction(1, 6))])
    strata = fixed_strata(G.generator())
    assert [s.kind for s in strata] == [StratumKind.SUBCIRCLE] * 2
    for s in strata:
        assert s.normal_rank == 2
        assert s.dim + s.normal_rank == 3
        assert abs(abs(math.remainder(s.angles[0], TWO_PI)) - math.pi / 3) < 1e-12
    assert {s.pole for s in strata} == {1, -1}


def test_large_power_of_liouville_rotation_is_not_trivial():
    G = free_abelian(circle(), [Generator((liouville_number(6),))])
    assert fixed_strata(G.element(2**24))[0].kind is StratumKind.EMPTY
    assert fixed_strata(G.element(2**720))[0].kind is StratumKind.WHOLE


exps = st.integers(-50, 50)


@given(exps, exps, exps, exps)
def test_word_metric_subadditive(a, b, c, d):
    G = free_abelian(torus2(), [Generator((GOLDEN, 0)), Generator((0, GOLDEN))])
    g, h = G.element(a, b), G.element(c, d)
    assert compose(g, h).word_length <= g.word_length + h.word_length
    assert compose(g, inverse(g)).is_identity
    assert power(g, 3) == compose(g, compose(g, g))


@given(st.integers(-30, 30), st.lists(st.floats(0, TWO_PI), min_size=6, max_size=6))
def test_isometry(k, coords):
    M = sphere_cross_circle()
    G = free_abelian(M, [Generator((GOLDEN,), math.sqrt(2) - 1)])
    g = G.element(k)
    x = np.array([coords[0] / 2, coords[1], coords[2]])
    y = np.array([coords[3] / 2, coords[4], coords[5]])
    assert abs(M.distance(act_point(g, x), act_point(g, y)) - M.distance(x, y)) < 1e-12


@given(st.integers(-30, 30), st.integers(-30, 30), st.floats(0, TWO_PI), st.floats(0, TWO_PI))
def test_cosphere_action_is_a_homomorphism(a, b, x0, y0):
    G = free_abelian(torus2(), [Generator((GOLDEN, 0)), Generator((0, GOLDEN))])
    g, h = G.element(a, 0), G.element(0, b)
    x, xi = np.array([x0, y0]), np.array([0.6, 0.8])
    lhs = act_cosphere(compose(g, h), x, xi)
    rhs = act_cosphere(g, *act_cosphere(h, x, xi))
    assert np.max(np.abs(np.exp(1j * lhs[0]) - np.exp(1j * rhs[0]))) < 1e-12
    assert np.allclose(lhs[1], rhs[1])
    assert abs(np.linalg.norm(lhs[1]) - 1) < 1e-12


@given(st.sampled_from([Fraction(1, 6), Fraction(1, 4), Fraction(2, 5)]), st.integers(1, 5))
def test_action_is_identity_on_strata(turns, k):
    G = free_abelian(sphere_cross_circle(), [Generator((0,), turns)])
    g = G.element(k)
    for s in fixed_strata(g):
        if s.kind is StratumKind.EMPTY:
            continue
        pts = s.sample(16)
        moved = act_point(g, pts)
        assert np.max(G.manifold.distance(moved, pts)) < 1e-12
        assert np.max(dist_to_fixed(g, pts)) < 1e-12
