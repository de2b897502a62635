import numpy as np
import pytest

from shiftindex.errors import UnsupportedTerm
from shiftindex.geometry import build_cosphere_grid, circle, torus2
from shiftindex.group_action import trivial_group
from shiftindex.operator_spec import LocalTerm, OperatorSpec, SymbolSpec, TrigPoly, mode


def test_trig_poly_evaluation():
    p = TrigPoly({(1,): 2.0, (-1,): 1j})
    x = np.linspace(0, 6, 7)
    assert np.allclose(p.evaluate([x])[..., 0, 0], 2 * np.exp(1j * x) + 1j * np.exp(-1j * x))
    assert p.degree == (1,)
    assert p.m == 1 and p.nvars == 1


def test_trig_poly_rejects_nan():
    with pytest.raises(ValueError):
        TrigPoly({(0,): np.nan})


def test_declared_order_must_be_attained(golden_group):
    e = golden_group.identity
    with pytest.raises(ValueError):
        OperatorSpec(golden_group, 1, [(e, [LocalTerm(mode(0))])], order=1)
    with pytest.raises(ValueError):
        OperatorSpec(golden_group, 1, [(e, [LocalTerm(mode(0), derivative=(2,))])], order=1)


def test_hardy_only_on_circle():
    G = trivial_group(torus2())
    with pytest.raises(UnsupportedTerm):
        OperatorSpec(G, 1, [(G.identity, [LocalTerm(mode((0, 0)), multiplier="hardy+")])])


def test_unknown_multiplier(golden_group):
    with pytest.raises(UnsupportedTerm):
        OperatorSpec(golden_group, 1, [(golden_group.identity, [LocalTerm(mode(0), multiplier="riesz")])])


def test_matrix_size_mismatch(golden_group):
    with pytest.raises(UnsupportedTerm):
        OperatorSpec(golden_group, 2, [(golden_group.identity, [LocalTerm(mode(0))])])
    with pytest.raises(UnsupportedTerm):
        SymbolSpec(golden_group, 2, [(golden_group.identity, mode(0))])


def test_principal_symbol_of_derivative():
    G = trivial_group(circle())
    grid = build_cosphere_grid(circle(), 8)
    spec = OperatorSpec(G, 1, [(G.identity, [LocalTerm(mode(0), derivative=(1,)), LocalTerm(mode(0))])], order=1)
    sig = spec.principal_symbol((), grid)[..., 0, 0]
    assert np.allclose(sig[0], 1j) and np.allclose(sig[1], -1j)


def test_bandwidth_and_support(golden_group):
    g = golden_group.generator()
    spec = OperatorSpec(golden_group, 1, [(golden_group.identity, [LocalTerm(mode(3))]),
                                          (g, [LocalTerm(TrigPoly({(-2,): 1.0, (1,): 1.0}))])])
    assert spec.bandwidth == (3,)
    assert spec.support_radius == 1
    assert spec.support == [(0,), (1,)]
