"""Concrete model data shared by the scenarios: Bott projections and audit symbols."""
from __future__ import annotations

import numpy as np

from .group_action import IsometryGroup, power
from .operator_spec import LocalTerm, OperatorSpec, TrigPoly
from .symbol_algebra import CrossedSymbol

PAULI = (np.array([[0, 1], [1, 0]], dtype=complex), np.array([[0, -1j], [1j, 0]], dtype=complex),
         np.array([[1, 0], [0, -1]], dtype=complex))
I2 = np.eye(2, dtype=complex)


def bott_vector(x, y, mass: float):
    return np.sin(x), np.sin(y), mass + np.cos(x) + np.cos(y)


def bott_projection_values(grid, mass: float = 1.0, normalize: bool = True) -> np.ndarray:
    x, y = np.broadcast_arrays(grid.coordinate("x"), grid.coordinate("y"))
    d = np.stack(bott_vector(x, y, mass), axis=-1)
    if normalize:
        d = d / np.linalg.norm(d, axis=-1, keepdims=True)
    return 0.5 * (I2 + np.einsum("...k,kij->...ij", d, np.stack(PAULI)))


def bott_projection(group: IsometryGroup, grid, mass: float = 1.0) -> CrossedSymbol:
    """Rank-one projection (1 + d/|d| . sigma) / 2 with d = (sin x, sin y, mass + cos x + cos y)."""
    def func(g, exps):
        if any(exps):
            return np.zeros(g.shape + (2, 2), dtype=complex)
        return bott_projection_values(g, mass)
    return CrossedSymbol.from_function(group, grid, 2, [group.identity.exps], func)


def bott_polynomial(mass: float = 1.0) -> TrigPoly:
    """q = (1 + d . sigma) / 2 as a trigonometric polynomial (not a projection)."""
    sx, sy, sz = PAULI
    modes = {(0, 0): 0.5 * (I2 + mass * sz),
             (1, 0): 0.5 * (sx / 2j + sz / 2), (-1, 0): 0.5 * (-sx / 2j + sz / 2),
             (0, 1): 0.5 * (sy / 2j + sz / 2), (0, -1): 0.5 * (-sy / 2j + sz / 2)}
    return TrigPoly(modes)


def bott_dirac_spec(group: IsometryGroup, mass: float = 1.0) -> OperatorSpec:
    """Order-zero operator 1 - q + q (d/dx + i d/dy) (1 - Laplacian)^(-1/2).

    Its symbol is homotopic through elliptic symbols to that of the
    compressed Dirac operator p dbar p + (1 - p), so both have the index of
    p dbar p on p L^2(T^2, C^2).
    """
    q = bott_polynomial(mass)
    one_minus_q = TrigPoly({k: (I2 if k == (0, 0) else 0) - c for k, c in q.modes.items()})
    terms = [LocalTerm(one_minus_q), LocalTerm(q, derivative=(1, 0), bessel=-1.0),
             LocalTerm(q.scaled(1j), derivative=(0, 1), bessel=-1.0)]
    return OperatorSpec(group, 2, [(group.identity, terms)], 0.0)


def audit_symbol(group: IsometryGroup, grid, weight: float = 0.3, decay: float = 6.0, shells: int = 64):
    """exp(it) at e plus weight * (1 + |m|)^-decay at g^m, 0 < |m| <= shells, on sphere x circle."""
    g = group.generator(0)
    coef = {0: None}
    for m in range(1, shells + 1):
        coef[m] = coef[-m] = weight * (1.0 + m) ** (-decay)

    def func(gr, exps):
        m = exps[0]
        if m == 0:
            t = gr.coordinate("t")
            return np.exp(1j * t)[..., None, None]
        return np.full(gr.shape + (1, 1), coef.get(m, 0.0), dtype=complex)
    support = [power(g, m).exps for m in sorted(coef)]
    return CrossedSymbol.from_function(group, grid, 1, support, func)
