"""Finite-section realizations of operators with shifts and their Fredholm index.

Square finite sections always have index zero, so the estimator never
uses them directly.  Instead the operator is assembled on a padded mode
window ``W = V_{N+w}`` (w = bandwidth) and two tall blocks are read off:
``A_N = M[:, V_N]`` and ``B_N = M^H[:, V_N]``.  Both are exact
restrictions of A and A* to the core window ``V_N``, so their numerical
kernels approximate ker A and ker A*.  The index is read twice, from
kernel counts under a threshold sweep and from the heat supertrace
``sum exp(-t s_A^2) - sum exp(-t s_B^2)``, and accepted only when both
agree over at least three consecutive truncations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NoPlateau, UnsupportedTerm
from .geometry import Kind
from .group_action import Law
from .operator_spec import OperatorSpec
from .symbol_algebra import CrossedSymbol, invert

DENSE_LIMIT = 1200
TAU_DECADES = (2, 3, 4, 5)
SPARSE_K = 14


@dataclass(frozen=True, eq=False)
class TruncatedOperator:
    """Square matrix on a padded mode window plus the core columns.

    ``modes[i]`` is the Fourier (or Hermite) multi-index of block ``i``;
    matrix indices are ``block * m + component``.
    """

    matrix: Union[np.ndarray, sp.spmatrix]
    modes: tuple
    core: np.ndarray  # block indices of the core window V_N
    m: int
    N: int

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    def _columns(self) -> np.ndarray:
        return (self.core[:, None] * self.m + np.arange(self.m)[None, :]).ravel()

    def tall(self):
        """Restriction of the operator to the core window."""
        return self.matrix[:, self._columns()]

    def tall_adjoint(self):
        """Restriction of the adjoint to the core window."""
        return self.matrix.conj().T[:, self._columns()]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else np.asarray(self.matrix)

    def core_block(self) -> np.ndarray:
        """Square sharp-cutoff section on V_N (index zero, shown for reference)."""
        cols = self._columns()
        return self.dense()[np.ix_(cols, cols)]

    def adjoint(self) -> "TruncatedOperator":
        mat = self.matrix.conj().T
        return TruncatedOperator(mat.tocsr() if sp.issparse(mat) else mat, self.modes, self.core, self.m, self.N)


# ----------------------------------------------------------------------------
# assembly


def _window(nvars: int, radius: Sequence[int]) -> list:
    return list(product(*(range(-r, r + 1) for r in radius)))


def _diag_symbol(part, n: np.ndarray, kind: Kind) -> np.ndarray:
    """Fourier multiplier of ``M d^alpha`` on modes ``n`` (shape (B, nvars))."""
    val = np.ones(len(n), dtype=complex)
    for j, p in enumerate(part.derivative):
        val = val * (1j * n[:, j]) ** p
    if part.multiplier == "hardy+":
        val = val * (n[:, 0] >= 0)
    elif part.multiplier == "hardy-":
        val = val * (n[:, 0] < 0)
    if part.bessel:
        val = val * (1.0 + np.sum(n.astype(float) ** 2, axis=1)) ** (part.bessel / 2.0)
    return val


def assemble(spec: OperatorSpec, N_tr: int, reduce_order: bool = False, pad: bool = True) -> TruncatedOperator:
    """Exact Fourier-rule matrix of D on the window ``|n_j| <= N_tr + w_j``.

    Shifts are diagonal phases, multiplication by ``exp(ikx)`` moves mode n
    to n + k (entries leaving the window are dropped), derivatives are
    diagonal ``(i n)^alpha``.  With ``reduce_order`` the operator is
    composed on the right with ``(1 + |n|^2)^(-order/2)``.
    """
    kind = spec.manifold.kind
    if kind not in (Kind.CIRCLE, Kind.TORUS2):
        raise UnsupportedTerm(f"Fourier assembly is available on the circle and torus, not {kind.value}")
    if N_tr < 8:
        raise ValueError("N_tr must be >= 8")
    nvars = len(spec.manifold.periodic_coordinates)
    bw = spec.bandwidth if pad else (0,) * nvars
    radius = [N_tr + w for w in bw]
    modes = _window(nvars, radius)
    index = {k: i for i, k in enumerate(modes)}
    n = np.array(modes, dtype=int).reshape(len(modes), nvars)
    m = spec.m
    rows, cols, vals = [], [], []
    comp = np.arange(m)
    for g, parts in spec.terms:
        phase = np.exp(-1j * (n @ g.shift()))  # (g*)^-1 is the phase exp(-i n.s_g)
        for part in parts:
            diag = _diag_symbol(part, n, kind)
            for k, coef in part.coefficient.modes.items():
                target = n + np.array(k)
                keep = np.array([tuple(t) in index for t in target.tolist()])
                if not np.any(keep):
                    continue
                src = np.nonzero(keep)[0]
                dst = np.array([index[tuple(t)] for t in target[keep].tolist()])
                # block (dst, src) = phase(dst) * coef * diag(src)
                scal = phase[dst] * diag[src]
                for i in comp:
                    for j in comp:
                        if coef[i, j] == 0:
                            continue
                        rows.append(dst * m + i)
                        cols.append(src * m + j)
                        vals.append(scal * coef[i, j])
    size = len(modes) * m
    if rows:
        mat = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                            shape=(size, size)).tocsr()
    else:
        mat = sp.csr_matrix((size, size), dtype=complex)
    if reduce_order and spec.order:
        w = (1.0 + np.sum(n.astype(float) ** 2, axis=1)) ** (-spec.order / 2.0)
        mat = mat @ sp.diags(np.repeat(w, m))
    core = np.array([i for i, k in enumerate(modes) if all(abs(v) <= N_tr for v in k)])
    if size <= DENSE_LIMIT:
        mat = mat.toarray()
    return TruncatedOperator(mat, tuple(modes), core, m, N_tr)


def shift_composed(spec: OperatorSpec, g) -> OperatorSpec:
    """Spec of g* o D: the term at h moves to g^-1 h."""
    group = spec.group
    terms = [(group.element(*(b - a for a, b in zip(g.exps, h.exps))), parts) for h, parts in spec.terms]
    return OperatorSpec(group, spec.m, terms, spec.order)


# ----------------------------------------------------------------------------
# Toeplitz compressions


def _fourier_modes(values: np.ndarray, floor: float = 1e-13) -> dict:
    """Fourier coefficients of samples on a uniform circle grid; shape (n, m, m)."""
    n = values.shape[0]
    coef = np.fft.fft(values, axis=0) / n
    freqs = np.fft.fftfreq(n, d=1.0 / n).astype(int)
    out = {}
    for f, c in zip(freqs, coef):
        if np.max(np.abs(c)) > floor and abs(f) < n // 2:
            out[int(f)] = c
    return out


def toeplitz(sigma: CrossedSymbol, N_tr: int, check: bool = True) -> TruncatedOperator:
    """P M_sigma P on Hardy modes 0..N_tr, with M_sigma = sum_g S_g^-1 Mult(sigma(g)).

    ``sigma`` is an order-zero crossed symbol sampled on the base grid of
    the circle.  The window is padded by the bandwidth of the coefficients.
    """
    if sigma.group.manifold.kind is not Kind.CIRCLE or sigma.grid.carrier != "base":
        raise UnsupportedTerm("Toeplitz compressions need a symbol on the base circle")
    if N_tr < 8:
        raise ValueError("N_tr must be >= 8")
    if check:
        invert(sigma)
    m = sigma.m
    coeffs = {e: _fourier_modes(c[0, 0]) for e, c in sigma.coeffs.items()}
    w = max((abs(k) for modes in coeffs.values() for k in modes), default=0)
    top = N_tr + w
    n = np.arange(0, top + 1)
    size = len(n) * m
    mat = np.zeros((size, size), dtype=complex)
    for e, modes in coeffs.items():
        phase = np.exp(-1j * n * sigma.group.shift(e)[0])
        for k, c in modes.items():
            src = n[(n + k >= 0) & (n + k <= top)]
            for s in src:
                d = s + k
                mat[d * m:(d + 1) * m, s * m:(s + 1) * m] += phase[d] * c
    core = np.arange(N_tr + 1)
    return TruncatedOperator(mat, tuple((int(v),) for v in n), core, m, N_tr)


# ----------------------------------------------------------------------------
# index estimation


@dataclass(frozen=True)
class Reading:
    N: int
    svd: Optional[int]
    heat: Optional[int]
    gap: float
    kernel_A: int
    kernel_B: int
    sparse: bool = False
    heat_values: tuple = ()

    def as_dict(self):
        return {"N": self.N, "svd": self.svd, "heat": self.heat, "gap": self.gap,
                "kernel_A": self.kernel_A, "kernel_B": self.kernel_B, "sparse": self.sparse}


@dataclass(frozen=True)
class IndexEstimate:
    index: int
    methods: dict
    readings: tuple
    gap: float
    extras: dict = field(default_factory=dict)

    @property
    def truncations(self):
        return tuple(r.N for r in self.readings)

    def as_dict(self):
        return {"index": self.index, "methods": dict(self.methods), "gap": self.gap,
                "readings": [r.as_dict() for r in self.readings],
                "extras": {k: v for k, v in self.extras.items() if isinstance(v, (int, float, str, bool, list))}}


def _svdvals(M) -> np.ndarray:
    return scipy.linalg.svdvals(np.asarray(M))


def _smallest_singular_sparse(M, k: int) -> np.ndarray:
    G = (M.conj().T @ M).tocsc()
    n = G.shape[0]
    k = min(k, n - 2)
    scale = float(abs(G).sum(axis=1).max()) or 1.0
    vals = spla.eigsh(G, k=k, sigma=-1e-8 * scale, which="LM", v0=np.ones(n, dtype=G.dtype),
                      return_eigenvectors=False)
    return np.sqrt(np.clip(np.sort(vals.real), 0.0, None))


def _heat_plateau(ts, values) -> Optional[int]:
    run, current = 0, None
    for v in values:
        r = int(round(v))
        if abs(v - r) < 1e-3:
            run = run + 1 if r == current else 1
            current = r
            if run >= 3:
                return current
        else:
            run, current = 0, None
    return None


def read_index(A, B, scale: Optional[float] = None, N: int = 0) -> tuple:
    """Kernel-count and heat readings from the tall blocks of A and A*."""
    sparse = A.shape[1] > DENSE_LIMIT
    if sparse:
        sA = _smallest_singular_sparse(sp.csr_matrix(A), SPARSE_K)
        sB = _smallest_singular_sparse(sp.csr_matrix(B), SPARSE_K)
        ncols = A.shape[1]
    else:
        A = A.toarray() if sp.issparse(A) else A
        B = B.toarray() if sp.issparse(B) else B
        sA, sB = _svdvals(A), _svdvals(B)
        ncols = A.shape[1]
    if scale is None:
        scale = float(np.median(np.concatenate([sA, sB])))
    taus = [scale * 10.0 ** (-j) for j in TAU_DECADES]
    diffs = {int(np.sum(sA < t)) - int(np.sum(sB < t)) for t in taus}
    svd = diffs.pop() if len(diffs) == 1 else None
    # the kernel cluster lies below every threshold of the sweep
    cut = taus[-1]
    kA, kB = int(np.sum(sA < cut)), int(np.sum(sB < cut))
    above = np.concatenate([sA[sA >= cut], sB[sB >= cut]])
    gap = float(np.min(above)) if above.size else 0.0
    below = np.concatenate([sA[sA < cut], sB[sB < cut]])
    s_ker = float(np.max(below)) if below.size else 0.0
    heat = None
    hv = ()
    if gap > 0:
        t_lo = math.log(1e8) / gap**2
        t_hi = min(1e-6 / s_ker**2, 1e4 * t_lo) if s_ker > 1e-150 else 1e4 * t_lo
        if t_hi > t_lo:
            ts = np.geomspace(t_lo, t_hi, 24)
            vals = [float(np.sum(np.exp(-t * sA**2)) - np.sum(np.exp(-t * sB**2))) for t in ts]
            if sparse:
                # unseen singular values lie above the largest computed one
                bound = (ncols - len(sA)) * np.exp(-ts * min(sA[-1], sB[-1]) ** 2)
                vals = [v if b < 1e-4 else math.nan for v, b in zip(vals, bound)]
            hv = tuple(vals)
            heat = _heat_plateau(ts, vals)
    return Reading(N, svd, heat, gap, kA, kB, sparse, hv), scale


def _closing_gap(readings) -> bool:
    first, last = readings[0], readings[-1]
    if first.gap <= 0:
        return True
    return last.gap / first.gap < math.sqrt(first.N / last.N)


def estimate_from_builder(build: Callable[[int], TruncatedOperator], N_list: Sequence[int],
                          adjoint: bool = False, extras: Optional[dict] = None) -> IndexEstimate:
    N_list = list(N_list)
    if len(N_list) < 3 or any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("N_list must be increasing with at least 3 entries")
    readings = []
    scale = None
    first = build(N_list[0])
    if first.tall().shape[1] > DENSE_LIMIT:
        # the median singular value is stable in N; take it from a small dense section
        small = build(8)
        _, scale = read_index(small.tall(), small.tall_adjoint(), None, 8)
    for N in N_list:
        op = build(N)
        A, B = op.tall(), op.tall_adjoint()
        if adjoint:
            A, B = B, A
        reading, s = read_index(A, B, scale, N)
        if scale is None:
            scale = s
        readings.append(reading)
    closing = _closing_gap(readings)
    if closing:
        raise NoPlateau(f"spectral gap closes with truncation: {[r.gap for r in readings]}", tuple(readings), True)
    best = None
    for i in range(len(readings) - 2):
        window = readings[i:i + 3]
        vals = {r.svd for r in window} | {r.heat for r in window}
        if len(vals) == 1 and None not in vals:
            best = vals.pop()
    if best is None:
        raise NoPlateau("no three consecutive truncations agree for both methods", tuple(readings), False)
    return IndexEstimate(best, {"svd": True, "heat": True}, tuple(readings), readings[-1].gap, extras or {})


def estimate_index(spec: Union[OperatorSpec, CrossedSymbol], N_list: Sequence[int],
                   adjoint: bool = False) -> IndexEstimate:
    """Stabilized integer index of an operator spec or of a Toeplitz symbol."""
    if isinstance(spec, CrossedSymbol):
        return estimate_from_builder(lambda N: toeplitz(spec, N, check=False), N_list, adjoint)
    return estimate_from_builder(lambda N: assemble(spec, N, reduce_order=True), N_list, adjoint)


# ----------------------------------------------------------------------------
# the model operator x + d/dx


def hermite_functions(n: int, x: np.ndarray) -> np.ndarray:
    """Orthonormal Hermite functions psi_0..psi_{n-1} at x, shape (n, len(x))."""
    x = np.asarray(x, dtype=float)
    out = np.zeros((n, x.size))
    out[0] = math.pi ** -0.25 * np.exp(-x**2 / 2)
    if n > 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for k in range(2, n):
        out[k] = math.sqrt(2.0 / k) * x * out[k - 1] - math.sqrt((k - 1) / k) * out[k - 2]
    return out


def hermite_ladder(N: int) -> TruncatedOperator:
    """x + d/dx = sqrt(2) a on span(psi_0..psi_N); core columns 0..N-1."""
    sub = np.sqrt(2.0 * np.arange(1, N + 1))
    mat = np.diag(sub, k=1)  # psi_k -> sqrt(2k) psi_{k-1}
    return TruncatedOperator(mat, tuple((k,) for k in range(N + 1)), np.arange(N), 1, N)


def gaussian_hermite_coefficients(N: int, quad: int = 160) -> np.ndarray:
    """Expansion of exp(-x^2/2) in psi_0..psi_{N-1} by Gauss-Hermite quadrature."""
    x, w = np.polynomial.hermite.hermgauss(quad)
    # integrand exp(-x^2/2) psi_k(x) = exp(-x^2) * [psi_k(x) exp(x^2/2)]
    psi = hermite_functions(N, x) * np.exp(x**2 / 2)
    return psi @ w


def model_euler_index(N_hermite: int = 16) -> IndexEstimate:
    """Index of E = x + d/dx on L^2(R) with kernel diagnostics."""
    if N_hermite < 8:
        raise ValueError("N_hermite must be >= 8")
    N_list = [N_hermite // 2, (3 * N_hermite) // 4, N_hermite]
    est = estimate_from_builder(hermite_ladder, N_list)
    A = hermite_ladder(N_hermite).tall()
    _, s, vh = np.linalg.svd(A)
    kernel = vh[-1].conj() if s[-1] < 1e-12 * s[0] else vh[np.argmin(s)].conj()
    ref = gaussian_hermite_coefficients(N_hermite)
    ref = ref / np.linalg.norm(ref)
    overlap = float(abs(np.vdot(ref, kernel)))
    B = hermite_ladder(N_hermite).tall_adjoint()
    adj_kernel = [int(np.sum(_svdvals(hermite_ladder(N).tall_adjoint()) < 1e-10)) for N in N_list]
    extras = {"kernel_overlap": overlap, "kernel_dimension": int(np.sum(s < 1e-10)),
              "adjoint_kernel_counts": adj_kernel, "N_hermite": N_hermite,
              "adjoint_smallest_singular": float(_svdvals(B)[-1])}
    return IndexEstimate(est.index, est.methods, est.readings, est.gap, extras)
