"""Finite-rank commutator data and its numerical verification.

For each kernel the commutators A^dag B - B A and D B - (alpha A^2 + beta A)
are finite-rank with closed-form factor functions; this module builds the
discretized commutators, compares them entrywise to the closed forms, checks
the rank numerically, and scans the boundedness conditions that feed the
central limit theorem.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .discretize import (
    Grid,
    DiscreteOperator,
    StepFunction,
    chi_projection,
    grid_for_density,
    kernel_operators,
    make_grid,
    singular_values,
    trace_norm,
)
from .errors import UnsupportedKernelError, ValidationError
from .kernels import MatrixKernel, sinc_s, sine_integral_is

RANK_RATIO_TOL = 1e-6
RANK_FLOOR = 1e-12


@dataclass(frozen=True)
class FrcpData:
    """Rank bound, (alpha, beta) and factor functions of the two commutators.

    ``f``/``g`` factor the commutator A^dag B - B A, ``h``/``e`` factor
    D B - (alpha A^2 + beta A).  Factors are plain scalar functions on the
    domain interval (the indicator cut is implied by the grid).
    """

    rank_bound: int
    alpha: float
    beta: float
    lam: float
    f: tuple = field(repr=False)
    g: tuple = field(repr=False)
    h: tuple = field(repr=False)
    e: tuple = field(repr=False)

    def __post_init__(self):
        target = 1.0 if self.lam == 0.5 else 0.0
        if self.alpha + self.beta != target:
            raise ValidationError(
                f"alpha + beta must be {target} for lam={self.lam}, "
                f"got {self.alpha + self.beta}"
            )


def sine4_frcp(length: float) -> FrcpData:
    """Rank-2 factorization for the symplectic kernel on (-L, L)."""
    L = float(length)
    is_m = lambda x: sine_integral_is(L - x)
    is_p = lambda x: sine_integral_is(L + x)
    s_m = lambda x: sinc_s(L - x)
    s_p = lambda x: sinc_s(L + x)
    return FrcpData(
        rank_bound=2,
        alpha=1.0,
        beta=0.0,
        lam=0.5,
        f=(is_m, lambda x: -is_p(x)),
        g=(is_m, is_p),
        h=(lambda x: -s_m(x), lambda x: -s_p(x)),
        e=(is_m, is_p),
    )


def sine1_frcp(length: float) -> FrcpData:
    """Rank-4 factorization for the orthogonal kernel on (-L, L).

    The rank-one term (S(L-x) + S(L+x))/2 of the second commutator enters
    with a plus sign: direct quadrature of the defining integral fixes the
    sign, and the residual test below adjudicates.  Likewise (alpha, beta) =
    (1, -1) is forced by D B - (A^2 - A) being the finite-rank combination.
    """
    L = float(length)
    is_m = lambda x: sine_integral_is(L - x)
    is_p = lambda x: sine_integral_is(L + x)
    s_m = lambda x: sinc_s(L - x)
    s_p = lambda x: sinc_s(L + x)
    one = lambda x: np.ones_like(np.asarray(x, dtype=float))
    half_diff = lambda x: 0.5 * (is_p(x) - is_m(x))
    zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))
    return FrcpData(
        rank_bound=4,
        alpha=1.0,
        beta=-1.0,
        lam=1.0,
        f=(is_m, lambda x: -is_p(x), half_diff, one),
        g=(is_m, is_p, one, half_diff),
        h=(
            lambda x: -s_m(x),
            lambda x: -s_p(x),
            lambda x: 0.5 * (s_m(x) + s_p(x)),
            zero,
        ),
        e=(is_m, is_p, one, zero),
    )


def frcp_data_for(kernel: MatrixKernel, length: float) -> FrcpData:
    if kernel.name == "sine4":
        return sine4_frcp(length)
    if kernel.name == "sine1":
        return sine1_frcp(length)
    raise UnsupportedKernelError(
        f"no registered finite-rank commutator data for kernel {kernel.name!r}"
    )


def embedded_factors(funcs, grid: Grid) -> list:
    """Factor functions sampled at the nodes in the sqrt-weight embedding."""
    sw = grid.sqrt_weights
    return [sw * np.asarray(f(grid.nodes), dtype=float) for f in funcs]


def _rank_one_sum(lefts, rights) -> np.ndarray:
    total = np.zeros((lefts[0].size, lefts[0].size))
    for p, q in zip(lefts, rights):
        total += np.outer(p, q)
    return total


@dataclass(frozen=True)
class RankReport:
    """Singular values, closed-form residual and declared rank of a commutator."""

    singular_values: np.ndarray
    residual: float
    declared_rank: int

    def __post_init__(self):
        sv = np.asarray(self.singular_values, dtype=float)
        if np.any(np.diff(sv) > 0):
            raise ValidationError("singular values must be descending")
        object.__setattr__(self, "singular_values", sv)

    @property
    def ratio(self) -> float:
        """sigma_(r+1) / sigma_1, the numerical rank defect past the declared rank."""
        sv = self.singular_values
        if sv[0] <= RANK_FLOOR:
            return 0.0
        if self.declared_rank >= sv.size:
            return 0.0
        return float(sv[self.declared_rank] / sv[0])

    @property
    def passed(self) -> bool:
        sv = self.singular_values
        if sv[0] <= RANK_FLOOR:
            return self.declared_rank == 0
        return self.ratio <= RANK_RATIO_TOL


def rank_check(op: DiscreteOperator, declared_rank: int,
               closed_form: np.ndarray | None = None) -> RankReport:
    """Numerical rank verdict for an operator, optionally with a residual."""
    sv = singular_values(op)
    residual = (
        float(np.max(np.abs(op.matrix - closed_form)))
        if closed_form is not None
        else float("nan")
    )
    return RankReport(singular_values=sv, residual=residual, declared_rank=declared_rank)


@dataclass(frozen=True)
class CommutatorCheck:
    """Verdicts for the two commutator identities of one kernel at one scale."""

    length: float
    n_nodes: int
    first: RankReport  # A^dag B - B A
    second: RankReport  # D B - (alpha A^2 + beta A)

    @property
    def passed(self) -> bool:
        return self.first.passed and self.second.passed


def commutator_matrices(kernel: MatrixKernel, length: float, grid: Grid):
    """Discretized commutators and their closed-form counterparts.

    Returns ``(first, first_closed, second, second_closed)`` as raw matrices
    in the weight-symmetrized embedding.
    """
    data = frcp_data_for(kernel, length)
    a, d, b, a_dag = kernel_operators(kernel, grid)
    first = a_dag.matrix @ b.matrix - b.matrix @ a.matrix
    second = d.matrix @ b.matrix - (
        data.alpha * (a.matrix @ a.matrix) + data.beta * a.matrix
    )
    first_closed = _rank_one_sum(
        embedded_factors(data.f, grid), embedded_factors(data.g, grid)
    )
    second_closed = _rank_one_sum(
        embedded_factors(data.h, grid), embedded_factors(data.e, grid)
    )
    return first, first_closed, second, second_closed


def verify_frcp(kernel: MatrixKernel, length: float, n_nodes: int = 1024) -> CommutatorCheck:
    """Build both commutators on an n-node grid and check rank + closed form."""
    grid = make_grid((-length, length), n_nodes)
    data = frcp_data_for(kernel, length)
    first, first_closed, second, second_closed = commutator_matrices(
        kernel, length, grid
    )
    rep1 = rank_check(
        DiscreteOperator(grid, first), data.rank_bound, closed_form=first_closed
    )
    rep2 = rank_check(
        DiscreteOperator(grid, second), data.rank_bound, closed_form=second_closed
    )
    return CommutatorCheck(
        length=length, n_nodes=grid.size, first=rep1, second=rep2
    )


# ------------------------------------------------------------ boundedness


def inner_product_table(a_mat, a_dag_mat, d_mat, fs, gs, hs, es,
                        m_max: int, n_max: int) -> np.ndarray:
    """All four inner-product families of the boundedness condition.

    Entry [family, i, j, m, n] is the absolute value of
    <D A^dag^m f_i, A^n g_j>, <D A^dag^m f_i, A^n e_j>, <h_i, A^n g_j> or
    <h_i, A^n e_j>; the h-families ignore the m index (stored at m = 0).
    """
    n_f = len(fs)
    out = np.zeros((4, n_f, n_f, m_max + 1, n_max + 1))
    lefts = []
    for fv in fs:
        vec = fv.copy()
        per_m = []
        for m in range(m_max + 1):
            per_m.append(d_mat @ vec)
            vec = a_dag_mat @ vec
        lefts.append(per_m)
    rights_g, rights_e = [], []
    for gv, ev in zip(gs, es):
        gvec, evec = gv.copy(), ev.copy()
        gs_n, es_n = [], []
        for n in range(n_max + 1):
            gs_n.append(gvec)
            es_n.append(evec)
            gvec = a_mat @ gvec
            evec = a_mat @ evec
        rights_g.append(gs_n)
        rights_e.append(es_n)
    for i in range(n_f):
        for j in range(n_f):
            for m in range(m_max + 1):
                for n in range(n_max + 1):
                    out[0, i, j, m, n] = abs(lefts[i][m] @ rights_g[j][n])
                    out[1, i, j, m, n] = abs(lefts[i][m] @ rights_e[j][n])
            for n in range(n_max + 1):
                out[2, i, j, 0, n] = abs(hs[i] @ rights_g[j][n])
                out[3, i, j, 0, n] = abs(hs[i] @ rights_e[j][n])
    return out


@dataclass(frozen=True)
class ConditionScan:
    """Inner-product magnitudes across a scale scan."""

    l_values: tuple
    tables: tuple  # one array per L, shape (4, N, N, m_max+1, n_max+1)

    def max_abs(self) -> np.ndarray:
        return np.array([float(np.max(t)) for t in self.tables])


def condition_iv_scan(kernel: MatrixKernel, l_values, m_max: int = 3,
                      n_max: int = 3, nodes_per_unit: float = 8.0) -> ConditionScan:
    """Scan the four boundedness inner-product families across scales."""
    if m_max > 3 or n_max > 3:
        raise ValidationError("m_max and n_max are capped at 3")
    tables = []
    for L in l_values:
        grid = grid_for_density((-L, L), nodes_per_unit)
        data = frcp_data_for(kernel, L)
        a, d, b, a_dag = kernel_operators(kernel, grid)
        fs = embedded_factors(data.f, grid)
        gs = embedded_factors(data.g, grid)
        hs = embedded_factors(data.h, grid)
        es = embedded_factors(data.e, grid)
        tables.append(
            inner_product_table(
                a.matrix, a_dag.matrix, d.matrix, fs, gs, hs, es, m_max, n_max
            )
        )
    return ConditionScan(l_values=tuple(float(L) for L in l_values), tables=tuple(tables))


# ------------------------------------------------------ step-function scan


def sine4_step_factors(step: StepFunction, length: float):
    """Per-piece factor functions of the projected commutators (Sine4).

    For each piece (a_i, b_i) scaled by L, A chi_i B - B chi_i A factors
    through IS(. - b_i L) and IS(. - a_i L), and D chi_i B - A chi_i A
    through S(. - b_i L) and S(. - a_i L).
    """
    L = float(length)
    factors = []
    for lam, a_i, b_i in step.pieces:
        p, q = a_i * L, b_i * L
        is_q = lambda x, q=q: sine_integral_is(x - q)
        is_p = lambda x, p=p: sine_integral_is(x - p)
        s_q = lambda x, q=q: sinc_s(x - q)
        s_p = lambda x, p=p: sinc_s(x - p)
        factors.append(
            {
                "f": (is_q, lambda x, is_p=is_p: -is_p(x)),
                "g": (is_q, is_p),
                "h": (s_q, lambda x, s_p=s_p: -s_p(x)),
                "e": (is_q, is_p),
            }
        )
    return factors


@dataclass(frozen=True)
class StepConditionScan:
    """Sandwiched inner products and cross trace norms across scales."""

    l_values: tuple
    max_abs: np.ndarray  # per L
    cross_trace_norms: tuple  # per L: dict (i, j) -> ||chi_i A chi_j A* chi_i||_1


def condition_scan_step(kernel: MatrixKernel, step: StepFunction, l_values,
                        nodes_per_unit: float = 8.0,
                        word_length: int = 3) -> StepConditionScan:
    """Boundedness scan of the projected commutator inner products.

    Evaluates <chi_(i1) D chi_(i2) A^dag ... f^(i,j), chi_(j1) A chi_(j2) ...
    g^(i',j')> (and the h/e analogues) for all index words up to the given
    length, together with the cross trace norms ||chi_i A chi_j A* chi_i||_1.
    """
    if kernel.name != "sine4":
        raise UnsupportedKernelError(
            "step-function commutator factors are registered for sine4 only"
        )
    n_pieces = len(step.pieces)
    if n_pieces > 4 or word_length > 3:
        raise ValidationError("at most 4 pieces and word length 3 are supported")
    l_out, maxima, cross_all = [], [], []
    for L in l_values:
        phi = step.scaled(L)
        hull = phi.support
        grid = grid_for_density(hull, nodes_per_unit)
        a, d, b, a_dag = kernel_operators(kernel, grid)
        projections = [
            np.diag(chi_projection((a_i * L, b_i * L), grid).matrix)
            for _, a_i, b_i in step.pieces
        ]
        factors = sine4_step_factors(step, L)

        def left_vectors():
            vecs = []
            for piece in factors:
                for f in piece["f"]:
                    base = grid.sqrt_weights * np.asarray(f(grid.nodes), dtype=float)
                    # words (i1, i2) and (i1, i2, i3): chi D chi (A^dag chi)^t f
                    for i2 in range(n_pieces):
                        v2 = d.matrix @ (projections[i2] * base)
                        for i1 in range(n_pieces):
                            vecs.append(projections[i1] * v2)
                        if word_length >= 3:
                            for i3 in range(n_pieces):
                                v3 = d.matrix @ (
                                    projections[i2]
                                    * (a_dag.matrix @ (projections[i3] * base))
                                )
                                for i1 in range(n_pieces):
                                    vecs.append(projections[i1] * v3)
                for h in piece["h"]:
                    base = grid.sqrt_weights * np.asarray(h(grid.nodes), dtype=float)
                    for i1 in range(n_pieces):
                        vecs.append(projections[i1] * base)
            return vecs

        def right_vectors():
            vecs = []
            for piece in factors:
                for g in piece["g"] + piece["e"]:
                    base = grid.sqrt_weights * np.asarray(g(grid.nodes), dtype=float)
                    for j1 in range(n_pieces):
                        vecs.append(projections[j1] * base)
                        if word_length >= 2:
                            for j2 in range(n_pieces):
                                vecs.append(
                                    projections[j1]
                                    * (a.matrix @ (projections[j2] * base))
                                )
            return vecs

        lefts = np.array(left_vectors())
        rights = np.array(right_vectors())
        maxima.append(float(np.max(np.abs(lefts @ rights.T))))

        cross = {}
        for i in range(n_pieces):
            for j in range(n_pieces):
                if i == j:
                    continue
                m = (
                    projections[i][:, None]
                    * a.matrix
                    * projections[j][None, :]
                ) @ (a.matrix.T * projections[i][None, :])
                cross[(i, j)] = trace_norm(DiscreteOperator(grid, m))
        cross_all.append(cross)
        l_out.append(float(L))
    return StepConditionScan(
        l_values=tuple(l_out), max_abs=np.array(maxima), cross_trace_norms=tuple(cross_all)
    )
