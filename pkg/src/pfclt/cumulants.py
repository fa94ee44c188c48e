"""Cumulants of counting and step-function statistics via operator traces.

The n-th cumulant of a linear statistic is a weighted sum, over compositions
of n, of traces of kernel chains interleaved with multiplication operators.
For pure counts this collapses to the v(n, k)-weighted alternating sum of the
half block traces V_k = (1/2) Tr(K_block^k).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .discretize import (
    StepFunction,
    block_operator,
    grid_for_density,
    kernel_operators,
)
from .errors import InternalConsistencyError, SizeError, ValidationError
from .frcp import FrcpData, embedded_factors, frcp_data_for
from .kernels import MatrixKernel

STIRLING_MAX_N = 30
KMAX_LIMIT = 8
NMAX_COUNTS_LIMIT = 8
NMAX_LINEAR_LIMIT = 6
DEFAULT_DENSITY = 16.0


@lru_cache(maxsize=None)
def _stirling_recursion(n: int, k: int) -> int:
    if n == 0 or k == 0 or k > n:
        return 0
    if n == 1:
        return 1
    return _stirling_recursion(n - 1, k - 1) + k * _stirling_recursion(n - 1, k)


def stirling_v(n: int, k: int) -> int:
    """v(n, k) = v(n-1, k-1) + k v(n-1, k): Stirling numbers of the second kind.

    Boundary v(n, 0) = v(0, k) = 0 with v(1, 1) = 1 forced by the defining
    composition sum.  Exact integer arithmetic.
    """
    if not (0 <= k <= n <= STIRLING_MAX_N):
        raise ValidationError(
            f"stirling_v needs 0 <= k <= n <= {STIRLING_MAX_N}, got ({n}, {k})"
        )
    return _stirling_recursion(n, k)


@dataclass(frozen=True)
class CumulantReport:
    """Per-scale table of trace terms, cumulants and CLT diagnostics.

    ``expectation`` and ``variance`` are computed independently of the
    cumulant sums; construction enforces c_1 = expectation (rel 1e-8) and
    c_2 = variance (rel 1e-6).
    """

    L: float
    expectation: float
    variance: float
    v_k: tuple
    c_n: tuple
    normalized: tuple

    def __post_init__(self):
        c = self.c_n
        # both sides emerge from cancellations at the raw trace scale, so the
        # relative checks carry an absolute floor at that scale
        scale = max((abs(v) for v in self.v_k), default=1.0)
        tol1 = 1e-8 * max(abs(c[0]), abs(self.expectation)) + 1e-12 * scale
        if abs(c[0] - self.expectation) > tol1:
            raise InternalConsistencyError(
                f"c_1 = {c[0]!r} does not match the expectation {self.expectation!r}"
            )
        if len(c) >= 2:
            tol2 = 1e-6 * max(abs(c[1]), abs(self.variance)) + 1e-10 * scale
            if abs(c[1] - self.variance) > tol2:
                raise InternalConsistencyError(
                    f"c_2 = {c[1]!r} does not match the variance {self.variance!r}"
                )


def _make_report(L, expectation, variance, v_k, c_n) -> CumulantReport:
    if variance <= 0:
        raise ValidationError(f"variance must be positive, got {variance}")
    normalized = tuple(
        c / variance ** (n / 2.0) for n, c in enumerate(c_n, start=1)
    )
    return CumulantReport(
        L=float(L),
        expectation=float(expectation),
        variance=float(variance),
        v_k=tuple(float(v) for v in v_k),
        c_n=tuple(float(c) for c in c_n),
        normalized=normalized,
    )


def _block_matrix(kernel: MatrixKernel, L: float, nodes_per_unit: float,
                  interval=None):
    grid = grid_for_density(interval or (-L, L), nodes_per_unit)
    a, d, b, a_dag = kernel_operators(kernel, grid)
    kk = block_operator(a, d, b, a_dag, kernel.lam)
    return grid, (a, d, b, a_dag), kk.matrix


def _half_traces(kk: np.ndarray, k_max: int) -> list:
    """V_k = (1/2) Tr(kk^k) for k = 1..k_max.

    Powers are accumulated left to right so the floating-point association
    matches the composition-path chains exactly; Tr(P kk) is contracted
    elementwise without forming the final product.
    """
    out = [0.5 * float(np.trace(kk))]
    prefix = kk
    for k in range(2, k_max + 1):
        if k > 2:
            prefix = prefix @ kk
        out.append(0.5 * float(np.sum(prefix * kk.T)))
    return out


def v_k_traces(kernel: MatrixKernel, L: float, k_max: int,
               nodes_per_unit: float = DEFAULT_DENSITY) -> list:
    """Half block traces V_k for the counting statistic on (-L, L)."""
    if k_max > KMAX_LIMIT:
        raise SizeError(f"k_max is capped at {KMAX_LIMIT}")
    _, _, kk = _block_matrix(kernel, L, nodes_per_unit)
    return _half_traces(kk, k_max)


def counting_cumulants_from_traces(v_k, n_max: int) -> list:
    """c_n from the alternating v(n, k)-weighted sum, with a telescoped check.

    The untelescoped sum over k = 1..n is the defining expression; for n >= 2
    the telescoped form over the successive differences V_k - V_(k-1) must
    agree to relative 1e-8 (they are algebraically identical).
    """
    c = []
    for n in range(1, n_max + 1):
        terms = [
            (-1) ** (k - 1) * math.factorial(k - 1) * stirling_v(n, k) * v_k[k - 1]
            for k in range(1, n + 1)
        ]
        direct = math.fsum(terms)
        scale = math.fsum(abs(t) for t in terms)
        if n >= 2:
            tele = math.fsum(
                (-1) ** (k - 1)
                * math.factorial(k - 1)
                * stirling_v(n - 1, k - 1)
                * (v_k[k - 1] - v_k[k - 2])
                for k in range(2, n + 1)
            )
            tol = 1e-8 * max(abs(direct), abs(tele)) + 1e-12 * scale
            if abs(direct - tele) > tol:
                raise InternalConsistencyError(
                    f"cumulant forms disagree at n={n}: direct={direct!r}, "
                    f"telescoped={tele!r}"
                )
        c.append(direct)
    return c


def cumulant_counts(kernel: MatrixKernel, L: float, n_max: int,
                    nodes_per_unit: float = DEFAULT_DENSITY) -> CumulantReport:
    """Cumulant report for the counting statistic #(-L, L)."""
    if n_max > NMAX_COUNTS_LIMIT:
        raise SizeError(f"n_max is capped at {NMAX_COUNTS_LIMIT}")
    v = v_k_traces(kernel, L, max(n_max, 2), nodes_per_unit)
    c = counting_cumulants_from_traces(v, n_max)
    unit_box = StepFunction(((1.0, -1.0, 1.0),))
    expectation, variance = expectation_variance(kernel, unit_box, L, nodes_per_unit)
    return _make_report(L, expectation, variance, v[:n_max], c)


def expectation_variance(kernel: MatrixKernel, f: StepFunction, L: float,
                         nodes_per_unit: float = DEFAULT_DENSITY) -> tuple:
    """Mean and variance of the linear statistic of f(x / L).

    E = int f_L(x) K11(x, x) dx and Var = int |f_L|^2 K11(x, x) dx minus the
    double quadrature of f_L(x) f_L(y) det K(x, y) over the support hull.
    """
    phi = f.scaled(L)
    grid = grid_for_density(phi.support, nodes_per_unit)
    a, d, b, _ = kernel_operators(kernel, grid)
    lam = kernel.lam
    a0 = float(kernel.a(0.0))
    fv = phi(grid.nodes)
    expectation = lam * a0 * float(np.dot(grid.weights, fv))
    # embedded matrices already carry w_i w_j; det K(x, y) multiplies the
    # (x, y) values of all four entries: a(x-y) a(y-x) - d(x-y) b(x-y)
    det_part = lam**2 * (a.matrix * a.matrix.T - d.matrix * b.matrix)
    variance = lam * a0 * float(np.dot(grid.weights, fv**2)) - float(
        fv @ det_part @ fv
    )
    return expectation, variance


def cumulant_linear_stat(kernel: MatrixKernel, f: StepFunction, L: float,
                         n_max: int,
                         nodes_per_unit: float = DEFAULT_DENSITY) -> CumulantReport:
    """Cumulants of the scaled step statistic by composition-weighted traces.

    Sums, over compositions (l_1, ..., l_k) of each n, the trace of the chain
    F^(l_1) K F^(l_2) K ... F^(l_k) K with weight
    (-1)^(k-1) n! / (l_1! ... l_k!) / (2k), where F multiplies by f_L.
    """
    if n_max > NMAX_LINEAR_LIMIT:
        raise SizeError(f"n_max is capped at {NMAX_LINEAR_LIMIT}")
    phi = f.scaled(L)
    grid, _, kk = _block_matrix(kernel, L, nodes_per_unit, interval=phi.support)
    fv = phi(grid.nodes)
    fdiag = np.concatenate([fv, fv])

    scaled = {}

    def f_power_chain(l: int) -> np.ndarray:
        if l not in scaled:
            scaled[l] = (fdiag**l)[:, None] * kk
        return scaled[l]

    terms = [[] for _ in range(n_max)]

    def descend(prefix, total, k_parts, fact_denom):
        for l in range(1, n_max - total + 1):
            m = f_power_chain(l)
            n = total + l
            k = k_parts + 1
            denom = fact_denom * math.factorial(l)
            tr = float(np.sum(prefix * m.T)) if prefix is not None else float(np.trace(m))
            weight = (-1) ** (k - 1) * math.factorial(n) / denom / (2 * k)
            terms[n - 1].append(weight * tr)
            if n < n_max:
                descend(m if prefix is None else prefix @ m, n, k, denom)

    descend(None, 0, 0, 1)
    c = np.array([math.fsum(t) for t in terms])

    if np.all(fv == 1.0):
        # f is the indicator of the whole domain: must reproduce the
        # counting path (same traces, different bookkeeping); the tolerance
        # floors at the cancellation scale of the alternating sums
        v = _half_traces(kk, n_max)
        reference = counting_cumulants_from_traces(v, n_max)
        for n, (got, want) in enumerate(zip(c, reference), start=1):
            scale = math.fsum(
                math.factorial(k - 1) * stirling_v(n, k) * abs(v[k - 1])
                for k in range(1, n + 1)
            )
            if abs(got - want) > 1e-8 * max(abs(got), abs(want)) + 1e-12 * scale:
                raise InternalConsistencyError(
                    f"composition path disagrees with counting path at n={n}: "
                    f"{got!r} vs {want!r}"
                )

    expectation, variance = expectation_variance(kernel, f, L, nodes_per_unit)
    return _make_report(L, expectation, variance, _half_traces(kk, min(n_max, 4)), c)


def clt_diagnostic(report: CumulantReport) -> list:
    """Normalized cumulants c_n / Var^(n/2) for n = 3..n_max."""
    if report.variance <= 0:
        raise ValidationError("clt_diagnostic needs a positive variance")
    return list(report.normalized[2:])


# ------------------------------------------------- trace decomposition


_WORD_SYMBOL = {(1, 1): "A", (1, 2): "D", (2, 1): "B", (2, 2): "T"}


def _chain_symbols(word) -> list:
    k = len(word)
    return [_WORD_SYMBOL[(word[i], word[(i + 1) % k])] for i in range(k)]


def _expand_terms(symbols, mats, rank_terms) -> list:
    """Expand one D T^n B segment via the finite-rank commutator identities.

    Returns a list of (coefficient, factor list) where factors are matrices;
    recursion stops when no B symbol remains.  ``rank_terms`` carries the
    outer-product matrices of the factor pairs and the polynomial piece
    alpha A^2 + beta A.
    """
    if "B" not in symbols:
        return [(1.0, [mats[s] for s in symbols])]
    j = symbols.index("B")
    i = j - 1
    while symbols[i] == "T":
        i -= 1
    assert symbols[i] == "D", "every B is preceded by D T^n in a kernel chain"
    n = j - i - 1
    head, tail = symbols[:i], symbols[j + 1 :]
    out = []
    # D T^n B -> (alpha A^2 + beta A) A^n
    out.extend(
        (c, f)
        for c, f in _expand_terms(head + ["P"] + ["A"] * n + tail, mats, rank_terms)
    )
    # + sum_i (h_i x e_i) A^n
    for he in rank_terms["he"]:
        for c, f in _expand_terms(head + ["A"] * n + tail, mats, rank_terms):
            out.append((c, _splice(f, len(head), he)))
    # + sum_(j=1..n) sum_i D T^(n-j) (f_i x g_i) A^(j-1)
    for step in range(1, n + 1):
        for fg in rank_terms["fg"]:
            base = head + ["D"] + ["T"] * (n - step) + ["A"] * (step - 1) + tail
            for c, f in _expand_terms(base, mats, rank_terms):
                out.append((c, _splice(f, len(head) + 1 + (n - step), fg)))
    return out


def _splice(factors, position, matrix):
    return factors[:position] + [matrix] + factors[position:]


@dataclass(frozen=True)
class DecompositionReport:
    """Both sides of the k-fold trace decomposition and their mismatch."""

    k: int
    L: float
    lhs: float
    rhs: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs) / max(abs(self.lhs), 1e-30)


def trace_decomposition_check(kernel: MatrixKernel, L: float, k: int,
                              nodes_per_unit: float = DEFAULT_DENSITY,
                              frcp_data: FrcpData | None = None) -> DecompositionReport:
    """Check (1/2) Tr(K_block^k) against the finite-rank decomposition.

    The left side is the assembled block trace; the right side expands every
    cyclic index word through the commutator identities, leaving polynomial
    traces in A plus traces of products with the closed-form rank-one
    factors.  Residuals measure how well the discretized operators satisfy
    the identities.
    """
    if k not in (2, 3, 4):
        raise ValidationError(f"decomposition check supports k in 2..4, got {k}")
    data = frcp_data or frcp_data_for(kernel, L)
    grid, (a, d, b, a_dag), kk = _block_matrix(kernel, L, nodes_per_unit)
    lhs = _half_traces(kk, k)[k - 1]

    poly = data.alpha * (a.matrix @ a.matrix) + data.beta * a.matrix
    mats = {"A": a.matrix, "T": a_dag.matrix, "D": d.matrix, "B": b.matrix, "P": poly}
    fs = embedded_factors(data.f, grid)
    gs = embedded_factors(data.g, grid)
    hs = embedded_factors(data.h, grid)
    es = embedded_factors(data.e, grid)
    rank_terms = {
        "fg": [np.outer(p, q) for p, q in zip(fs, gs)],
        "he": [np.outer(p, q) for p, q in zip(hs, es)],
    }

    rhs = 0.0
    lam_k = kernel.lam**k
    for bits in np.ndindex(*(2,) * (k - 1)):
        word = (1,) + tuple(2 if t else 1 for t in bits)
        for coeff, factors in _expand_terms(_chain_symbols(word), mats, rank_terms):
            prod = factors[0]
            for m in factors[1:]:
                prod = prod @ m
            rhs += lam_k * coeff * float(np.trace(prod))
    return DecompositionReport(k=k, L=float(L), lhs=float(lhs), rhs=float(rhs))
