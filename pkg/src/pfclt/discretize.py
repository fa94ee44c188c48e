"""Quadrature grids and matrix discretizations of the scalar integral operators.

Operators are embedded in the weight-symmetrized form sqrt(w) k sqrt(w), which
preserves symmetry of symmetric kernels and turns matrix traces into
quadrature approximations of kernel-diagonal integrals.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import GridMismatchError, NumericalError, SizeError, ValidationError

GAUSS = "gauss"  # composite Gauss-Legendre, 8-node panels
TRAPEZOID = "trapezoid"  # uniform interior nodes (cell midpoints)

PANEL_NODES = 8
DENSE_LIMIT = 4096  # hard cap for dense SVD / eigen factorizations


@dataclass(frozen=True)
class Grid:
    """Quadrature nodes and weights on an open interval.

    Nodes are strictly increasing and interior; weights are positive and sum
    to the interval length.  For the gauss scheme the nodes come in
    consecutive panels of ``PANEL_NODES``.
    """

    interval: tuple
    nodes: np.ndarray
    weights: np.ndarray
    scheme: str

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def sqrt_weights(self) -> np.ndarray:
        return np.sqrt(self.weights)

    def same_as(self, other: "Grid") -> bool:
        return self is other or (
            self.scheme == other.scheme
            and self.nodes.shape == other.nodes.shape
            and np.array_equal(self.nodes, other.nodes)
        )


def make_grid(interval, n_points: int, scheme: str = GAUSS) -> Grid:
    """Build a quadrature grid on the open interval (a, b).

    gauss: composite Gauss-Legendre with 8-node panels (n_points is rounded
    up to a multiple of 8).  trapezoid: uniform interior nodes at cell
    midpoints with equal weights.
    """
    a, b = float(interval[0]), float(interval[1])
    if not b > a:
        raise ValidationError(f"degenerate interval ({a}, {b})")
    if n_points < 2:
        raise ValidationError(f"need at least 2 nodes, got {n_points}")
    if scheme == GAUSS:
        n_panels = int(np.ceil(n_points / PANEL_NODES))
        xi, w = np.polynomial.legendre.leggauss(PANEL_NODES)
        edges = np.linspace(a, b, n_panels + 1)
        half = np.diff(edges) / 2.0
        mid = (edges[:-1] + edges[1:]) / 2.0
        nodes = (mid[:, None] + half[:, None] * xi[None, :]).ravel()
        weights = (half[:, None] * w[None, :]).ravel()
    elif scheme == TRAPEZOID:
        h = (b - a) / n_points
        nodes = a + h * (np.arange(n_points) + 0.5)
        weights = np.full(n_points, h)
    else:
        raise ValidationError(f"unknown scheme {scheme!r}")
    return Grid(interval=(a, b), nodes=nodes, weights=weights, scheme=scheme)


def grid_for_density(interval, nodes_per_unit: float, min_nodes: int = 256,
                     scheme: str = GAUSS) -> Grid:
    """Grid sized by node density, with a floor on the total node count."""
    length = float(interval[1]) - float(interval[0])
    n = max(int(np.ceil(length * nodes_per_unit)), min_nodes)
    return make_grid(interval, n, scheme)


def integrate(grid: Grid, values) -> float:
    """Quadrature sum of point values against the grid weights."""
    return float(np.dot(grid.weights, np.asarray(values)))


@dataclass(frozen=True)
class DiscreteOperator:
    """Weight-symmetrized matrix of an integral operator on the grid.

    ``matrix[i, j] = sqrt(w_i) k(x_i, x_j) sqrt(w_j)``.  A matrix of twice
    the grid size represents a 2x2 block operator over the same grid.
    """

    grid: Grid
    matrix: np.ndarray

    @property
    def is_block(self) -> bool:
        return self.matrix.shape[0] == 2 * self.grid.size


def discretize_kernel(k, grid: Grid) -> DiscreteOperator:
    """Pointwise (Nystrom-style) discretization of a scalar kernel k(x, y)."""
    x = grid.nodes
    vals = np.asarray(k(x[:, None], x[None, :]), dtype=float)
    sw = grid.sqrt_weights
    return DiscreteOperator(grid=grid, matrix=sw[:, None] * vals * sw[None, :])


@lru_cache(maxsize=None)
def _sgn_panel_block() -> np.ndarray:
    """Moment-matched replacement for sgn(x_i - x_j) within one Gauss panel.

    The plain point values of sgn carry an O(panel width) quadrature defect
    whenever the jump sits inside a panel.  The returned 8x8 block M is the
    unique solution of

        sum_b w_b P_m(xi_b) M[b, a] = int P_m(z) sgn(z - xi_a) dz,  m = 0..7,

    so that Gauss sums against any degree-7 polynomial reproduce the exact
    integral of polynomial * sgn.  The same block satisfies the transposed
    (row) conditions and is exactly antisymmetric, so products with the sgn
    operator are high-order accurate from either side.
    """
    xi, w = np.polynomial.legendre.leggauss(PANEL_NODES)
    n = PANEL_NODES
    v = np.empty((n, n))
    r = np.empty((n, n))
    for m in range(n):
        coeffs = np.zeros(m + 1)
        coeffs[m] = 1.0
        v[m, :] = w * np.polynomial.legendre.legval(xi, coeffs)
        anti = np.polynomial.legendre.legint(coeffs)
        q = lambda t: np.polynomial.legendre.legval(t, anti)
        r[m, :] = q(1.0) + q(-1.0) - 2.0 * q(xi)
    block = np.linalg.solve(v, r)
    return (block - block.T) / 2.0  # exact in theory; symmetrize fp residue


def sgn_operator(grid: Grid, corrected: bool = True) -> DiscreteOperator:
    """Discretization of the kernel sgn(x - y), sgn(0) = 0.

    On gauss grids the panel-diagonal 8x8 blocks are replaced by the
    moment-matched block so that operator products integrate the jump
    correctly; pass ``corrected=False`` for the raw point values.
    """
    x = grid.nodes
    vals = np.sign(x[:, None] - x[None, :])
    if corrected and grid.scheme == GAUSS:
        block = _sgn_panel_block()
        n_panels = grid.size // PANEL_NODES
        for p in range(n_panels):
            s = slice(p * PANEL_NODES, (p + 1) * PANEL_NODES)
            vals[s, s] = block
    sw = grid.sqrt_weights
    return DiscreteOperator(grid=grid, matrix=sw[:, None] * vals * sw[None, :])


def kernel_operators(kernel, grid: Grid, corrected_sgn: bool = True):
    """The four scalar operator blocks (A, D, B, A_dag) of a matrix kernel.

    ``kernel`` provides difference kernels ``a``, ``d``, ``b_smooth`` and the
    sgn coefficient of ``b``; the sgn part is discretized separately so the
    jump correction can be applied.
    """
    a_op = discretize_kernel(lambda x, y: kernel.a(x - y), grid)
    d_op = discretize_kernel(lambda x, y: kernel.d(x - y), grid)
    b_mat = discretize_kernel(lambda x, y: kernel.b_smooth(x - y), grid).matrix
    if kernel.b_jump_coeff != 0.0:
        b_mat = b_mat + kernel.b_jump_coeff * sgn_operator(grid, corrected_sgn).matrix
    b_op = DiscreteOperator(grid=grid, matrix=b_mat)
    a_dag = DiscreteOperator(grid=grid, matrix=a_op.matrix.T.copy())
    return a_op, d_op, b_op, a_dag


def chi_projection(piece, grid: Grid) -> DiscreteOperator:
    """Diagonal 0/1 operator selecting grid nodes inside the open interval."""
    a, b = float(piece[0]), float(piece[1])
    lo, hi = grid.interval
    if a < lo - 1e-12 or b > hi + 1e-12:
        raise ValidationError(
            f"piece ({a}, {b}) is not contained in the grid interval ({lo}, {hi})"
        )
    mask = (grid.nodes > a) & (grid.nodes < b)
    return DiscreteOperator(grid=grid, matrix=np.diag(mask.astype(float)))


def _check_compatible(x: DiscreteOperator, y: DiscreteOperator):
    if not x.grid.same_as(y.grid):
        raise GridMismatchError("operators live on different grids")
    if x.matrix.shape != y.matrix.shape:
        raise GridMismatchError(
            f"operator shapes differ: {x.matrix.shape} vs {y.matrix.shape}"
        )


def op_trace(op: DiscreteOperator) -> float:
    return float(np.trace(op.matrix))


def op_product(x: DiscreteOperator, y: DiscreteOperator) -> DiscreteOperator:
    _check_compatible(x, y)
    return DiscreteOperator(grid=x.grid, matrix=x.matrix @ y.matrix)


def op_adjoint(op: DiscreteOperator) -> DiscreteOperator:
    return DiscreteOperator(grid=op.grid, matrix=op.matrix.T.copy())


def trace_product(x: DiscreteOperator, y: DiscreteOperator) -> float:
    """Tr(XY) without forming the product."""
    _check_compatible(x, y)
    return float(np.sum(x.matrix * y.matrix.T))


def singular_values(op: DiscreteOperator) -> np.ndarray:
    """Singular values in descending order (dense SVD; size-guarded)."""
    n = op.matrix.shape[0]
    if n > DENSE_LIMIT:
        raise SizeError(f"dense SVD limited to {DENSE_LIMIT}, got {n}")
    try:
        return np.linalg.svd(op.matrix, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        finite = np.all(np.isfinite(op.matrix))
        raise NumericalError(
            f"SVD failed: {exc}; matrix finite={finite}, "
            f"max|entry|={np.max(np.abs(op.matrix)):.3e}"
        ) from exc


def trace_norm(op: DiscreteOperator) -> float:
    """Schatten-1 norm (sum of singular values)."""
    return float(np.sum(singular_values(op)))


def operator_norm(op: DiscreteOperator) -> float:
    return float(singular_values(op)[0])


def block_operator(a: DiscreteOperator, d: DiscreteOperator, b: DiscreteOperator,
                   a_dag: DiscreteOperator, lam: float) -> DiscreteOperator:
    """The 2x2 block operator lam * [[A, D], [B, A_dag]] on a shared grid.

    Traces of its powers equal the cyclic kernel-chain integrals of the
    matrix kernel, so (1/2) Tr(block^k) is the k-fold trace term of the
    cumulant expansion.
    """
    for other in (d, b, a_dag):
        _check_compatible(a, other)
    top = np.hstack([a.matrix, d.matrix])
    bottom = np.hstack([b.matrix, a_dag.matrix])
    return DiscreteOperator(grid=a.grid, matrix=lam * np.vstack([top, bottom]))


def block_partial_trace(op: DiscreteOperator) -> np.ndarray:
    """Per-block spatial traces of a block operator: a 2x2 matrix.

    For powers of the block kernel operator this is the integrated matrix
    product of the 2x2 kernels around the cycle, which must be a multiple of
    the identity for a valid antisymmetric matrix kernel.
    """
    if not op.is_block:
        raise ValidationError("block_partial_trace expects a block operator")
    n = op.grid.size
    m = op.matrix
    return np.array(
        [
            [np.trace(m[:n, :n]), np.trace(m[:n, n:])],
            [np.trace(m[n:, :n]), np.trace(m[n:, n:])],
        ]
    )


@dataclass(frozen=True)
class StepFunction:
    """Finite step function sum(lam_i chi_(a_i, b_i)) with disjoint intervals."""

    pieces: tuple

    def __post_init__(self):
        norm = []
        for lam, a, b in self.pieces:
            lam, a, b = float(lam), float(a), float(b)
            if lam == 0.0:
                raise ValidationError("step coefficients must be nonzero")
            if not b > a:
                raise ValidationError(f"empty step interval ({a}, {b})")
            norm.append((lam, a, b))
        norm.sort(key=lambda p: p[1])
        for (_, _, b0), (_, a1, _) in zip(norm, norm[1:]):
            if a1 < b0 - 1e-15:
                raise ValidationError("step intervals must be pairwise disjoint")
        object.__setattr__(self, "pieces", tuple(norm))

    @property
    def support(self) -> tuple:
        return (self.pieces[0][1], self.pieces[-1][2])

    def scaled(self, scale: float) -> "StepFunction":
        """The dilated function x -> phi(x / scale)."""
        return StepFunction(
            tuple((lam, a * scale, b * scale) for lam, a, b in self.pieces)
        )

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for lam, a, b in self.pieces:
            out = out + lam * ((x > a) & (x < b))
        return out if out.ndim else float(out)

    def __mul__(self, c: float) -> "StepFunction":
        return StepFunction(tuple((lam * c, a, b) for lam, a, b in self.pieces))

    __rmul__ = __mul__
