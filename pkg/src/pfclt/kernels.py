"""Scalar sinc-family special functions and the Sine1/Sine4 matrix kernels.

The 2x2 kernel K(x, y) of each process is built from S(t) = sin(pi t)/(pi t),
its derivative and its antiderivative; correlation functions are Pfaffians of
the antisymmetric block matrix Z K(x_i, x_j).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import sici

from .errors import InternalConsistencyError
from .skewlin import pfaffian

# Switch to Taylor series below this |pi*x| to avoid cancellation at the
# removable singularity.
_SERIES_CUTOFF = 1e-3


def sinc_s(x):
    """S(x) = sin(pi x)/(pi x) with S(0) = 1; even.  Accepts arrays."""
    x = np.asarray(x, dtype=float)
    u = np.pi * x
    small = np.abs(u) < _SERIES_CUTOFF
    u_safe = np.where(small, 1.0, u)
    direct = np.sin(u_safe) / u_safe
    u2 = u * u
    series = 1.0 - u2 / 6.0 * (1.0 - u2 / 20.0)
    out = np.where(small, series, direct)
    return out if out.ndim else float(out)


def sinc_s_prime(x):
    """Derivative of S; odd, S'(0) = 0.  Accepts arrays."""
    x = np.asarray(x, dtype=float)
    u = np.pi * x
    small = np.abs(u) < _SERIES_CUTOFF
    u_safe = np.where(small, 1.0, u)
    direct = np.pi * (np.cos(u_safe) - np.sin(u_safe) / u_safe) / u_safe
    u2 = u * u
    series = np.pi * (-u / 3.0) * (1.0 - u2 / 10.0 * (1.0 - u2 / 28.0))
    out = np.where(small, series, direct)
    return out if out.ndim else float(out)


def sine_integral_is(x):
    """IS(x) = integral of S from 0 to x = Si(pi x)/pi; odd, -> 1/2 at +inf."""
    x = np.asarray(x, dtype=float)
    si, _ = sici(np.pi * x)
    out = si / np.pi
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class MatrixKernel:
    """2x2 matrix kernel K(x, y) = lam * [[a, d], [b, a(y-x)]].

    ``a``, ``d`` and the smooth part of ``b`` are functions of the difference
    x - y; ``b`` additionally carries ``b_jump_coeff * sgn(x - y)`` (the
    Sine1 case), which is the only non-smooth piece of any entry.
    """

    name: str
    lam: float
    a: Callable = field(repr=False)
    d: Callable = field(repr=False)
    b_smooth: Callable = field(repr=False)
    b_jump_coeff: float = 0.0

    def b(self, t):
        """Full lower-left scalar kernel at difference t (sgn(0) := 0)."""
        val = self.b_smooth(t)
        if self.b_jump_coeff != 0.0:
            val = val + self.b_jump_coeff * np.sign(t)
        return val


def sine4_kernel() -> MatrixKernel:
    """Symplectic bulk kernel: K = (1/2) [[S, S'], [IS, S]]."""
    return MatrixKernel(
        name="sine4",
        lam=0.5,
        a=sinc_s,
        d=sinc_s_prime,
        b_smooth=sine_integral_is,
    )


def sine1_kernel() -> MatrixKernel:
    """Orthogonal bulk kernel: K = [[S, S'], [IS - sgn/2, S]]."""
    return MatrixKernel(
        name="sine1",
        lam=1.0,
        a=sinc_s,
        d=sinc_s_prime,
        b_smooth=sine_integral_is,
        b_jump_coeff=-0.5,
    )


def kernel_by_name(name: str) -> MatrixKernel:
    try:
        return {"sine1": sine1_kernel, "sine4": sine4_kernel}[name]()
    except KeyError:
        raise ValueError(f"unknown kernel {name!r}; expected 'sine1' or 'sine4'")


def eval_kernel(kernel: MatrixKernel, x: float, y: float) -> np.ndarray:
    """The 2x2 matrix K(x, y)."""
    t = x - y
    lam = kernel.lam
    return np.array(
        [
            [lam * kernel.a(t), lam * kernel.d(t)],
            [lam * kernel.b(t), lam * kernel.a(-t)],
        ]
    )


@dataclass(frozen=True)
class CorrelationRequest:
    """Points and kernel for a k-point correlation evaluation.

    Duplicate points make the correlation degenerate (it vanishes); they are
    allowed but flagged.
    """

    points: tuple
    kernel: MatrixKernel
    degenerate: bool = field(init=False)

    def __post_init__(self):
        pts = tuple(float(p) for p in np.atleast_1d(np.asarray(self.points, dtype=float)))
        if len(pts) < 1:
            raise ValueError("correlation needs at least one point")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "degenerate", len(set(pts)) < len(pts))


def correlation(req: CorrelationRequest) -> float:
    """k-point correlation rho_k = Pf[Z K(x_i, x_j)] over the point tuple."""
    pts = np.asarray(req.points)
    k = len(pts)
    kern = req.kernel
    t = pts[:, None] - pts[None, :]
    lam = kern.lam
    k11 = lam * kern.a(t)
    k12 = lam * kern.d(t)
    k21 = lam * kern.b(t)
    k22 = lam * kern.a(-t)
    # Z K = [[K21, K22], [-K11, -K12]] blockwise
    m = np.empty((2 * k, 2 * k))
    m[0::2, 0::2] = k21
    m[0::2, 1::2] = k22
    m[1::2, 0::2] = -k11
    m[1::2, 1::2] = -k12
    asym = np.max(np.abs(m + m.T))
    if asym > 1e-10:
        raise InternalConsistencyError(
            f"assembled correlation matrix is not antisymmetric "
            f"(max |M + M^T| = {asym:.3e}); kernel symmetry is broken"
        )
    return pfaffian((m - m.T) / 2.0)


def correlation_at(kernel: MatrixKernel, points) -> tuple[float, bool]:
    """Convenience wrapper: returns (rho_k, degenerate flag)."""
    req = CorrelationRequest(points=tuple(np.atleast_1d(points)), kernel=kernel)
    return correlation(req), req.degenerate


def is_minus_half_norm_sq(t_end: float, nodes_per_unit: float = 32.0) -> float:
    """Squared L2 norm of (IS - 1/2) over (0, t_end) by composite quadrature.

    Backs the bound ||(IS - 1/2) chi_(0,inf)|| <= 1; panels of 8 Gauss nodes.
    """
    if t_end <= 0:
        return 0.0
    n_panels = max(8, int(np.ceil(t_end * nodes_per_unit / 8.0)))
    xi, w = np.polynomial.legendre.leggauss(8)
    edges = np.linspace(0.0, t_end, n_panels + 1)
    half = np.diff(edges) / 2.0
    mid = (edges[:-1] + edges[1:]) / 2.0
    x = (mid[:, None] + half[:, None] * xi[None, :]).ravel()
    ww = (half[:, None] * w[None, :]).ravel()
    vals = (sine_integral_is(x) - 0.5) ** 2
    return float(np.sum(ww * vals))
