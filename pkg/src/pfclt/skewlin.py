"""Dense skew-symmetric linear algebra: Pfaffians and skew tridiagonalization.

The Pfaffian of a 2n x 2n antisymmetric matrix is the signed sum over perfect
matchings; the sign convention used throughout is Pf([[0, 1], [-1, 0]]) = +1.
Two independent evaluators are provided: a Parlett-Reid elimination with
partial pivoting (fast path) and a direct sum over matchings (oracle, small
dimensions only).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, SizeError, ValidationError

# Antisymmetry is checked to this absolute tolerance, then inputs are
# symmetrized to kill rounding drift.
ANTISYMMETRY_TOL = 1e-12

# Pivots below this threshold mean the matrix is numerically singular and the
# Pfaffian is reported as exactly 0.
PIVOT_FLOOR = 1e-300

# Hard guard for the matching-sum oracle: (d-1)!! terms.
BRUTEFORCE_MAX_DIM = 12


@dataclass(frozen=True)
class SkewMatrix:
    """Even-dimensional real antisymmetric matrix.

    Entries are validated against ``ANTISYMMETRY_TOL`` and stored in
    symmetrized form (M - M^T)/2 with an exactly zero diagonal.
    """

    entries: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"expected a square matrix, got shape {m.shape}")
        if m.shape[0] % 2 != 0:
            raise DimensionError(
                f"skew matrix dimension must be even, got {m.shape[0]}"
            )
        if np.max(np.abs(m + m.T)) > ANTISYMMETRY_TOL:
            worst = float(np.max(np.abs(m + m.T)))
            raise ValidationError(
                f"matrix is not antisymmetric: max |M + M^T| = {worst:.3e} "
                f"exceeds {ANTISYMMETRY_TOL:.0e}"
            )
        m = (m - m.T) / 2.0
        np.fill_diagonal(m, 0.0)
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


def _as_skew(m) -> np.ndarray:
    """Validate and return the symmetrized entries of a skew matrix input."""
    if isinstance(m, SkewMatrix):
        return m.entries
    return SkewMatrix(np.asarray(m, dtype=float)).entries


def pfaffian(m) -> float:
    """Pfaffian via Parlett-Reid tridiagonalization with partial pivoting.

    Eliminates below the subdiagonal column by column with congruence
    transforms; the Pfaffian is the product of the subdiagonal pivots times
    the sign of the row/column interchanges.
    """
    a = _as_skew(m).copy()
    n = a.shape[0]
    value = 1.0
    for k in range(0, n - 1, 2):
        # Move the largest entry of column k below the diagonal to the pivot
        # slot (k+1, k); each interchange flips the sign.
        kp = k + 1 + int(np.argmax(np.abs(a[k + 1 :, k])))
        if kp != k + 1:
            a[[k + 1, kp], k:] = a[[kp, k + 1], k:]
            a[k:, [k + 1, kp]] = a[k:, [kp, k + 1]]
            value = -value
        pivot = a[k, k + 1]
        if abs(pivot) < PIVOT_FLOOR:
            return 0.0
        value *= pivot
        if k + 2 < n:
            tau = a[k, k + 2 :] / pivot
            col = a[k + 2 :, k + 1]
            a[k + 2 :, k + 2 :] += np.outer(tau, col) - np.outer(col, tau)
    return float(value)


def pfaffian_bruteforce(m) -> float:
    """Pfaffian as the signed sum over perfect matchings (oracle path).

    Expands along the first remaining index: pairing it with the j-th
    remaining partner carries sign (-1)^(j-1).  Exponential cost, hence the
    dimension guard.
    """
    a = _as_skew(m)
    n = a.shape[0]
    if n > BRUTEFORCE_MAX_DIM:
        raise SizeError(
            f"bruteforce Pfaffian limited to dim <= {BRUTEFORCE_MAX_DIM}, got {n}"
        )

    def expand(idx: tuple) -> float:
        if not idx:
            return 1.0
        first, rest = idx[0], idx[1:]
        total = 0.0
        sign = 1.0
        for j, partner in enumerate(rest):
            sub = rest[:j] + rest[j + 1 :]
            total += sign * a[first, partner] * expand(sub)
            sign = -sign
        return total

    return float(expand(tuple(range(n))))


def skew_tridiagonalize(m) -> tuple[SkewMatrix, np.ndarray, int]:
    """Reduce to skew-tridiagonal form by congruence with partial pivoting.

    Returns ``(T, perm, sign)`` where ``perm`` records the accumulated row
    permutation and ``sign`` its parity.  The input is congruent to T via the
    (unit-determinant) elimination, so Pf(m) = sign * Pf(T) with Pf(T) the
    product of the even-position superdiagonal entries.
    """
    a = _as_skew(m).copy()
    n = a.shape[0]
    perm = np.arange(n)
    sign = 1
    for k in range(0, n - 1, 2):
        col = np.abs(a[k + 1 :, k])
        if col.size == 0 or np.max(col) == 0.0:
            continue  # column already eliminated
        kp = k + 1 + int(np.argmax(col))
        if kp != k + 1:
            a[[k + 1, kp], :] = a[[kp, k + 1], :]
            a[:, [k + 1, kp]] = a[:, [kp, k + 1]]
            perm[[k + 1, kp]] = perm[[kp, k + 1]]
            sign = -sign
        pivot = a[k, k + 1]
        if k + 2 < n and abs(pivot) >= PIVOT_FLOOR:
            tau = a[k, k + 2 :] / pivot
            colv = a[k + 2 :, k + 1].copy()
            a[k + 2 :, k + 2 :] += np.outer(tau, colv) - np.outer(colv, tau)
            a[k, k + 2 :] = 0.0
            a[k + 2 :, k] = 0.0
    # zero everything off the tridiagonal band (cleans elimination residue
    # in the subdiagonal-adjacent entries already treated)
    band = np.zeros_like(a)
    d = np.diagonal(a, 1)
    band[np.arange(n - 1), np.arange(1, n)] = d
    band[np.arange(1, n), np.arange(n - 1)] = -d
    return SkewMatrix(band), perm, sign


def pfaffian_from_tridiagonal(t: SkewMatrix, sign: int = 1) -> float:
    """Pfaffian of a skew-tridiagonal matrix times a permutation sign."""
    d = np.diagonal(t.entries, 1)
    return float(sign * np.prod(d[0::2]))


def determinant(m) -> float:
    """Determinant of the (validated) skew matrix via the standard LU path."""
    return float(np.linalg.det(_as_skew(m)))
