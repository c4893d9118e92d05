"""Tolerance-aware complex linear algebra and exact rational helpers.

Every routine here is a pure function of its inputs. Ranks and nullspaces
are read off a singular-value decomposition with a threshold relative to
the largest singular value.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

# Exact rationals are the stdlib type; it is always stored in lowest terms
# with a positive denominator.
Rational = Fraction


@dataclass(frozen=True)
class Tolerance:
    """Numerical thresholds standing in for "with probability one" claims.

    Parameters
    ----------
    relative_rank_tol : float
        A singular value counts toward the rank when it exceeds this
        fraction of the largest singular value.
    residual_tol : float
        Absolute bound on residuals such as ``||A v||`` for nullspace
        vectors, and relative bound for projection residuals.
    """

    relative_rank_tol: float = 1e-9
    residual_tol: float = 1e-8

    def __post_init__(self):
        for name in ("relative_rank_tol", "residual_tol"):
            val = getattr(self, name)
            if not (0.0 < val < 1.0):
                raise ValueError(f"{name} must lie in (0, 1), got {val!r}")


DEFAULT_TOL = Tolerance()


def as_matrix(A) -> np.ndarray:
    """Coerce to a 2-D complex128 array and reject non-finite entries."""
    A = np.asarray(A, dtype=np.complex128)
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    if A.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def singular_values(A) -> np.ndarray:
    A = as_matrix(A)
    if A.size == 0:
        return np.zeros(0)
    return np.linalg.svd(A, compute_uv=False)


def rank_tol(A, tol: Tolerance = DEFAULT_TOL, scale: float | None = None) -> int:
    """Numerical rank of `A`.

    Counts singular values above ``tol.relative_rank_tol * ref`` where
    ``ref`` is the largest singular value of `A`, or `scale` when given.
    An explicit `scale` is needed when `A` may be pure round-off (for
    example the image of a zero-forced block), which would otherwise look
    full rank relative to itself.
    """
    s = singular_values(A)
    if s.size == 0:
        return 0
    ref = s[0] if scale is None else scale
    if ref == 0.0:
        return 0
    return int(np.count_nonzero(s > tol.relative_rank_tol * ref))


def nullspace_basis(A, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis of the right nullspace of `A`, one vector per column."""
    A = as_matrix(A)
    n = A.shape[1]
    if A.shape[0] == 0 or n == 0:
        return np.eye(n, dtype=np.complex128)
    _, s, vh = np.linalg.svd(A, full_matrices=True)
    r = 0 if s[0] == 0.0 else int(np.count_nonzero(s > tol.relative_rank_tol * s[0]))
    return vh[r:].conj().T.copy()


def joint_nullspace(mats: Sequence, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Common nullspace of several matrices sharing a column count."""
    mats = [as_matrix(m) for m in mats]
    if not mats:
        raise ValueError("joint_nullspace needs at least one constraint matrix")
    cols = {m.shape[1] for m in mats}
    if len(cols) != 1:
        raise ValueError(f"column counts differ: {sorted(cols)}")
    return nullspace_basis(np.vstack(mats), tol)


def orth_basis(W, tol: Tolerance = DEFAULT_TOL, scale: float | None = None) -> np.ndarray:
    """Orthonormal basis of the column span of `W` (see `rank_tol` for `scale`)."""
    W = as_matrix(W)
    if W.shape[1] == 0:
        return np.zeros((W.shape[0], 0), dtype=np.complex128)
    u, s, _ = np.linalg.svd(W, full_matrices=False)
    ref = s[0] if scale is None else scale
    if ref == 0.0:
        return np.zeros((W.shape[0], 0), dtype=np.complex128)
    r = int(np.count_nonzero(s > tol.relative_rank_tol * ref))
    return u[:, :r]


def span_contains(U, W, tol: Tolerance = DEFAULT_TOL) -> bool:
    """True iff every column of `U` lies in span(W) up to tolerance."""
    U = as_matrix(U)
    W = as_matrix(W)
    if U.shape[0] != W.shape[0]:
        raise ValueError("U and W must have the same number of rows")
    Q = orth_basis(W, tol)
    for u in U.T:
        nu = np.linalg.norm(u)
        if nu == 0.0:
            continue
        res = np.linalg.norm(u - Q @ (Q.conj().T @ u))
        if res > tol.residual_tol * nu:
            return False
    return True


def projection_residual(U, W, tol: Tolerance = DEFAULT_TOL) -> float:
    """Largest relative residual of a column of `U` projected onto span(W)."""
    U = as_matrix(U)
    Q = orth_basis(W, tol)
    worst = 0.0
    for u in U.T:
        nu = np.linalg.norm(u)
        if nu == 0.0:
            continue
        worst = max(worst, np.linalg.norm(u - Q @ (Q.conj().T @ u)) / nu)
    return float(worst)


def least_squares(A, y) -> tuple[np.ndarray, float]:
    """Minimise ``||A x - y||``; returns the minimiser and the residual norm."""
    A = as_matrix(A)
    y = np.asarray(y, dtype=np.complex128).reshape(-1)
    if A.shape[0] != y.shape[0]:
        raise ValueError(f"shape mismatch: A has {A.shape[0]} rows, y has {y.shape[0]}")
    if A.shape[1] == 0:
        return np.zeros(0, dtype=np.complex128), float(np.linalg.norm(y))
    x, *_ = np.linalg.lstsq(A, y, rcond=None)
    return x, float(np.linalg.norm(A @ x - y))


def format_rational(q) -> str:
    """Render an exact rational as ``p`` or ``p/q``."""
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def parse_rational(text: str) -> Fraction:
    return Fraction(text.strip())
