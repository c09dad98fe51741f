"""Dense linear-algebra kernel shared by every other module.

Everything here is plain numpy/scipy on float64.  Rank decisions use a
relative singular-value tolerance (default 1e-9) because "almost surely
full rank" statements about random instances become threshold decisions
at finite precision.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NoConvergence, NotHurwitz

RANK_TOL = 1e-9


def _as_matrix(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got shape {M.shape}")
    return M


def is_hurwitz(L, margin: float = 1e-12) -> bool:
    """True if all eigenvalues of L have real part < -margin."""
    L = _as_matrix(L)
    return bool(np.max(np.linalg.eigvals(L).real) < -margin)


def solve_lyapunov(L, Q) -> np.ndarray:
    """Solve L w + w L^T + Q = 0 for the stationary covariance w.

    L must be Hurwitz and Q symmetric PSD; the result is the unique
    symmetric PSD solution.  Uses the dense Bartels-Stewart solver from
    scipy (which solves L X + X L^T = Q, hence the sign flip).
    """
    L = _as_matrix(L)
    Q = _as_matrix(Q)
    n = L.shape[0]
    if L.shape != (n, n) or Q.shape != (n, n):
        raise DimensionMismatch("L and Q must be square of equal size")
    if not is_hurwitz(L):
        raise NotHurwitz("L has an eigenvalue with real part >= -1e-12")
    w = scipy.linalg.solve_continuous_lyapunov(L, -Q)
    w = 0.5 * (w + w.T)
    resid = np.linalg.norm(L @ w + w @ L.T + Q)
    if resid > 1e-8 * max(1.0, np.linalg.norm(Q)):
        raise NoConvergence(f"Lyapunov residual {resid:.3e} above target")
    return w


def range_projector(M, tol: float = RANK_TOL) -> np.ndarray:
    """Orthogonal projector onto the column space of M (numerical rank)."""
    M = _as_matrix(M)
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((M.shape[0], M.shape[0]))
    keep = s > tol * s[0]
    U = U[:, keep]
    return U @ U.T


def null_space_basis(M, expected_dim: int | None = None,
                     tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the right null space of M.

    If expected_dim is given and the numerical null-space dimension
    differs, raises DimensionMismatch -- the caller is expected to treat
    this as a degenerate draw.
    """
    M = _as_matrix(M)
    m, n = M.shape
    _, s, Vt = np.linalg.svd(M)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > tol * smax)) if smax > 0 else 0
    d = n - rank
    if expected_dim is not None and d != expected_dim:
        raise DimensionMismatch(
            f"null space dimension {d}, expected {expected_dim}")
    if d == 0:
        return np.zeros((n, 0))
    return Vt[n - d:].T


def pinv(M, tol: float = 1e-12) -> np.ndarray:
    """Moore-Penrose pseudoinverse with relative cutoff tol."""
    M = _as_matrix(M)
    return np.linalg.pinv(M, rcond=tol)


def spectral_norm(M) -> float:
    """Largest singular value."""
    M = _as_matrix(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def sym(M) -> np.ndarray:
    return 0.5 * (np.asarray(M) + np.asarray(M).T)
