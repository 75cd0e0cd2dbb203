"""Small dense matrix routines shared by the design pipeline.

All routines are pure functions on ``numpy`` arrays. The problems handled
here are tiny (state dimension of a single agent, or ``N*n`` for the
network-level matrices), so the algorithms favour robustness and exactness
over asymptotic speed.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
from numpy.typing import NDArray

from .errors import (
    DimensionMismatch,
    NoConvergence,
    NotDetectable,
    NotPositiveDefinite,
    NotSchurStable,
    NotStabilizable,
)

SCHUR_MARGIN = 1e-9
PBH_TOL = 1e-8
DARE_TOL = 1e-12
DARE_MAX_ITER = 100
VEC_DLYAP_MAX_DIM = 8


def symmetrize(m) -> NDArray[np.float64]:
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + m.T)


def as_matrix(m, name: str = "matrix") -> NDArray[np.float64]:
    arr = np.atleast_2d(np.asarray(m, dtype=float))
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be two-dimensional")
    return arr


def is_positive_definite(m, tol: float = 0.0) -> bool:
    m = symmetrize(m)
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    return bool(np.linalg.eigvalsh(m)[0] > tol * scale)


def spectral_radius(m) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(as_matrix(m)))))


def is_schur_stable(m, margin: float = SCHUR_MARGIN) -> bool:
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch("Schur test needs a square matrix")
    return spectral_radius(m) < 1.0 - margin


def kron(a, b) -> NDArray[np.float64]:
    return np.kron(np.asarray(a, dtype=float), np.asarray(b, dtype=float))


def _pbh_rank_deficient(a, b, tol: float) -> bool:
    """True if some eigenvalue of ``a`` with |z| >= 1 loses rank in ``[a - zI, b]``."""
    n = a.shape[0]
    for z in np.linalg.eigvals(a):
        if abs(z) < 1.0 - SCHUR_MARGIN:
            continue
        pencil = np.hstack([a - z * np.eye(n), b])
        sv = np.linalg.svd(pencil, compute_uv=False)
        if sv[n - 1] <= tol * max(sv[0], 1.0):
            return True
    return False


def is_stabilizable(a, b, tol: float = PBH_TOL) -> bool:
    a, b = as_matrix(a), as_matrix(b)
    return not _pbh_rank_deficient(a, b, tol)


def is_detectable(a, c, tol: float = PBH_TOL) -> bool:
    a, c = as_matrix(a), as_matrix(c)
    return not _pbh_rank_deficient(a.T, c.T, tol)


def psd_sqrt(m) -> NDArray[np.float64]:
    w, v = np.linalg.eigh(symmetrize(m))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def dare_residual(a, b, q, r, p) -> float:
    bp = b.T @ p
    res = q + a.T @ p @ a - a.T @ p @ b @ np.linalg.solve(r + bp @ b, bp @ a) - p
    return float(np.linalg.norm(res, "fro"))


def solve_dare(a, b, q_l, r, tol: float = DARE_TOL, max_iter: int = DARE_MAX_ITER):
    """Stabilizing solution of ``P = Q + A'PA - A'PB (R + B'PB)^-1 B'PA``.

    Uses the structured doubling algorithm, which converges quadratically
    when ``(A, B)`` is stabilizable and ``(A, Q^1/2)`` is detectable. Both
    conditions are checked up front with PBH tests.
    """
    a, b = as_matrix(a, "A"), as_matrix(b, "B")
    q_l, r = symmetrize(as_matrix(q_l, "Q_l")), symmetrize(as_matrix(r, "R"))
    n, m = b.shape
    if a.shape != (n, n) or q_l.shape != (n, n) or r.shape != (m, m):
        raise DimensionMismatch("inconsistent DARE dimensions")
    if not is_positive_definite(r):
        raise NotPositiveDefinite("R must be positive definite")
    if np.linalg.eigvalsh(q_l)[0] < -PBH_TOL * max(1.0, np.abs(q_l).max()):
        raise NotPositiveDefinite("Q_l must be positive semidefinite")
    if not is_stabilizable(a, b):
        raise NotStabilizable("(A, B) is not stabilizable")
    if not is_detectable(a, psd_sqrt(q_l)):
        raise NotDetectable("(A, Q_l^1/2) is not detectable")

    eye = np.eye(n)
    ak = a.copy()
    gk = b @ np.linalg.solve(r, b.T)
    hk = q_l.copy()
    for _ in range(max_iter):
        w = eye + gk @ hk
        w_ak = np.linalg.solve(w, ak)
        w_gk = np.linalg.solve(w, gk)
        h_next = hk + ak.T @ hk @ w_ak
        gk = gk + ak @ w_gk @ ak.T
        ak = ak @ w_ak
        gk = symmetrize(gk)
        h_next = symmetrize(h_next)
        step = np.linalg.norm(h_next - hk, "fro")
        hk = h_next
        if step <= tol * max(1.0, np.linalg.norm(hk, "fro")):
            break
    else:
        raise NoConvergence(f"DARE doubling did not converge in {max_iter} iterations")
    # one Riccati fixed-point sweep polishes roundoff from the doubling steps
    p = hk
    bp = b.T @ p
    p = symmetrize(q_l + a.T @ p @ a - a.T @ p @ b @ np.linalg.solve(r + bp @ b, bp @ a))
    return p


def solve_dlyap(f_cl, w, max_terms: int = 200) -> NDArray[np.float64]:
    """Solve ``P = F' P F + W`` for Schur-stable ``F``."""
    f_cl = as_matrix(f_cl, "F_cl")
    w = symmetrize(as_matrix(w, "W"))
    n = f_cl.shape[0]
    if f_cl.shape != (n, n) or w.shape != (n, n):
        raise DimensionMismatch("inconsistent Lyapunov dimensions")
    if not is_schur_stable(f_cl, margin=0.0):
        raise NotSchurStable(f"spectral radius {spectral_radius(f_cl):.6g} >= 1")
    if n <= VEC_DLYAP_MAX_DIM:
        lhs = np.eye(n * n) - np.kron(f_cl.T, f_cl.T)
        # row-major flattening: vec(F' P F) = kron(F', F') vec(P)
        p = np.linalg.solve(lhs, w.reshape(-1)).reshape(n, n)
        return symmetrize(p)
    # Smith doubling: sums the series sum_k (F')^k W F^k in log2 steps
    p, fk = w.copy(), f_cl.copy()
    for _ in range(max_terms):
        inc = fk.T @ p @ fk
        p = p + inc
        fk = fk @ fk
        if np.linalg.norm(inc, "fro") <= 1e-16 * np.linalg.norm(p, "fro"):
            return symmetrize(p)
    raise NoConvergence("Smith iteration did not converge")


def weighted_alpha(m, omega_hat) -> float:
    """Largest generalized eigenvalue of ``(M, Omega)``.

    This is the smallest ``kappa`` with ``M <= kappa * Omega`` in the PSD order.
    """
    m = symmetrize(as_matrix(m, "M"))
    omega_hat = symmetrize(as_matrix(omega_hat, "Omega"))
    if m.shape != omega_hat.shape:
        raise DimensionMismatch(f"shapes {m.shape} and {omega_hat.shape} differ")
    try:
        chol = np.linalg.cholesky(omega_hat)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("Omega must be positive definite") from exc
    # L^-1 M L^-T has the same spectrum as Omega^-1/2 M Omega^-1/2
    tmp = sla.solve_triangular(chol, m, lower=True)
    sym = sla.solve_triangular(chol, tmp.T, lower=True)
    return float(max(np.linalg.eigvalsh(symmetrize(sym))[-1], 0.0))
