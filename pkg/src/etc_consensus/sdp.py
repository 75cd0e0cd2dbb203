"""Trace-minimal block-diagonal dominator of a few PSD matrices.

Solves::

    minimize    sum_i tr(X_i)
    subject to  M_k <= diag(X_1, ..., X_N)   for every k

with a primal log-barrier interior-point method. The unknowns are the
``N * n(n+1)/2`` free entries of the diagonal blocks, so Newton systems stay
tiny even when ``N * n`` is a few dozen.
"""

from __future__ import annotations

import logging

import numpy as np
from numpy.typing import NDArray

from .errors import DimensionMismatch, NoConvergence, SolverFailure
from .numerics import symmetrize

log = logging.getLogger(__name__)


class _BlockDiagParam:
    """Linear map between free parameters and the block-diagonal matrix."""

    def __init__(self, num_blocks: int, block: int):
        self.num_blocks, self.block = num_blocks, block
        rows, cols, owner, weight = [], [], [], []
        k = 0
        for b in range(num_blocks):
            off = b * block
            for p in range(block):
                for q in range(p, block):
                    # every parameter touches (p, q) and, off the diagonal, (q, p)
                    rows.append(off + p); cols.append(off + q); owner.append(k); weight.append(1.0)
                    if p != q:
                        rows.append(off + q); cols.append(off + p); owner.append(k); weight.append(1.0)
                    k += 1
        self.size = k
        self.rows = np.array(rows)
        self.cols = np.array(cols)
        self.T = np.zeros((len(rows), k))
        self.T[np.arange(len(rows)), owner] = weight
        diag = (self.rows == self.cols).astype(float)
        self.trace_grad = self.T.T @ diag

    def to_matrix(self, theta) -> NDArray[np.float64]:
        dim = self.num_blocks * self.block
        out = np.zeros((dim, dim))
        out[self.rows, self.cols] = self.T @ theta
        return out

    def from_matrix(self, x) -> NDArray[np.float64]:
        # pick the upper-triangular entries back out
        vals = x[self.rows, self.cols]
        keep = self.rows <= self.cols
        theta = np.zeros(self.size)
        theta[self.T[keep].argmax(axis=1)] = vals[keep]
        return theta


def _chol_all(mats):
    try:
        return [np.linalg.cholesky(z) for z in mats]
    except np.linalg.LinAlgError:
        return None


def solve_block_dominator(
    constraints,
    num_blocks: int,
    block: int,
    tol: float = 1e-9,
    max_newton: int = 200,
    mu: float = 8.0,
):
    """Return ``(blocks, objective)`` for the trace-minimal block dominator.

    ``tol`` bounds the relative duality gap ``(#constraints * dim / t) / objective``.
    The returned point is strictly feasible.
    """
    dim = num_blocks * block
    mats = [symmetrize(m) for m in constraints]
    for m in mats:
        if m.shape != (dim, dim):
            raise DimensionMismatch(f"constraint shape {m.shape}, expected {(dim, dim)}")
    if not mats:
        raise SolverFailure("at least one constraint is required")

    par = _BlockDiagParam(num_blocks, block)
    top = max(float(np.linalg.eigvalsh(m)[-1]) for m in mats)
    scale = max(abs(top), max(float(np.abs(m).max()) for m in mats), 1e-12)
    theta = par.from_matrix((top + scale) * np.eye(dim))
    barrier_weight = len(mats) * dim
    t = barrier_weight / float(par.trace_grad @ theta)

    total_newton = 0
    while True:
        for _ in range(max_newton):
            x = par.to_matrix(theta)
            zs = [x - m for m in mats]
            chols = _chol_all(zs)
            if chols is None:
                raise SolverFailure("iterate left the feasible region")
            grad = t * par.trace_grad
            hess = np.zeros((par.size, par.size))
            for c in chols:
                cinv = np.linalg.inv(c)
                zi = cinv.T @ cinv
                grad -= par.T.T @ zi[par.rows, par.cols]
                k = zi[np.ix_(par.cols, par.rows)] * zi[np.ix_(par.rows, par.cols)]
                hess += par.T.T @ k @ par.T
            step = -np.linalg.solve(symmetrize(hess), grad)
            decrement = float(-grad @ step)
            total_newton += 1
            # roundoff floor of the decrement grows with t * objective
            floor = 1e-8 + 100.0 * np.finfo(float).eps * t * abs(float(par.trace_grad @ theta))
            if decrement / 2.0 <= floor:
                break
            obj0 = t * float(par.trace_grad @ theta) - sum(
                2.0 * np.log(np.diag(c)).sum() for c in chols
            )
            s = 1.0
            while s > 1e-14:
                cand = theta + s * step
                xc = par.to_matrix(cand)
                cc = _chol_all([xc - m for m in mats])
                if cc is not None:
                    obj = t * float(par.trace_grad @ cand) - sum(
                        2.0 * np.log(np.diag(c)).sum() for c in cc
                    )
                    if obj <= obj0 - 0.25 * s * decrement:
                        break
                s *= 0.5
            else:
                # no descent possible at roundoff level: treat as centered
                break
            theta = cand
        else:
            raise NoConvergence(f"centering did not converge in {max_newton} Newton steps")
        objective = float(par.trace_grad @ theta)
        gap = barrier_weight / t
        if gap <= tol * max(abs(objective), 1e-300):
            break
        t *= mu
    log.debug("block dominator: objective %.12g after %d Newton steps", objective, total_newton)
    x = par.to_matrix(theta)
    blocks = [symmetrize(x[b * block:(b + 1) * block, b * block:(b + 1) * block])
              for b in range(num_blocks)]
    return blocks, objective
