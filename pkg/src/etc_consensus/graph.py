"""Weighted undirected communication graphs and their Laplacian spectra."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import (
    Disconnected,
    DimensionMismatch,
    IndexOutOfRange,
    NegativeWeight,
    NotSymmetric,
    UnsupportedTopology,
)

SYMMETRY_TOL = 1e-12
CONNECTIVITY_TOL = 1e-9


@dataclass(frozen=True)
class NetworkSpec:
    """Immutable graph description plus the Laplacian eigendecomposition.

    ``modal_basis`` is orthogonal with first column ``1/sqrt(N)``, and
    ``modal_basis.T @ laplacian @ modal_basis == diag(eigenvalues)``.
    """

    num_agents: int
    weights: NDArray[np.float64]
    laplacian: NDArray[np.float64]
    eigenvalues: NDArray[np.float64]
    modal_basis: NDArray[np.float64]

    @property
    def lambda2(self) -> float:
        return float(self.eigenvalues[1])

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])

    def neighbors(self, i: int) -> NDArray[np.intp]:
        _check_index(self, i)
        return np.flatnonzero(self.weights[i] > 0)


def _check_index(net: NetworkSpec, i: int) -> None:
    if not 0 <= i < net.num_agents:
        raise IndexOutOfRange(f"agent index {i} outside 0..{net.num_agents - 1}")


def _stabilized_basis(vecs: NDArray[np.float64]) -> NDArray[np.float64]:
    # Pin the consensus direction exactly, then Loewdin-orthonormalize the rest
    # (the smallest perturbation that restores orthogonality).
    num = vecs.shape[0]
    ones = np.full(num, 1.0 / np.sqrt(num))
    rest = vecs[:, 1:]
    rest = rest - np.outer(ones, ones @ rest)
    gram = rest.T @ rest
    w, v = np.linalg.eigh(gram)
    rest = rest @ (v @ np.diag(w ** -0.5) @ v.T)
    return np.column_stack([ones, rest])


def build_network(weights, connectivity_tol: float = CONNECTIVITY_TOL) -> NetworkSpec:
    """Validate a weight matrix and compute the Laplacian spectral objects."""
    w = np.array(weights, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise DimensionMismatch(f"weight matrix must be square, got shape {w.shape}")
    num = w.shape[0]
    scale = max(1.0, float(np.abs(w).max(initial=0.0)))
    if not np.allclose(w, w.T, rtol=0.0, atol=SYMMETRY_TOL * scale):
        raise NotSymmetric("weight matrix is not symmetric")
    if np.any(np.abs(np.diag(w)) > SYMMETRY_TOL * scale):
        raise NotSymmetric("weight matrix must have a zero diagonal")
    if np.any(w < 0):
        raise NegativeWeight("edge weights must be nonnegative")
    if num < 2:
        raise UnsupportedTopology("at least two agents are required")
    w = 0.5 * (w + w.T)
    np.fill_diagonal(w, 0.0)

    lap = np.diag(w.sum(axis=1)) - w
    lam, vecs = np.linalg.eigh(lap)
    lam[0] = 0.0
    if lam[1] <= connectivity_tol * max(1.0, lam[-1]):
        raise Disconnected(f"graph is disconnected (lambda_2 = {lam[1]:.3e})")

    basis = _stabilized_basis(vecs)
    for arr in (w, lap, lam, basis):
        arr.setflags(write=False)
    return NetworkSpec(num, w, lap, lam, basis)


def cycle_weights(num: int, weight: float = 1.0) -> NDArray[np.float64]:
    w = np.zeros((num, num))
    for i in range(num):
        j = (i + 1) % num
        if i != j:
            w[i, j] = w[j, i] = weight
    return w


def path_weights(num: int, weight: float = 1.0) -> NDArray[np.float64]:
    w = np.zeros((num, num))
    for i in range(num - 1):
        w[i, i + 1] = w[i + 1, i] = weight
    return w


def complete_weights(num: int, weight: float = 1.0) -> NDArray[np.float64]:
    return weight * (np.ones((num, num)) - np.eye(num))


GENERATORS = {
    "cycle": cycle_weights,
    "path": path_weights,
    "complete": complete_weights,
}


def neighbor_aggregate(net: NetworkSpec, values, i: int) -> NDArray[np.float64]:
    """Return ``sum_j a_ij (v_i - v_j)``, i.e. row block ``i`` of ``(L kron I) v``."""
    _check_index(net, i)
    vals = np.asarray(values, dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    if vals.shape[0] != net.num_agents:
        raise DimensionMismatch(
            f"expected {net.num_agents} agent vectors, got {vals.shape[0]}"
        )
    nbrs = net.neighbors(i)
    a = net.weights[i, nbrs]
    return a @ (vals[i] - vals[nbrs])
