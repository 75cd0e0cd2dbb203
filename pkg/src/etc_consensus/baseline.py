"""All-time communication baseline: local Riccati gain, coupling gain and its cost."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from numpy.typing import NDArray

from .errors import (
    DimensionMismatch,
    EmptyGainInterval,
    GainOutsideInterval,
    NotDetectable,
    NotPositiveDefinite,
    NotSchurStable,
    NotStabilizable,
    ValidationError,
)
from .graph import NetworkSpec
from .numerics import (
    as_matrix,
    is_detectable,
    is_positive_definite,
    is_schur_stable,
    is_stabilizable,
    psd_sqrt,
    solve_dare,
    solve_dlyap,
    symmetrize,
)


@dataclass(frozen=True)
class AgentDynamics:
    """Identical agent model ``x+ = A x + B u`` with its cost weights."""

    A: NDArray[np.float64]
    B: NDArray[np.float64]
    Q: NDArray[np.float64]
    Q_l: NDArray[np.float64]
    R: NDArray[np.float64]

    def __post_init__(self):
        a = as_matrix(self.A, "A")
        b = as_matrix(self.B, "B")
        if b.shape[0] != a.shape[0] and b.shape[1] == a.shape[0]:
            b = b.T
        n, m = b.shape
        q, q_l, r = (symmetrize(as_matrix(x)) for x in (self.Q, self.Q_l, self.R))
        if a.shape != (n, n):
            raise DimensionMismatch(f"A must be {n}x{n}, got {a.shape}")
        if q.shape != (n, n) or q_l.shape != (n, n):
            raise DimensionMismatch(f"Q and Q_l must be {n}x{n}")
        if r.shape != (m, m):
            raise DimensionMismatch(f"R must be {m}x{m}")
        if not is_positive_definite(q):
            raise NotPositiveDefinite("Q must be positive definite")
        if not is_positive_definite(r):
            raise NotPositiveDefinite("R must be positive definite")
        if np.linalg.eigvalsh(q_l)[0] < -1e-12 * max(1.0, np.abs(q_l).max()):
            raise NotPositiveDefinite("Q_l must be positive semidefinite")
        if not is_stabilizable(a, b):
            raise NotStabilizable("(A, B) is not stabilizable")
        if not is_detectable(a, psd_sqrt(q_l)):
            raise NotDetectable("(A, Q_l^1/2) is not detectable")
        for name, val in zip("A B Q Q_l R".split(), (a, b, q, q_l, r)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True)
class ModalData:
    lam: float
    W: NDArray[np.float64]
    P: NDArray[np.float64]
    A_cl: NDArray[np.float64]


@dataclass(frozen=True)
class BaselineDesign:
    F: NDArray[np.float64]
    P: NDArray[np.float64]
    theta: float
    c: float
    c_interval: tuple[float, float]
    modal: tuple[ModalData, ...] = field(repr=False)

    @property
    def lambdas(self) -> NDArray[np.float64]:
        return np.array([md.lam for md in self.modal])


def zoh_discretize(a_c, b_c, period: float):
    """Exact sampling of ``x' = A_c x + B_c u`` under a zero-order hold."""
    a_c = as_matrix(a_c, "A_c")
    b_c = as_matrix(b_c, "B_c")
    n = a_c.shape[0]
    if b_c.shape[0] != n and b_c.shape[1] == n:
        b_c = b_c.T
    if period < 0:
        raise ValidationError("sampling period must be nonnegative")
    m = b_c.shape[1]
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = a_c
    aug[:n, n:] = b_c
    e = sla.expm(aug * period)
    return e[:n, :n], e[:n, n:]


def gain_interval(theta: float, lam2: float, lam_max: float) -> tuple[float, float]:
    """Open coupling-gain interval that guarantees consensus; ``inf`` when theta = 1."""
    lo = 1.0 / ((1.0 + theta) * lam2)
    hi = math.inf if theta >= 1.0 else 1.0 / ((1.0 - theta) * lam_max)
    return lo, hi


def choose_gain(interval: tuple[float, float], policy="midpoint") -> float:
    lo, hi = interval
    if not lo < hi:
        raise EmptyGainInterval(f"coupling-gain interval ({lo:.6g}, {hi:.6g}) is empty")
    if policy == "midpoint":
        return 2.0 * lo if math.isinf(hi) else math.sqrt(lo * hi)
    c = float(policy)
    if not lo < c < hi:
        raise GainOutsideInterval(f"c = {c:.6g} outside ({lo:.6g}, {hi:.6g})")
    return c


def modal_data(dyn: AgentDynamics, F, c: float, lam: float) -> ModalData:
    a_cl = dyn.A - c * lam * dyn.B @ F
    w = lam * dyn.Q + c**2 * lam**2 * F.T @ dyn.R @ F
    if not is_schur_stable(a_cl):
        raise NotSchurStable(f"A - c*lambda*BF not Schur stable for lambda = {lam:.6g}")
    return ModalData(float(lam), symmetrize(w), solve_dlyap(a_cl, w), a_cl)


def design_baseline(dyn: AgentDynamics, net: NetworkSpec, c_choice="midpoint") -> BaselineDesign:
    """Riccati feedback gain, coupling gain and per-mode Lyapunov data."""
    P = solve_dare(dyn.A, dyn.B, dyn.Q_l, dyn.R)
    bpb = dyn.R + dyn.B.T @ P @ dyn.B
    F = np.linalg.solve(bpb, dyn.B.T @ P @ dyn.A)
    theta = math.sqrt(np.linalg.eigvalsh(dyn.R)[0] / np.linalg.eigvalsh(symmetrize(bpb))[-1])
    interval = gain_interval(theta, net.lambda2, net.lambda_max)
    c = choose_gain(interval, c_choice)
    modal = tuple(modal_data(dyn, F, c, lam) for lam in net.eigenvalues[1:])
    return BaselineDesign(F=F, P=P, theta=theta, c=c, c_interval=interval, modal=modal)


def modal_coordinates(net: NetworkSpec, x, n: int) -> NDArray[np.float64]:
    """Rows are the modal states ``x~_i``; row 0 is the consensus component."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != net.num_agents * n:
        raise DimensionMismatch(f"state must have length {net.num_agents * n}, got {x.size}")
    return net.modal_basis.T @ x.reshape(net.num_agents, n)


def j_all_closed_form(design: BaselineDesign, net: NetworkSpec, x0) -> float:
    """Infinite-horizon cost of the all-time scheme from ``x0``."""
    n = design.F.shape[1]
    xt = modal_coordinates(net, x0, n)
    total = sum(float(xt[k] @ md.P @ xt[k]) for k, md in enumerate(design.modal, start=1))
    return max(total, 0.0)
