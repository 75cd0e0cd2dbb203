"""Offline design of the triggering parameters.

Pipeline for a fixed Young's-inequality split ``epsilon``:

1. assemble the network matrices ``S``, ``S_u`` and ``Gamma_U``;
2. find the trace-normalized block weights ``Omega_i`` that make all three
   matrices as small as possible relative to ``diag(Omega_i)``;
3. evaluate the three scaling constants ``alpha_*``;
4. bisect for the largest threshold ``sigma`` whose certified ratio stays
   below the target.

The outer loop grid-searches ``epsilon`` and keeps the largest ``sigma``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from numpy.typing import NDArray

from .baseline import AgentDynamics, BaselineDesign
from .errors import (
    AllEpsilonInfeasible,
    EpsilonOutOfRange,
    EtcError,
    Infeasible,
    NonPositiveProduct,
    SigmaTooLarge,
    ValidationError,
)
from .graph import NetworkSpec
from .numerics import symmetrize, weighted_alpha
from .sdp import solve_block_dominator

log = logging.getLogger(__name__)

BISECT_REL_TOL = 1e-9
BISECT_MAX_ITER = 200
SIGMA_CEILING = 1.0 - 1e-9


@dataclass(frozen=True)
class CouplingMatrices:
    S: NDArray[np.float64]
    S_u: NDArray[np.float64]
    Gamma_modes: tuple[NDArray[np.float64], ...]
    Gamma_U: NDArray[np.float64]
    epsilon: float


@dataclass(frozen=True)
class Alphas:
    S: float
    S_u: float
    Gamma_U: float

    def as_tuple(self) -> tuple[float, float, float]:
        return self.S, self.S_u, self.Gamma_U


@dataclass(frozen=True)
class EpsilonRow:
    epsilon: float
    kappa: float | None
    alphas: Alphas | None
    sigma: float | None
    rho_lower: float | None
    note: str = ""

    @property
    def feasible(self) -> bool:
        return self.sigma is not None


@dataclass(frozen=True)
class TriggerParameters:
    omegas: tuple[NDArray[np.float64], ...]
    sigma: float
    epsilon: float
    eta: float
    delta: float
    alpha_S: float
    alpha_Su: float
    alpha_GammaU: float
    beta: float
    gamma: float
    rho_lower: float
    rho_target: float
    kappa: float = math.nan
    table: tuple[EpsilonRow, ...] = field(default=(), compare=False, repr=False)

    @property
    def omega_hat(self) -> NDArray[np.float64]:
        return sla.block_diag(*self.omegas)

    @property
    def certified(self) -> bool:
        return self.rho_lower <= self.rho_target

    def certificate(self) -> dict[str, bool]:
        """Individual sufficient conditions for the performance guarantee."""
        return {
            "trace_normalized": abs(sum(np.trace(o) for o in self.omegas) - 1.0) <= 1e-10,
            "sigma_below_inverse_alpha_S": self.sigma * self.alpha_S < 1.0,
            "denominator_positive": 1.0 - self.epsilon - self.alpha_GammaU * self.beta > 0.0,
            "rho_lower_within_target": self.rho_lower <= self.rho_target,
        }


# --------------------------------------------------------------------------
# network matrices

def build_coupling_matrices(
    design: BaselineDesign, net: NetworkSpec, dyn: AgentDynamics, epsilon: float
) -> CouplingMatrices:
    if not 0.0 < epsilon < 1.0:
        raise EpsilonOutOfRange(f"epsilon must lie in (0, 1), got {epsilon}")
    F, c, n = design.F, design.c, dyn.n
    B, R = dyn.B, dyn.R
    L = net.laplacian
    ftrf = symmetrize(F.T @ R @ F)
    S_u = c**2 * np.kron(L @ L, ftrf)
    S = np.kron(L, dyn.Q) + S_u

    bf = B @ F
    gammas = [np.zeros((n, n))]
    for md in design.modal:
        scale = c**2 * md.lam**2
        pbf = md.P @ bf
        cross = md.A_cl.T @ pbf
        g = scale * (bf.T @ pbf) + (scale / epsilon) * cross.T @ np.linalg.solve(md.W, cross)
        gammas.append(symmetrize(g))
    ukron = np.kron(net.modal_basis, np.eye(n))
    gamma_u = symmetrize(ukron @ sla.block_diag(*gammas) @ ukron.T)
    return CouplingMatrices(symmetrize(S), symmetrize(S_u), tuple(gammas[1:]), gamma_u, epsilon)


def solve_omega_sdp(cm: CouplingMatrices, n: int, N: int, tol: float = 1e-9):
    """Trace-normalized weights ``Omega_i`` and the optimal scale ``kappa*``."""
    blocks, kappa = solve_block_dominator([cm.S, cm.S_u, cm.Gamma_U], N, n, tol=tol)
    kappa = float(sum(np.trace(x) for x in blocks))
    return [x / kappa for x in blocks], kappa


def compute_alphas(cm: CouplingMatrices, omegas) -> Alphas:
    omega_hat = sla.block_diag(*omegas)
    return Alphas(
        weighted_alpha(cm.S, omega_hat),
        weighted_alpha(cm.S_u, omega_hat),
        weighted_alpha(cm.Gamma_U, omega_hat),
    )


# --------------------------------------------------------------------------
# closed forms

def beta_of(sigma: float, alpha_S: float, eta: float) -> float:
    """Error-energy gain for an arbitrary admissible ``eta``; ``inf`` otherwise."""
    den = 1.0 - sigma * (1.0 + 1.0 / eta) * alpha_S
    return sigma * (1.0 + eta) / den if den > 0 else math.inf


def eta_star(sigma: float, alpha_S: float) -> tuple[float, float]:
    """Minimizing ``eta`` and the minimum ``beta``."""
    a = sigma * alpha_S
    if not 0.0 < a < 1.0:
        raise SigmaTooLarge(f"need 0 < sigma*alpha_S < 1, got {a:.6g}")
    ra = math.sqrt(a)
    return ra / (1.0 - ra), sigma / (1.0 - ra) ** 2


def beta_min(sigma: float, alpha_S: float) -> float:
    if sigma == 0.0:
        return 0.0
    return eta_star(sigma, alpha_S)[1]


def f_of(delta: float, alpha_Su: float, beta: float) -> float:
    return 1.0 + delta + (1.0 + 1.0 / delta) * alpha_Su * beta


def delta_star(alpha_Su: float, beta: float) -> tuple[float, float]:
    b = alpha_Su * beta
    if not b > 0.0:
        raise NonPositiveProduct(f"alpha_Su*beta must be positive, got {b:.6g}")
    rb = math.sqrt(b)
    return rb, (1.0 + rb) ** 2


def rho_hat(sigma: float, epsilon: float, eta: float, delta: float, alphas) -> float:
    """Certified ratio for arbitrary admissible ``eta`` and ``delta``; ``inf`` if not admissible."""
    a_s, a_su, a_g = alphas.as_tuple() if isinstance(alphas, Alphas) else alphas
    beta = beta_of(sigma, a_s, eta)
    den = 1.0 - epsilon - a_g * beta
    if not math.isfinite(beta) or den <= 0:
        return math.inf
    return f_of(delta, a_su, beta) / den


def rho_lower(sigma: float, alphas, epsilon: float) -> float:
    """Certified ratio with optimal ``eta`` and ``delta``.

    Infeasible points (``sigma*alpha_S >= 1`` or a nonpositive denominator)
    return ``math.inf`` so callers can compare against a target directly.
    """
    a_s, a_su, a_g = alphas.as_tuple() if isinstance(alphas, Alphas) else alphas
    if sigma < 0 or sigma * a_s >= 1.0:
        return math.inf
    b = beta_min(sigma, a_s)
    den = 1.0 - epsilon - a_g * b
    if den <= 0:
        return math.inf
    return (1.0 + math.sqrt(a_su * b)) ** 2 / den


def max_sigma(alphas, epsilon: float, rho_target: float, bisect_tol: float = BISECT_REL_TOL,
              max_iter: int = BISECT_MAX_ITER) -> float:
    """Largest ``sigma`` with ``rho_lower(sigma) <= rho_target``, found by bisection."""
    a_s = alphas.as_tuple()[0] if isinstance(alphas, Alphas) else alphas[0]
    if not 0.0 < epsilon < 1.0:
        raise EpsilonOutOfRange(f"epsilon must lie in (0, 1), got {epsilon}")
    if 1.0 / (1.0 - epsilon) >= rho_target:
        raise Infeasible(f"1/(1-epsilon) = {1 / (1 - epsilon):.6g} >= rho = {rho_target}")
    if a_s <= 0:
        raise ValidationError("alpha_S must be positive")
    hi = SIGMA_CEILING / a_s
    if rho_lower(hi, alphas, epsilon) <= rho_target:
        return hi
    lo = 0.0
    for _ in range(max_iter):
        if hi - lo <= bisect_tol * hi:
            break
        mid = 0.5 * (lo + hi)
        if rho_lower(mid, alphas, epsilon) <= rho_target:
            lo = mid
        else:
            hi = mid
    return lo


def default_eps_grid(rho_target: float, count: int = 40) -> NDArray[np.float64]:
    top = 0.98 * (1.0 - 1.0 / rho_target)
    if top <= 1e-3:
        raise ValidationError(f"rho = {rho_target} leaves no room for an epsilon grid")
    return np.geomspace(1e-3, top, count)


# --------------------------------------------------------------------------
# full pipeline

def evaluate_epsilon(design, net, dyn, epsilon: float, rho_target: float, sdp_tol: float = 1e-9):
    """One grid point: returns ``(row, omegas)``; ``omegas`` is None if infeasible."""
    if not 0.0 < epsilon < 1.0 - 1.0 / rho_target:
        return EpsilonRow(epsilon, None, None, None, None, "outside (0, 1 - 1/rho)"), None
    cm = build_coupling_matrices(design, net, dyn, epsilon)
    omegas, kappa = solve_omega_sdp(cm, dyn.n, net.num_agents, tol=sdp_tol)
    alphas = compute_alphas(cm, omegas)
    try:
        sigma = max_sigma(alphas, epsilon, rho_target)
    except Infeasible as exc:
        return EpsilonRow(epsilon, kappa, alphas, None, None, str(exc)), None
    row = EpsilonRow(epsilon, kappa, alphas, sigma, rho_lower(sigma, alphas, epsilon))
    return row, omegas


def finalize(omegas, alphas: Alphas, sigma: float, epsilon: float, rho_target: float,
             kappa: float = math.nan, table=()) -> TriggerParameters:
    eta, beta = eta_star(sigma, alphas.S)
    delta, _ = delta_star(alphas.S_u, beta)
    gamma = 1.0 / (1.0 - epsilon - alphas.Gamma_U * beta)
    return TriggerParameters(
        omegas=tuple(np.array(o) for o in omegas),
        sigma=sigma,
        epsilon=epsilon,
        eta=eta,
        delta=delta,
        alpha_S=alphas.S,
        alpha_Su=alphas.S_u,
        alpha_GammaU=alphas.Gamma_U,
        beta=beta,
        gamma=gamma,
        rho_lower=rho_lower(sigma, alphas, epsilon),
        rho_target=rho_target,
        kappa=kappa,
        table=tuple(table),
    )


def design_triggering(design: BaselineDesign, net: NetworkSpec, dyn: AgentDynamics,
                      rho_target: float, eps_grid=None, sdp_tol: float = 1e-9) -> TriggerParameters:
    """Grid-search ``epsilon`` and return the parameters with the largest ``sigma``.

    Ties go to the smallest ``epsilon``.
    """
    if not rho_target > 1.0:
        # the certified ratio always exceeds 1, so no parameters can meet rho <= 1
        raise Infeasible(f"rho_target must exceed 1, got {rho_target}")
    grid = default_eps_grid(rho_target) if eps_grid is None else np.asarray(eps_grid, float)
    if grid.size == 0:
        raise ValidationError("epsilon grid is empty")

    rows, best = [], None
    for eps in sorted(float(e) for e in grid):
        try:
            row, omegas = evaluate_epsilon(design, net, dyn, eps, rho_target, sdp_tol)
        except EtcError as exc:
            row, omegas = EpsilonRow(eps, None, None, None, None, f"{type(exc).__name__}: {exc}"), None
        log.info("epsilon=%.5g sigma*=%s", eps, row.sigma)
        rows.append(row)
        if omegas is not None and (best is None or row.sigma > best[0].sigma):
            best = (row, omegas)
    if best is None:
        raise AllEpsilonInfeasible(
            f"no epsilon in the grid yields a feasible sigma for rho = {rho_target}"
        )
    row, omegas = best
    return finalize(omegas, row.alphas, row.sigma, row.epsilon, rho_target, row.kappa, rows)
