"""Closed-loop simulation under all-time or event-triggered communication.

States are held as ``(N, n)`` arrays, one row per agent. Disagreement terms
are evaluated edge by edge (``x_i - x_j``) rather than through ``L @ x`` so
that they keep full relative accuracy when the agents are near consensus
but far from the origin.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .baseline import AgentDynamics, BaselineDesign
from .errors import DimensionMismatch, IndexOutOfRange, MissingTriggerParameters, ValidationError
from .graph import NetworkSpec
from .numerics import symmetrize
from .trigger_design import TriggerParameters

ALL_TIME = "all_time"
EVENT_TRIGGERED = "event_triggered"
MODES = (ALL_TIME, EVENT_TRIGGERED)
MODE_ALIASES = {"all": ALL_TIME, "etc": EVENT_TRIGGERED, ALL_TIME: ALL_TIME,
                EVENT_TRIGGERED: EVENT_TRIGGERED}


@dataclass(frozen=True)
class SimConfig:
    horizon: int
    x0: NDArray[np.float64]
    mode: str = EVENT_TRIGGERED
    record_trace: bool = False
    consensus_tol: float = 1e-6
    # stop early once x'(L kron Q)x falls below stop_tol times its initial value
    stop_tol: float | None = None

    def __post_init__(self):
        if int(self.horizon) != self.horizon or self.horizon < 0:
            raise ValidationError(f"horizon must be a nonnegative integer, got {self.horizon}")
        if self.mode not in MODE_ALIASES:
            raise ValidationError(f"unknown mode {self.mode!r}")
        object.__setattr__(self, "mode", MODE_ALIASES[self.mode])
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float).reshape(-1))


@dataclass(frozen=True)
class SimState:
    """State entering step ``k``.

    ``x`` is the true state at ``k``; the predictor fields hold the values
    produced at step ``k - 1`` (``x_hat``, ``u_hat``, ``phi_prev``).
    """

    k: int
    x: NDArray[np.float64]
    x_hat: NDArray[np.float64]
    x_bar: NDArray[np.float64]
    u_hat: NDArray[np.float64]
    phi_prev: NDArray[np.float64]
    last_tx: NDArray[np.int64]


@dataclass(frozen=True)
class StepRecord:
    k: int
    x: NDArray[np.float64]
    x_hat: NDArray[np.float64]
    x_bar: NDArray[np.float64]
    u: NDArray[np.float64]
    triggered: NDArray[np.bool_]
    phi: NDArray[np.float64]
    stage_cost: float
    # e_i' Omega_i e_i - sigma * phi_i[k-1]; never positive along a valid run
    trigger_slack: NDArray[np.float64]


@dataclass(frozen=True)
class SimResult:
    mode: str
    horizon: int
    steps: int
    cost: float
    transmissions: tuple[tuple[int, ...], ...]
    tx_fraction: float
    initial_disagreement: float
    final_disagreement: float
    consensus_reached: bool
    trigger_violations: int
    max_trigger_slack: float
    trace: tuple[StepRecord, ...] | None = field(default=None, repr=False)

    @property
    def transmission_count(self) -> int:
        return sum(len(t) for t in self.transmissions)


class Simulator:
    """Precomputed closed-loop data for one (dynamics, network, design) triple."""

    def __init__(self, dyn: AgentDynamics, net: NetworkSpec, design: BaselineDesign,
                 params: TriggerParameters | None = None):
        self.dyn, self.net, self.design, self.params = dyn, net, design, params
        self.N, self.n, self.m = net.num_agents, dyn.n, dyn.m
        iu, ju = np.nonzero(np.triu(net.weights, 1))
        self.edges_i, self.edges_j = iu, ju
        self.edge_w = net.weights[iu, ju]
        inc = np.zeros((len(iu), self.N))
        inc[np.arange(len(iu)), iu] = 1.0
        inc[np.arange(len(iu)), ju] = -1.0
        self.incidence = inc
        self.abs_incidence = np.abs(inc)
        self.At, self.Bt = dyn.A.T, dyn.B.T
        self.Ft = design.F.T
        self.c = design.c
        self.ftrf = symmetrize(design.F.T @ dyn.R @ design.F)
        if params is not None:
            if len(params.omegas) != self.N:
                raise DimensionMismatch("one Omega block per agent is required")
            self.omegas = np.stack([np.asarray(o, float) for o in params.omegas])
            self.sigma = params.sigma

    # -- building blocks ---------------------------------------------------
    def _diffs(self, x):
        return x[self.edges_i] - x[self.edges_j]

    def zeta(self, x) -> NDArray[np.float64]:
        """Rows ``sum_j a_ij (x_i - x_j)``."""
        return self.incidence.T @ (self.edge_w[:, None] * self._diffs(x))

    def edge_energy(self, x) -> NDArray[np.float64]:
        d = self._diffs(x)
        return self.edge_w * np.einsum("ej,jk,ek->e", d, self.dyn.Q, d)

    def disagreement_energy(self, x) -> float:
        """``x' (L kron Q) x``."""
        return float(self.edge_energy(x).sum())

    def disagreement_norm(self, x) -> float:
        """``||(L kron I_n) x||``."""
        return float(np.linalg.norm(self.zeta(x)))

    def phi(self, x_hat) -> NDArray[np.float64]:
        zeta = self.zeta(x_hat)
        local = 0.5 * (self.abs_incidence.T @ self.edge_energy(x_hat))
        return local + self.c**2 * np.einsum("ij,jk,ik->i", zeta, self.ftrf, zeta)

    def inputs(self, x_hat) -> NDArray[np.float64]:
        return -self.c * self.zeta(x_hat) @ self.Ft

    def stage_cost(self, x, u) -> float:
        return self.disagreement_energy(x) + float(np.einsum("ij,jk,ik->", u, self.dyn.R, u))

    # -- dynamics ----------------------------------------------------------
    def initial_state(self, x0) -> SimState:
        x = np.asarray(x0, dtype=float).reshape(-1)
        if x.size != self.N * self.n:
            raise DimensionMismatch(f"x0 must have length {self.N * self.n}, got {x.size}")
        x = x.reshape(self.N, self.n)
        zeros = np.zeros_like(x)
        return SimState(0, x, zeros, zeros, np.zeros((self.N, self.m)), np.zeros(self.N),
                        np.full(self.N, -1, dtype=np.int64))

    def step_all_time(self, st: SimState) -> tuple[SimState, StepRecord]:
        u = self.inputs(st.x)
        cost = self.stage_cost(st.x, u)
        trig = np.ones(self.N, dtype=bool)
        rec = StepRecord(st.k, st.x, st.x, st.x, u, trig, self.phi(st.x), cost, np.zeros(self.N))
        nxt = SimState(st.k + 1, st.x @ self.At + u @ self.Bt, st.x, st.x, u, rec.phi,
                       np.full(self.N, st.k, dtype=np.int64))
        return nxt, rec

    def step_event_triggered(self, st: SimState) -> tuple[SimState, StepRecord]:
        if self.params is None:
            raise MissingTriggerParameters("event-triggered mode needs TriggerParameters")
        x = st.x
        if st.k == 0:
            # mandatory initial broadcast
            x_bar = np.zeros_like(x)
            trig = np.ones(self.N, dtype=bool)
            x_hat = x.copy()
            slack = np.zeros(self.N)
        else:
            x_bar = st.x_hat @ self.At + st.u_hat @ self.Bt
            e_bar = x_bar - x
            weighted = np.einsum("ij,ijk,ik->i", e_bar, self.omegas, e_bar)
            threshold = self.sigma * st.phi_prev
            trig = weighted > threshold
            x_hat = np.where(trig[:, None], x, x_bar)
            e = x_hat - x
            slack = np.einsum("ij,ijk,ik->i", e, self.omegas, e) - threshold
        u = self.inputs(x_hat)
        u_hat = np.where(trig[:, None], u, st.u_hat)
        phi = self.phi(x_hat)
        cost = self.stage_cost(x, u)
        last_tx = np.where(trig, st.k, st.last_tx)
        nxt = SimState(st.k + 1, x @ self.At + u @ self.Bt, x_hat, x_bar, u_hat, phi, last_tx)
        return nxt, StepRecord(st.k, x, x_hat, x_bar, u, trig, phi, cost, slack)

    def run(self, sim: SimConfig) -> SimResult:
        if sim.mode == EVENT_TRIGGERED and self.params is None:
            raise MissingTriggerParameters("event-triggered mode needs TriggerParameters")
        step = self.step_event_triggered if sim.mode == EVENT_TRIGGERED else self.step_all_time
        st = self.initial_state(sim.x0)
        d0 = self.disagreement_norm(st.x)
        g0 = self.disagreement_energy(st.x)
        tx = [[] for _ in range(self.N)]
        trace = [] if sim.record_trace else None
        cost, violations, worst = 0.0, 0, -np.inf
        steps = 0
        for _ in range(sim.horizon):
            if sim.stop_tol is not None and steps > 0 and \
                    self.disagreement_energy(st.x) <= sim.stop_tol * g0:
                break
            st, rec = step(st)
            steps += 1
            cost += rec.stage_cost
            for i in np.flatnonzero(rec.triggered):
                tx[i].append(rec.k)
            if rec.k > 0:
                violations += int(np.count_nonzero(rec.trigger_slack > 0))
                worst = max(worst, float(rec.trigger_slack.max()))
            if trace is not None:
                trace.append(rec)
        d_final = self.disagreement_norm(st.x)
        if sim.mode == ALL_TIME:
            frac = 1.0 if steps else 0.0
        else:
            frac = sum(map(len, tx)) / (self.N * steps) if steps else 0.0
        reached = d_final <= sim.consensus_tol * d0 if d0 > 0 else True
        return SimResult(
            mode=sim.mode,
            horizon=sim.horizon,
            steps=steps,
            cost=cost,
            transmissions=tuple(tuple(t) for t in tx),
            tx_fraction=frac,
            initial_disagreement=d0,
            final_disagreement=d_final,
            consensus_reached=bool(reached),
            trigger_violations=violations,
            max_trigger_slack=worst if np.isfinite(worst) else 0.0,
            trace=tuple(trace) if trace is not None else None,
        )


# -- module-level operations ---------------------------------------------------

def _split(net: NetworkSpec, v, dim: int, name: str) -> NDArray[np.float64]:
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size != net.num_agents * dim:
        raise DimensionMismatch(f"{name} must have length {net.num_agents * dim}, got {v.size}")
    return v.reshape(net.num_agents, dim)


def stage_cost(dyn: AgentDynamics, net: NetworkSpec, x, u) -> float:
    """``x'(L kron Q)x + u'(I kron R)u`` for stacked vectors."""
    xs = _split(net, x, dyn.n, "x")
    us = _split(net, u, dyn.m, "u")
    iu, ju = np.nonzero(np.triu(net.weights, 1))
    d = xs[iu] - xs[ju]
    disagreement = float((net.weights[iu, ju] * np.einsum("ej,jk,ek->e", d, dyn.Q, d)).sum())
    return disagreement + float(np.einsum("ij,jk,ik->", us, dyn.R, us))


def local_phi(dyn: AgentDynamics, net: NetworkSpec, design: BaselineDesign, x_hat, i: int) -> float:
    """Locally computable estimate of agent ``i``'s share of the stage cost."""
    if not 0 <= i < net.num_agents:
        raise IndexOutOfRange(f"agent index {i} outside 0..{net.num_agents - 1}")
    xh = np.asarray(x_hat, dtype=float).reshape(net.num_agents, dyn.n)
    nbrs = net.neighbors(i)
    d = xh[i] - xh[nbrs]
    a = net.weights[i, nbrs]
    zeta = a @ d
    fz = design.F @ zeta
    return float(0.5 * (a * np.einsum("ej,jk,ek->e", d, dyn.Q, d)).sum()
                 + design.c**2 * fz @ dyn.R @ fz)


def step_event_triggered(state: SimState, dyn, net, design, params) -> tuple[SimState, StepRecord]:
    return Simulator(dyn, net, design, params).step_event_triggered(state)


def run(sim: SimConfig, dyn, net, design, params: TriggerParameters | None = None) -> SimResult:
    return Simulator(dyn, net, design, params).run(sim)


# -- CSV export ------------------------------------------------------------------

def trace_csv(result: SimResult) -> str:
    """One row per (step, agent); ``stage_cost`` is the network-wide value at that step."""
    if result.trace is None:
        raise ValidationError("simulation was run without record_trace")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    first = result.trace[0] if result.trace else None
    n = first.x.shape[1] if first is not None else 0
    m = first.u.shape[1] if first is not None else 0
    w.writerow(["k", "agent"] + [f"x{j + 1}" for j in range(n)]
               + [f"xhat{j + 1}" for j in range(n)] + [f"u{j + 1}" for j in range(m)]
               + ["triggered", "phi", "stage_cost"])
    for rec in result.trace:
        for i in range(rec.x.shape[0]):
            w.writerow([rec.k, i + 1, *map(repr, rec.x[i].tolist()),
                        *map(repr, rec.x_hat[i].tolist()), *map(repr, rec.u[i].tolist()),
                        int(rec.triggered[i]), repr(float(rec.phi[i])), repr(rec.stage_cost)])
    return buf.getvalue()


SUMMARY_FIELDS = ("mode", "K", "cost", "tx_fraction", "consensus_reached", "final_disagreement")


def summary_rows(results) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_FIELDS)
    for r in results:
        w.writerow([r.mode, r.steps, repr(r.cost), repr(r.tx_fraction),
                    int(r.consensus_reached), repr(r.final_disagreement)])
    return buf.getvalue()

