"""Scenario files: strict YAML schema mirroring the design pipeline inputs.

Example::

    dynamics:
      continuous: {A: [[0, 1], [-1, 0]], B: [[0], [1]], period: 0.05}
    weights: {Q: [[2, 0], [0, 1]], Q_l: [[2, 0], [0, 1]], R: [[1]]}
    graph: {generator: cycle, agents: 8, weight: 1.0}
    design: {rho: 1.2, coupling_gain: 0.88}
    simulation:
      horizon: 200
      x0: {random: {seed: 42, scale: 1.0}}

``dynamics`` takes either ``continuous`` (zero-order-hold sampled) or
``discrete: {A, B}``. ``graph`` takes either ``weights: [[...]]`` or a
``generator`` among cycle, path, complete. ``design.eps_grid`` is optional:
an explicit list or ``{count, low, high}`` for a log-spaced grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .baseline import AgentDynamics, zoh_discretize
from .errors import ValidationError
from .graph import GENERATORS, NetworkSpec, build_network

_SCHEMA = {
    "dynamics": {"continuous": {"A", "B", "period"}, "discrete": {"A", "B"}},
    "weights": {"Q", "Q_l", "R"},
    "graph": {"weights", "generator", "agents", "weight"},
    "design": {"rho", "eps_grid", "coupling_gain"},
    "simulation": {"horizon", "x0", "consensus_tol"},
    "output": None,
}


@dataclass(frozen=True)
class Scenario:
    dynamics: AgentDynamics
    network: NetworkSpec
    rho: float
    eps_grid: np.ndarray | None
    coupling_gain: object
    horizon: int
    consensus_tol: float
    x0_explicit: np.ndarray | None
    x0_seed: int
    x0_scale: float
    output: str
    raw: dict

    def x0(self, seed: int | None = None, trial: int | None = None) -> np.ndarray:
        """Initial state: the explicit vector, or uniform draws in ``[-scale, scale]``.

        Random draws come from ``numpy.random.default_rng(seed)`` (PCG64); Monte
        Carlo trial ``t`` uses ``default_rng([seed, t])``.
        """
        if self.x0_explicit is not None:
            return self.x0_explicit.copy()
        s = self.x0_seed if seed is None else int(seed)
        rng = np.random.default_rng(s if trial is None else [s, trial])
        size = self.network.num_agents * self.dynamics.n
        return rng.uniform(-self.x0_scale, self.x0_scale, size)


def _reject_unknown(section: str, got: dict, allowed) -> None:
    extra = set(got) - set(allowed)
    if extra:
        raise ValidationError(f"unknown key(s) in {section}: {sorted(extra)}")


def _matrix(v, name: str) -> np.ndarray:
    try:
        arr = np.atleast_2d(np.array(v, dtype=float))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name} is not a numeric matrix") from exc
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be a matrix")
    return arr


def _require(section: str, data: dict, key: str):
    if key not in data:
        raise ValidationError(f"missing key {section}.{key}")
    return data[key]


def parse_scenario(data: dict, connectivity_tol: float | None = None) -> Scenario:
    if not isinstance(data, dict):
        raise ValidationError("scenario must be a mapping")
    _reject_unknown("scenario", data, _SCHEMA)
    for key in ("dynamics", "weights", "graph", "design"):
        if not isinstance(data.get(key), dict):
            raise ValidationError(f"missing or malformed section {key!r}")

    dyn_sec = data["dynamics"]
    _reject_unknown("dynamics", dyn_sec, _SCHEMA["dynamics"])
    if len(dyn_sec) != 1:
        raise ValidationError("dynamics needs exactly one of 'continuous' or 'discrete'")
    kind, spec = next(iter(dyn_sec.items()))
    _reject_unknown(f"dynamics.{kind}", spec, _SCHEMA["dynamics"][kind])
    a = _matrix(_require(kind, spec, "A"), "A")
    b = _matrix(_require(kind, spec, "B"), "B")
    if kind == "continuous":
        period = float(_require(kind, spec, "period"))
        if period <= 0:
            raise ValidationError("sampling period must be positive")
        a, b = zoh_discretize(a, b, period)

    w = data["weights"]
    _reject_unknown("weights", w, _SCHEMA["weights"])
    q = _matrix(_require("weights", w, "Q"), "Q")
    dyn = AgentDynamics(a, b, q, _matrix(w.get("Q_l", q), "Q_l"), _matrix(_require("weights", w, "R"), "R"))

    g = data["graph"]
    _reject_unknown("graph", g, _SCHEMA["graph"])
    if ("weights" in g) == ("generator" in g):
        raise ValidationError("graph needs exactly one of 'weights' or 'generator'")
    if "weights" in g:
        weights = _matrix(g["weights"], "graph.weights")
    else:
        gen = g["generator"]
        if gen not in GENERATORS:
            raise ValidationError(f"unknown graph generator {gen!r}; choose from {sorted(GENERATORS)}")
        agents = int(_require("graph", g, "agents"))
        weights = GENERATORS[gen](agents, float(g.get("weight", 1.0)))
    kwargs = {} if connectivity_tol is None else {"connectivity_tol": connectivity_tol}
    net = build_network(weights, **kwargs)

    d = data["design"]
    _reject_unknown("design", d, _SCHEMA["design"])
    rho = float(_require("design", d, "rho"))
    grid = d.get("eps_grid")
    if isinstance(grid, dict):
        _reject_unknown("design.eps_grid", grid, {"count", "low", "high"})
        grid = np.geomspace(float(grid.get("low", 1e-3)),
                            float(grid.get("high", 0.98 * (1 - 1 / rho))), int(grid.get("count", 40)))
    elif grid is not None:
        grid = np.array(grid, dtype=float).reshape(-1)
    gain = d.get("coupling_gain", "midpoint")
    if gain != "midpoint":
        try:
            gain = float(gain)
        except (TypeError, ValueError) as exc:
            raise ValidationError("coupling_gain must be 'midpoint' or a number") from exc

    s = data.get("simulation") or {}
    _reject_unknown("simulation", s, _SCHEMA["simulation"])
    horizon = int(s.get("horizon", 200))
    if horizon < 0:
        raise ValidationError("horizon must be nonnegative")
    x0_spec = s.get("x0", {"random": {"seed": 0, "scale": 1.0}})
    explicit, seed, scale = None, 0, 1.0
    if isinstance(x0_spec, dict) and set(x0_spec) == {"random"}:
        r = x0_spec["random"] or {}
        _reject_unknown("simulation.x0.random", r, {"seed", "scale"})
        seed, scale = int(r.get("seed", 0)), float(r.get("scale", 1.0))
    elif isinstance(x0_spec, dict) and set(x0_spec) == {"explicit"}:
        explicit = np.array(x0_spec["explicit"], dtype=float).reshape(-1)
        if explicit.size != net.num_agents * dyn.n:
            raise ValidationError(f"explicit x0 must have {net.num_agents * dyn.n} entries")
    else:
        raise ValidationError("simulation.x0 must be {random: {...}} or {explicit: [...]}")

    return Scenario(dyn, net, rho, grid, gain, horizon, float(s.get("consensus_tol", 1e-6)),
                    explicit, seed, scale, str(data.get("output", "out")), data)


def load_scenario(path, connectivity_tol: float | None = None) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read scenario {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ValidationError(f"malformed YAML in {path}: {exc}") from exc
    return parse_scenario(data, connectivity_tol)
