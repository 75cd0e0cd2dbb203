"""Distributed event-triggered consensus with a certified LQ performance ratio."""

from .baseline import (
    AgentDynamics,
    BaselineDesign,
    design_baseline,
    gain_interval,
    j_all_closed_form,
    zoh_discretize,
)
from .errors import CertificateError, EtcError, NumericsError, ValidationError
from .graph import NetworkSpec, build_network, complete_weights, cycle_weights, path_weights
from .numerics import solve_dare, solve_dlyap, weighted_alpha
from .scenario import Scenario, load_scenario, parse_scenario
from .simulator import SimConfig, SimResult, Simulator, trace_csv
from .trigger_design import TriggerParameters, design_triggering

__all__ = [
    "AgentDynamics", "BaselineDesign", "design_baseline", "gain_interval", "j_all_closed_form",
    "zoh_discretize", "CertificateError", "EtcError", "NumericsError", "ValidationError",
    "NetworkSpec", "build_network", "complete_weights", "cycle_weights", "path_weights",
    "solve_dare", "solve_dlyap", "weighted_alpha", "Scenario", "load_scenario", "parse_scenario",
    "SimConfig", "SimResult", "Simulator", "trace_csv", "TriggerParameters", "design_triggering",
]
__version__ = "0.1.0"
