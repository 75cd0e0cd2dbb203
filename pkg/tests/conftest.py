from pathlib import Path

import pytest

from etc_consensus.baseline import design_baseline
from etc_consensus.scenario import load_scenario
from etc_consensus.trigger_design import design_triggering

SCENARIO = Path(__file__).resolve().parents[1] / "scenarios" / "oscillator_cycle8.yaml"

# lines collected by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def scenario_path():
    return SCENARIO


@pytest.fixture(scope="session")
def oscillator():
    sc = load_scenario(SCENARIO)
    return sc, design_baseline(sc.dynamics, sc.network, sc.coupling_gain)


@pytest.fixture(scope="session")
def osc_params(oscillator):
    sc, design = oscillator
    return design_triggering(design, sc.network, sc.dynamics, sc.rho)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
