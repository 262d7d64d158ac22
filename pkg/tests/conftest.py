from __future__ import annotations

import sys
from importlib import resources
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from swobs import Scenario, assemble_bank, load_scenario


def scenario_path(name: str) -> Path:
    return Path(str(resources.files("swobs").joinpath(f"scenarios/{name}.json")))


@pytest.fixture(scope="session")
def three_inertia() -> Scenario:
    return load_scenario(scenario_path("three_inertia"))


@pytest.fixture(scope="session")
def single_integrator() -> Scenario:
    return load_scenario(scenario_path("single_integrator"))


@pytest.fixture(scope="session")
def randomized_skew() -> Scenario:
    return load_scenario(scenario_path("randomized_skew"))


@pytest.fixture(scope="session")
def three_inertia_bank(three_inertia):
    return assemble_bank(
        three_inertia.plant,
        three_inertia.schedule,
        gains=three_inertia.gains,
        targets=three_inertia.targets,
        T_c=three_inertia.T_c,
        use_transform=True,
    )
