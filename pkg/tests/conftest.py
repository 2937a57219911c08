import importlib.resources as ir

import pytest

from oscbench.harness import assemble_problem
from oscbench.hypotheses import load_config


def config_path(name: str) -> str:
    return str(ir.files("oscbench") / "configs" / name)


@pytest.fixture(scope="session")
def quadric_problem():
    return assemble_problem(load_config(config_path("quadric_case2.json")))


@pytest.fixture(scope="session")
def cross_problem():
    return assemble_problem(load_config(config_path("cross_case1.json")))
