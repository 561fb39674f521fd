import pytest

from protolife.config import load_config


def small_config(**overrides):
    """A desk-sized world for fast engine tests."""
    text = """
[sim]
master_seed = 7
[physics]
world_radius = 10
[chemgrid]
chem_grid_size = 64
[engine]
n_plants = 12
n_protozoa = 8
n_formations = 2
stats_interval = 50
"""
    return load_config(text, env={}).replace(**overrides)


@pytest.fixture
def cfg():
    return load_config("", env={})


@pytest.fixture
def small_cfg():
    return small_config()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
