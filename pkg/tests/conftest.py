import numpy as np
import pytest

from whittlelearn import envs


@pytest.fixture
def circular():
    return envs.make_circular()


@pytest.fixture
def restart():
    return envs.make_restart()


@pytest.fixture
def unstructured():
    return envs.make_unstructured()


@pytest.fixture
def walk5():
    return envs.make_random_walk(5, 0.9)


def all_models():
    return [
        envs.make_circular(),
        envs.make_unstructured(),
        envs.make_restart(),
        envs.make_random_walk(5, 0.9),
        envs.make_random_walk(25, 0.95),
    ]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(LINES):
            terminalreporter.write_line(LINES[n])
