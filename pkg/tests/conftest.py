import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from varsob import Box
from varsob.quadrature import default_quadrature

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def unit():
    return Box([0.0], [1.0])


@pytest.fixture
def coarse():
    """64-cell 1-D rule: fast, accurate to ~1e-4 on smooth integrands."""
    return default_quadrature(1, cells_per_axis=64)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_configure(config):
    config.acceptance_lines = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", {})
    if not lines:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for k in sorted(lines):
        terminalreporter.write_line(lines[k])
