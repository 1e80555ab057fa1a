import numpy as np
import pytest

from magmapc import build_unit_square, taylor_hood
from magmapc import fem, problems


@pytest.fixture(scope="session")
def square4():
    mesh = build_unit_square(4)
    vmap, pmap = taylor_hood(mesh)
    return mesh, vmap, pmap


@pytest.fixture(scope="session")
def square8():
    mesh = build_unit_square(8)
    vmap, pmap = taylor_hood(mesh)
    return mesh, vmap, pmap


def make_verification_system(n, alpha, k):
    """Unit-square system with homogeneous Dirichlet velocity everywhere;
    right-hand side irrelevant for spectral checks."""
    mesh = build_unit_square(n)
    vmap, pmap = taylor_hood(mesh)
    system = fem.assemble_system(mesh, vmap, pmap, alpha, k,
                                 g_from_gravity=False)
    system = fem.apply_dirichlet(system, vmap, [(0, problems.zero_velocity)])
    return mesh, vmap, pmap, system


def rng(seed=0):
    return np.random.default_rng(seed)


ACCEPTANCE_LINES = []


def record_acceptance(line):
    """Collect acceptance verdict lines for the terminal summary (so they are
    visible even under output capturing)."""
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
