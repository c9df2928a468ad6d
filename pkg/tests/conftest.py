import numpy as np
import pytest

from carleman_cauchy.forward import add_noise, differentiate_trace, extract_trace, study_problem, solve_forward
from carleman_cauchy.functional import FunctionalConfig, TikhonovFunctional, build_extension
from carleman_cauchy.grid import build_grid


def make_functional(N, M, nonlinearity="S1", lam=3.0, beta=0.00063, noise=0.05, seed=3):
    grid = build_grid(N, M)
    spec = study_problem(nonlinearity)
    u = solve_forward(spec, grid)
    trace = differentiate_trace(add_noise(extract_trace(u, grid), noise, seed), grid)
    F = build_extension(trace, grid)
    return TikhonovFunctional(FunctionalConfig(lam=lam, beta=beta), F, spec, trace, grid)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for line in mod.LINES:
            terminalreporter.write_line(line)
