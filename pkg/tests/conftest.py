import numpy as np
import pytest

from mnlqg import (
    Controller,
    CostModel,
    NoiseModel,
    NoiseTerm,
    ProblemInstance,
    SystemModel,
    pendulum_problem,
)

# Filled by the acceptance suite; echoed at the end of the run so the
# per-criterion verdicts are visible without -s.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_scalar_problem(sigma_a=0.0, w_diag=(0.01, 0.01)):
    """Scalar instance a=0.5, b=c=1 with optional state-dependent noise."""
    noise_a = (NoiseTerm(sigma_a, [[1.0]]),) if sigma_a else ()
    system = SystemModel(
        A=[[0.5]], B=[[1.0]], C=[[1.0]], noise_a=noise_a
    )
    return ProblemInstance(
        system,
        CostModel(np.eye(2)),
        NoiseModel(W=np.diag(w_diag), X0=np.zeros((1, 1))),
    )


def make_random_controller(problem, rng, scale=0.3):
    """Arbitrary (not necessarily stabilizing) controller with matching dims."""
    n, m, p = problem.n, problem.m, problem.p
    return Controller(
        F=scale * rng.standard_normal((n, n)),
        K=scale * rng.standard_normal((m, n)),
        L=scale * rng.standard_normal((n, p)),
    )


@pytest.fixture
def scalar_problem():
    return make_scalar_problem()


@pytest.fixture
def scalar_mult_problem():
    return make_scalar_problem(sigma_a=0.3)


@pytest.fixture
def pendulum_quiet():
    return pendulum_problem(0.0)
