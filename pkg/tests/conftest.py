from __future__ import annotations

import numpy as np
import pytest

from reachavoid.games import builtin_problem
from reachavoid.solver import SolveConfig, solve_backward


def _solve(spec, counts, config):
    return solve_backward(spec.model, spec.l_scene, spec.g_scene, spec.grid(counts), config)


@pytest.fixture(scope="session")
def ex1():
    return builtin_problem("example1")


@pytest.fixture(scope="session")
def ex2():
    return builtin_problem("example2")


@pytest.fixture(scope="session")
def ex1_solve_51(ex1):
    return _solve(ex1, 51, SolveConfig(0.5, (0.5, 0.45, 0.3, 0.1, 0.05, 0.0)))


@pytest.fixture(scope="session")
def ex1_solve_101(ex1):
    return _solve(ex1, 101, SolveConfig.uniform(0.5, 26))


@pytest.fixture(scope="session")
def ex1_solve_201(ex1):
    return _solve(ex1, 201, SolveConfig.uniform(0.5, 26))


@pytest.fixture(scope="session")
def ex2_solve(ex2):
    # 51 frames: a 0.02 gap, containing 0.92, 0.6, 0.3 and 0
    return _solve(ex2, 41, SolveConfig.uniform(1.0, 51))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criterion number -> (passed, one-line summary), filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}
ACCEPTANCE_NAMES = {
    1: "Example 1 convergence",
    2: "1D characteristics oracle",
    3: "zero-dynamics fixed point",
    4: "augmentation equivalence (Example 1)",
    5: "Example 2 native vs augmented benchmark",
    6: "strategy soundness (Examples 1 and 2)",
    7: "invariant suite",
    8: "set growth on Example 2 (empirical)",
}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k, name in ACCEPTANCE_NAMES.items():
        if k in ACCEPTANCE:
            ok, detail = ACCEPTANCE[k]
            terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} [{k}] {name}: {detail}")
        else:
            terminalreporter.write_line(f"NOT RUN [{k}] {name}")
