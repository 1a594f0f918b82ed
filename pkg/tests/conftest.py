import numpy as np
import pytest

from repmtl import TaskData, orthonormalize

ACCEPTANCE_LINES = {}


def record_criterion(num: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[num] = f"[criterion {num}] {'PASS' if passed else 'FAIL'} {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for num in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[num])


def random_basis(rng, p, r):
    return orthonormalize(rng.standard_normal((p, r)))


def random_rotation(rng, r):
    Q, _ = np.linalg.qr(rng.standard_normal((r, r)))
    return Q


def linear_task(rng, n, p, beta, noise_sd=0.1):
    X = rng.standard_normal((n, p))
    Y = X @ beta + noise_sd * rng.standard_normal(n)
    return TaskData(X, Y)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
