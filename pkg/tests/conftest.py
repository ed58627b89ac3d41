import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from flowshield.dataset import FlowTable

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_table(X, y, names=None):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    names = names or [f"f{j}" for j in range(X.shape[1])]
    return FlowTable.from_arrays(X, np.asarray(y), names)


@pytest.fixture(scope="session")
def planted():
    from flowshield.synthetic import planted_corpus

    return planted_corpus(50_000, seed=42)


@pytest.fixture(scope="session")
def planted_split(planted):
    from flowshield.evaluation import stratified_split

    return stratified_split(planted, 0.2, 42)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number, title: str, passed: bool, detail: str = "") -> None:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
