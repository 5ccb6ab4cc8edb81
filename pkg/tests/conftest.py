import numpy as np
import pytest

from qudit_control import load_config
from qudit_control.config import build_problem, optimizer_config
from qudit_control.optimizer import initial_guess


def rel_diff(a, b) -> float:
    """Largest componentwise ``|a - b| / max(|a|, |b|)``; entries where both vanish count as 0."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    den = np.maximum(np.abs(a), np.abs(b))
    r = np.divide(np.abs(a - b), den, out=np.zeros_like(den), where=den > 0)
    return float(r.max(initial=0.0))


@pytest.fixture(scope="session")
def small_config():
    return load_config("builtin:small")


@pytest.fixture(scope="session")
def small_problem(small_config):
    return build_problem(small_config)


@pytest.fixture(scope="session")
def small_alpha(small_config, small_problem):
    return initial_guess(small_problem.num_params, optimizer_config(small_config))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def report_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"CRITERION {number:>2} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
