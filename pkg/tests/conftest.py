import numpy as np
import pytest

from kfrelax.samplers import Rng


@pytest.fixture
def rng():
    return Rng(1234)


def random_spd(gen, n, jitter=0.1):
    m = gen.normal((n, n))
    return m @ m.T + jitter * np.eye(n)


# one pass/fail line per acceptance criterion, echoed again in the terminal summary
CRITERIA = []


@pytest.fixture
def report(capsys):
    def _report(number, title, ok, detail):
        line = f"[criterion {number:>2}] {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        CRITERIA.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA):
            terminalreporter.write_line(line)
