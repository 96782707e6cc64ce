import contextlib
import time

import numpy as np
import pytest
from hypothesis import settings

from qsum.borel_plane import continue_on_ray
from qsum.equation import slope_one_equation
from qsum.formal_solver import solve_formal
from qsum.laplace import sum_solution
from qsum.reduction import default_mu, reduce, to_conv_equation

settings.register_profile("qsum", max_examples=40, deadline=None)
settings.load_profile("qsum")


class Pipeline:
    """The slope-one example carried through every stage, computed once."""

    def __init__(self, lam=1.0, **kw):
        self.eq = slope_one_equation(**kw)
        self.sol = solve_formal(self.eq)
        self.mu = default_mu(self.eq, self.sol)
        self.red = reduce(self.eq, self.mu, self.sol)
        self.ceq = to_conv_equation(self.red)
        self.lam = lam
        self.grid = continue_on_ray(self.ceq, lam)
        self.W = sum_solution(self.eq, self.sol, self.grid, self.mu)


@pytest.fixture(scope="session")
def slope_one():
    return Pipeline()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


class _Record:
    detail = ""


@pytest.fixture
def acceptance(request):
    """Context manager that logs one PASS/FAIL line per acceptance criterion."""
    lines = request.config.stash[ACCEPTANCE]

    @contextlib.contextmanager
    def criterion(number, title):
        rec = _Record()
        t0 = time.perf_counter()
        try:
            yield rec
        except BaseException as e:
            line = f"criterion {number} FAIL  {title}: {type(e).__name__}: {str(e).splitlines()[0] if str(e) else ''}"
            lines.append(line)
            print(line)
            raise
        line = f"criterion {number} PASS  {title} ({time.perf_counter() - t0:.2f} s) {rec.detail}".rstrip()
        lines.append(line)
        print(line)

    return criterion


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
