import numpy as np
import pytest

from advest.calibration import synthetic_processes
from advest.dp import ExogenousProcesses, make_grid, solve_policy
from advest.params import FiscalParams, PreferenceParams


def flat_processes(t_min=70, t_max=100, n_pi=2, survival=1.0, healthy=1.0, med_loc=-50.0,
                   med_scale=0.0, income=0.0, rho=0.0, sigma_xi=0.0, sigma_eps=0.0):
    """Processes that are constant across states; death is certain at ``t_max``."""
    n_ages = t_max - t_min + 1
    shape = (2, 2, n_pi, n_ages)
    pi_s = np.full(shape, survival)
    pi_s[..., -1] = 0.0
    return ExogenousProcesses(
        pi_h=np.full(shape, healthy), pi_s=pi_s, med_loc=np.full(shape, med_loc),
        med_scale=np.full(shape, med_scale), income=np.full((2, n_pi, n_ages), income),
        rho=rho, sigma_xi=sigma_xi, sigma_eps=sigma_eps, pi_nodes=np.linspace(0, 1, n_pi),
        t_min=t_min, t_max=t_max, label="flat test economy",
    )


@pytest.fixture(scope="session")
def synthetic():
    procs = synthetic_processes()
    fiscal = FiscalParams()
    grid = make_grid(procs, fiscal)
    return procs, fiscal, grid


@pytest.fixture(scope="session")
def truth_solution(synthetic):
    procs, fiscal, grid = synthetic
    params = PreferenceParams(3.8, 0.25, 10_000.0)
    return params, solve_policy(params, fiscal, procs, grid)


# one pass/fail line per acceptance criterion, taken from the actual outcomes
_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion n")


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    failed = call.excinfo is not None and not call.excinfo.errisinstance(pytest.skip.Exception)
    prev = _CRITERIA.get(n, (title, True))
    _CRITERIA[n] = (title, prev[1] and not failed)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}")
