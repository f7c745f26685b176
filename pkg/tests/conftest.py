import re

import numpy as np
import pytest

SEED = 2022

_CRITERION = re.compile(r"test_criterion_(\d+)_(\w+)")
_RESULTS = {}


def kron_all(ops):
    out = np.eye(1, dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def site_op(op, site, n):
    """Dense oracle: ``op`` on 1-based ``site`` of an n-site register."""
    eye = np.eye(2, dtype=complex)
    return kron_all([op if i == site else eye for i in range(1, n + 1)])


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    if report.when == "call" or report.failed:
        num = int(m.group(1))
        if report.when == "call" or num not in _RESULTS:
            _RESULTS[num] = (report.passed, m.group(2).replace("_", " "))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_RESULTS):
        ok, title = _RESULTS[num]
        terminalreporter.write_line(f"ACCEPTANCE {num:02d} {'PASS' if ok else 'FAIL'} {title}")
    n_pass = sum(ok for ok, _ in _RESULTS.values())
    terminalreporter.write_line(f"ACCEPTANCE {n_pass}/{len(_RESULTS)} criteria passed")
