"""Shared fixtures and the runtime tiers.

Tier 1 runs by default.  ``--tier 2`` (or CENSUS_TIER=2) adds the
medium-length checks, ``--tier 3`` the full cubic fourfold census.
"""

import os

import numpy as np
import pytest

from hypercensus import ffla, symspace


def pytest_addoption(parser):
    parser.addoption("--tier", type=int, default=int(os.environ.get("CENSUS_TIER", "1")),
                     help="highest runtime tier to run (1, 2 or 3)")


def pytest_configure(config):
    for t in (2, 3):
        config.addinivalue_line("markers", f"tier{t}: needs --tier {t} or higher")
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion n")


def pytest_runtest_logreport(report):
    info = getattr(report, "criterion", None)
    if info is None:
        return
    n, title = info
    table = _CRITERIA.setdefault(n, {"title": title, "outcomes": [], "notes": []})
    if report.when == "call" or report.outcome != "passed":
        table["outcomes"].append(report.outcome)
        if report.outcome == "skipped" and isinstance(report.longrepr, tuple):
            table["notes"].append(report.longrepr[2])


_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = tuple(marker.args)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        entry = _CRITERIA[n]
        outs = entry["outcomes"]
        if "failed" in outs:
            verdict = "FAIL"
        elif outs and all(o == "skipped" for o in outs):
            verdict = "SKIP"
        else:
            verdict = "PASS"
        line = f"criterion {n:2d} {verdict:4s}  {entry['title']}"
        if verdict == "SKIP" and entry["notes"]:
            line += f"  ({entry['notes'][0].removeprefix('Skipped: ')})"
        terminalreporter.write_line(line)


def pytest_collection_modifyitems(config, items):
    tier = config.getoption("--tier")
    for item in items:
        for t in (2, 3):
            if item.get_closest_marker(f"tier{t}") and tier < t:
                item.add_marker(pytest.mark.skip(reason=f"tier {t} test; run with --tier {t}"))


@pytest.fixture(scope="session")
def tier(request):
    return request.config.getoption("--tier")


@pytest.fixture(scope="session")
def F2():
    return ffla.field_of_size(2)


@pytest.fixture(scope="session")
def cubic_basis():
    return symspace.monomials(6, 3)


X1_TEXT = "x0*x3^2 + x1*x4^2 + x2*x5^2 + x0^2*x3 + x1^2*x4 + x2^2*x5"
FERMAT_TEXT = "x0^3 + x1^3 + x2^3 + x3^3 + x4^3 + x5^3"


@pytest.fixture(scope="session")
def x1(F2, cubic_basis):
    return symspace.parse_poly(X1_TEXT, cubic_basis, F2)


@pytest.fixture(scope="session")
def fermat(F2, cubic_basis):
    return symspace.parse_poly(FERMAT_TEXT, cubic_basis, F2)


def random_form(basis, field, rng, sparsity=0.0):
    """Uniform random nonzero form; ``sparsity`` zeroes that share of coefficients."""
    while True:
        arr = rng.integers(0, field.q, basis.size)
        if sparsity:
            arr[rng.random(basis.size) < sparsity] = 0
        f = symspace.Form.from_array(basis, field, arr)
        if not f.is_zero():
            return f


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
