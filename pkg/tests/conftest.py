from __future__ import annotations

import pytest

from amdd.fixtures import uvf_constraints_text, uvf_model, uvf_ontology_text
from amdd.ocl import bind, parse_constraints
from amdd.ontology import parse_ontology

CRITERIA = {
    1: "reference complexity table (analyzer)",
    2: "reference complexity table (generator calibration)",
    3: "risk-band boundaries",
    4: "protocol reproduction",
    5: "enhancement detection",
    6: "constraint enforcement",
    7: "property suites",
    8: "LLM path (mock)",
}

_outcomes: dict[int, list[bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion exercised by the test")
    config.addinivalue_line("markers", "live: needs a real LLM endpoint (deselected by default)")


def pytest_collection_modifyitems(config, items):
    skip_live = pytest.mark.skip(reason="live endpoint tests are opt-in (-m live)")
    if "live" in (config.getoption("-m") or ""):
        return
    for item in items:
        if "live" in item.keywords:
            item.add_marker(skip_live)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _outcomes.setdefault(marker.args[0], []).append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in CRITERIA.items():
        results = _outcomes.get(n)
        if results is None:
            status = "NOT RUN"
        else:
            status = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {status} - {title} ({len(results or [])} checks)")


@pytest.fixture(scope="session")
def model():
    return uvf_model()


@pytest.fixture(scope="session")
def bound(model):
    return bind(parse_constraints(uvf_constraints_text()), model)


@pytest.fixture(scope="session")
def registry():
    return parse_ontology(uvf_ontology_text())
