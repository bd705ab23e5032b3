import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def random_orthogonal(rng, dim):
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


# Acceptance reporting: tests/test_acceptance.py records one line per
# criterion here and the summary is printed at the end of the run.
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion(request):
    """Record a pass/fail line for an acceptance criterion."""
    label = request.node.get_closest_marker("criterion").args[0]
    state = {"detail": ""}

    def note(detail):
        state["detail"] = detail

    yield note
    rep = getattr(request.node, "rep_call", None)
    passed = rep is not None and rep.passed
    ACCEPTANCE_RESULTS.append((label, passed, state["detail"]))


@pytest.hookimpl(hookwrapper=True, tryfirst=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {label}: {detail}")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion")
