import numpy as np
import pytest
from hypothesis import strategies as st

from telecnot.qstate import QubitState


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def complex_vectors(n_qubits: int):
    dim = 2**n_qubits
    part = st.floats(-1, 1, allow_nan=False, allow_infinity=False)
    return (
        st.lists(st.tuples(part, part), min_size=dim, max_size=dim)
        .map(lambda xs: np.array([a + 1j * b for a, b in xs]))
        .filter(lambda v: np.linalg.norm(v) > 1e-3)
    )


def qubit_states(n_qubits: int):
    return complex_vectors(n_qubits).map(QubitState.from_amplitudes)


# acceptance criteria report: one line per criterion in the terminal summary

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _CRITERIA[number] = (title, "PASS" if rep.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status = _CRITERIA[number]
        terminalreporter.write_line(f"[{status}] criterion {number:>2}: {title}")
