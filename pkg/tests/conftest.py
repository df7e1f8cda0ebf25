import numpy as np
import pytest

from bioaction import gabor


@pytest.fixture(scope="session")
def dictionary():
    return gabor.build_dictionary(16, 2, 17)


@pytest.fixture(scope="session")
def small_dictionary():
    return gabor.build_dictionary(4, 1, 9)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")
    config._criteria = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None and (rep.when == "call" or (rep.when == "setup" and rep.failed)):
        detail = "; ".join(f"{k} {v}" for k, v in item.user_properties)
        item.config._criteria.append((mark.args[0], mark.args[1], rep.passed, detail))


def pytest_terminal_summary(terminalreporter, config):
    if not config._criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(config._criteria, key=lambda c: c[0]):
        line = f"criterion {number} {'PASS' if passed else 'FAIL'}: {title}"
        terminalreporter.write_line(line + (f" ({detail})" if detail else ""))
