import pytest

from tdglobal import gcp, presets


@pytest.fixture(scope="session")
def lin():
    return presets.get_preset("LIN")


@pytest.fixture(scope="session")
def gas():
    return presets.get_preset("GAS")


@pytest.fixture(scope="session")
def lin_ctx(lin):
    return gcp.GcpContext(lin.flow, window=presets.WINDOW)


@pytest.fixture(scope="session")
def gas_ctx(gas):
    return gcp.GcpContext(gas.flow, window=presets.WINDOW)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
