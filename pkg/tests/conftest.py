import pytest

from rehabmcts import _backend, bandit, prospects, spawner, tree

_KERNEL_USERS = (tree, prospects, spawner, bandit)

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(params=sorted(_backend.available_backends()))
def backend(request, monkeypatch):
    """Run a test once per importable kernel backend."""
    core = _backend.available_backends()[request.param]
    for mod in _KERNEL_USERS:
        monkeypatch.setattr(mod, "core", core)
    return request.param


def use_backend(monkeypatch, name):
    core = _backend.available_backends()[name]
    for mod in _KERNEL_USERS:
        monkeypatch.setattr(mod, "core", core)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
