import pytest

ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


@pytest.fixture
def record(request):
    """record(n, ok, detail) stores one sub-check of acceptance criterion n."""
    store = request.config.stash[ACCEPTANCE]

    def _record(n, ok, detail):
        store.setdefault(n, []).append((bool(ok), detail))
        return ok

    return _record


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash.get(ACCEPTANCE, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(store):
        parts = store[n]
        verdict = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {verdict}  " + "; ".join(d for _, d in parts))
