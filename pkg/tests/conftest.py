import pytest


def pytest_collection_modifyitems(config, items):
    # acceptance last, so criterion 10 can read the property-suite outcomes
    items.sort(key=lambda it: "test_acceptance.py::" in it.nodeid)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if "test_properties.py::" in item.nodeid and (rep.when == "call" or rep.failed):
        store = item.config.__dict__.setdefault("_jetvar_property_outcomes", {})
        store[item.nodeid] = store.get(item.nodeid, True) and rep.passed


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
